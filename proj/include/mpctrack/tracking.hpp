#pragma once

#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mpctrack/geometry.hpp"
#include "mpctrack/kpowermeans.hpp"
#include "mpctrack/seeding.hpp"
#include "mpctrack/types.hpp"

namespace mpctrack {

/// Constant-velocity state-space model with unit time steps.
/// A advances each (position, velocity) axis pair, D observes positions.
struct KalmanModel {
    Mat6 A = Mat6::Identity();
    Mat36 D = Mat36::Zero();
    Mat6 Q = Mat6::Identity();
    Mat3 R = Mat3::Identity();
};

inline KalmanModel make_kalman_model(double q_scale, double r_scale) {
    if (!(q_scale > 0.0) || !(r_scale > 0.0))
        throw std::invalid_argument("make_kalman_model: scales must be positive");
    KalmanModel m;
    for (int axis = 0; axis < 3; ++axis) {
        m.A(2 * axis, 2 * axis + 1) = 1.0;
        m.D(axis, 2 * axis) = 1.0;
    }
    m.Q = q_scale * Mat6::Identity();
    m.R = r_scale * Mat3::Identity();
    return m;
}

struct StateEstimate {
    Vec6 theta = Vec6::Zero();
    Mat6 cov = Mat6::Zero();
};

/// theta' = A theta, M' = A M A^T + Q.
inline StateEstimate predict(const TrackState& t, const KalmanModel& model) {
    StateEstimate out;
    out.theta = model.A * t.theta;
    Mat6 cov = model.A * t.cov * model.A.transpose() + model.Q;
    out.cov = (cov + cov.transpose()) / 2.0;
    return out;
}

/// Standard Kalman update with gain K = M D^T (D M D^T + R)^{-1}.
inline StateEstimate update(const Vec6& theta_pred, const Mat6& cov_pred,
                            const Vec3& observation, const KalmanModel& model) {
    const Mat3 innovation_cov =
        model.D * cov_pred * model.D.transpose() + model.R;
    const Eigen::Matrix<double, 6, 3> gain =
        cov_pred * model.D.transpose() * innovation_cov.inverse();
    StateEstimate out;
    out.theta = theta_pred + gain * (observation - model.D * theta_pred);
    Mat6 cov = (Mat6::Identity() - gain * model.D) * cov_pred;
    out.cov = (cov + cov.transpose()) / 2.0;
    return out;
}

/// Mutual-nearest association between the cluster sets of two consecutive
/// snapshots. `pairs` holds (old cluster_id, new cluster index).
struct Association {
    std::vector<std::pair<int, std::size_t>> pairs;
    std::vector<int> unmatched_old;
    std::vector<std::size_t> unmatched_new;
};

/// Scores every (old, new) pair with the Gaussian closeness function in both
/// directions: new centroids against old cluster shapes, old centroids
/// against new cluster shapes. A pair is associated iff each is the other's
/// argmax (ties to the lowest index); everything else is unmatched.
inline Association associate(std::span<const ClusterParams> old_clusters,
                             std::span<const ClusterParams> new_clusters,
                             double eps) {
    Association out;
    if (old_clusters.empty() || new_clusters.empty()) {
        for (const ClusterParams& c : old_clusters)
            out.unmatched_old.push_back(c.cluster_id);
        for (std::size_t j = 0; j < new_clusters.size(); ++j)
            out.unmatched_new.push_back(j);
        return out;
    }

    std::vector<std::size_t> best_old(new_clusters.size(), 0);
    for (std::size_t j = 0; j < new_clusters.size(); ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < old_clusters.size(); ++i) {
            const double d = closeness(new_clusters[j].centroid,
                                       old_clusters[i].centroid,
                                       old_clusters[i].spread, eps);
            if (d > best) {
                best = d;
                best_old[j] = i;
            }
        }
    }
    std::vector<std::size_t> best_new(old_clusters.size(), 0);
    for (std::size_t i = 0; i < old_clusters.size(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < new_clusters.size(); ++j) {
            const double d = closeness(old_clusters[i].centroid,
                                       new_clusters[j].centroid,
                                       new_clusters[j].spread, eps);
            if (d > best) {
                best = d;
                best_new[i] = j;
            }
        }
    }

    std::vector<bool> new_matched(new_clusters.size(), false);
    for (std::size_t i = 0; i < old_clusters.size(); ++i) {
        const std::size_t j = best_new[i];
        if (best_old[j] == i) {
            out.pairs.emplace_back(old_clusters[i].cluster_id, j);
            new_matched[j] = true;
        } else {
            out.unmatched_old.push_back(old_clusters[i].cluster_id);
        }
    }
    for (std::size_t j = 0; j < new_clusters.size(); ++j)
        if (!new_matched[j]) out.unmatched_new.push_back(j);
    return out;
}

/// One tracked cluster: Kalman state plus the cluster observation it was last
/// associated with (the shape used by the closeness test).
struct TrackEntry {
    TrackState state;
    ClusterParams last_obs;
};

/// Owns cluster identities across snapshots. Tracks move from active to
/// retired the first time they fail to associate.
struct TrackRegistry {
    std::vector<TrackEntry> active;
    std::vector<TrackState> retired;
    int next_id = 0;

    std::vector<TrackState> all_tracks() const {
        std::vector<TrackState> out;
        out.reserve(active.size() + retired.size());
        for (const TrackEntry& e : active) out.push_back(e.state);
        out.insert(out.end(), retired.begin(), retired.end());
        return out;
    }
};

namespace detail {

inline Mat6 initial_track_cov(const KalmanModel& model) {
    // Velocity is unobserved at birth, so its variance dominates.
    const double r = model.R(0, 0);
    Mat6 cov = Mat6::Zero();
    for (int axis = 0; axis < 3; ++axis) {
        cov(2 * axis, 2 * axis) = r;
        cov(2 * axis + 1, 2 * axis + 1) = 10.0 * r;
    }
    return cov;
}

}  // namespace detail

/// Advances the registry by one snapshot: associates the new clustering with
/// the active tracks, Kalman-updates matches, retires unmatched tracks, and
/// opens fresh tracks (zero initial velocity) for unmatched clusters.
/// Rewrites each cluster's cluster_id to its track id and returns the
/// predicted centroid of every active track for the next snapshot's seeding.
inline std::vector<PredictedCentroid> step_registry(TrackRegistry& reg,
                                                    Clustering& clustering,
                                                    const KalmanModel& model,
                                                    int snapshot_index,
                                                    double spread_eps) {
    std::vector<ClusterParams> old_params;
    old_params.reserve(reg.active.size());
    for (const TrackEntry& e : reg.active) old_params.push_back(e.last_obs);

    const Association assoc =
        associate(old_params, clustering.clusters, spread_eps);

    std::vector<TrackEntry> next_active;
    next_active.reserve(reg.active.size() + clustering.clusters.size());

    for (TrackEntry& entry : reg.active) {
        const int id = entry.state.cluster_id;
        const auto match =
            std::find_if(assoc.pairs.begin(), assoc.pairs.end(),
                         [id](const auto& p) { return p.first == id; });
        if (match == assoc.pairs.end()) {
            reg.retired.push_back(entry.state);
            continue;
        }
        ClusterParams& obs = clustering.clusters[match->second];
        const StateEstimate pred = predict(entry.state, model);
        const StateEstimate upd =
            update(pred.theta, pred.cov, obs.centroid, model);
        entry.state.theta = upd.theta;
        entry.state.cov = upd.cov;
        entry.state.last_seen = snapshot_index;
        entry.state.lifetime += 1;
        obs.cluster_id = id;
        entry.last_obs = obs;
        next_active.push_back(std::move(entry));
    }

    for (std::size_t j : assoc.unmatched_new) {
        ClusterParams& obs = clustering.clusters[j];
        TrackEntry entry;
        entry.state.cluster_id = reg.next_id++;
        entry.state.theta << obs.centroid.x(), 0.0, obs.centroid.y(), 0.0,
            obs.centroid.z(), 0.0;
        entry.state.cov = detail::initial_track_cov(model);
        entry.state.born_at = snapshot_index;
        entry.state.last_seen = snapshot_index;
        entry.state.lifetime = 1;
        obs.cluster_id = entry.state.cluster_id;
        entry.last_obs = obs;
        next_active.push_back(std::move(entry));
    }

    reg.active = std::move(next_active);

    std::vector<PredictedCentroid> predictions;
    predictions.reserve(reg.active.size());
    for (const TrackEntry& e : reg.active) {
        const Vec6 ahead = model.A * e.state.theta;
        predictions.push_back({model.D * ahead, e.last_obs.power});
    }
    return predictions;
}

}  // namespace mpctrack
