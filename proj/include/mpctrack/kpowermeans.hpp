#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpctrack/geometry.hpp"
#include "mpctrack/seeding.hpp"
#include "mpctrack/types.hpp"

namespace mpctrack {

/// Result of clustering one snapshot. `assignment[i]` is the cluster index of
/// the i-th retained MPC; `objective` is the power-weighted compactness
/// sum_l p_l * mcd(chi_l, mu_{a(l)}).
struct Clustering {
    std::vector<ClusterParams> clusters;
    std::vector<std::size_t> assignment;
    double objective = 0.0;
};

/// Thrown when Lloyd iteration fails to reach a fixed point within
/// max_lloyd_iters; carries the last clustering state reached.
class IterationLimitExceeded : public std::runtime_error {
public:
    IterationLimitExceeded(const std::string& msg, Clustering last)
        : std::runtime_error(msg), last_(std::move(last)) {}

    const Clustering& last() const { return last_; }

private:
    Clustering last_;
};

/// Drops the weakest MPCs while the removed power stays within
/// (1 - power_keep_frac) of the snapshot total. Returns retained indices in
/// ascending order; clustering operates on this set only.
inline std::vector<std::size_t> prune_noise(std::span<const double> powers,
                                            const PipelineConfig& cfg) {
    if (powers.empty())
        throw std::invalid_argument("prune_noise: empty input");
    const double total = std::accumulate(powers.begin(), powers.end(), 0.0);
    const double budget = (1.0 - cfg.power_keep_frac) * total;

    std::vector<std::size_t> order(powers.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (powers[a] != powers[b]) return powers[a] < powers[b];
        return a < b;
    });

    std::vector<bool> removed(powers.size(), false);
    double cum = 0.0;
    for (std::size_t i : order) {
        if (cum + powers[i] > budget) break;
        cum += powers[i];
        removed[i] = true;
    }

    std::vector<std::size_t> retained;
    retained.reserve(powers.size());
    for (std::size_t i = 0; i < powers.size(); ++i)
        if (!removed[i]) retained.push_back(i);
    return retained;
}

/// Nearest-centroid assignment by MCD, ties to the lowest cluster index.
/// Equivalent to minimizing p_l * mcd per MPC since p_l > 0 is fixed per row.
inline std::vector<std::size_t> assign(std::span<const Vec3> points,
                                       std::span<const Vec3> centroids,
                                       const AxisRanges& ranges) {
    if (centroids.empty())
        throw std::invalid_argument("assign: no centroids");
    std::vector<std::size_t> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        out[i] = detail::nearest_centroid(points[i], centroids, ranges);
    return out;
}

/// Power-weighted mean per cluster; empty clusters are omitted from the
/// output, so the result may be shorter than k.
inline std::vector<Vec3> update_centroids(std::span<const Vec3> points,
                                          std::span<const double> powers,
                                          std::span<const std::size_t> assignment,
                                          std::size_t k) {
    std::vector<Vec3> acc(k, Vec3::Zero());
    std::vector<double> total(k, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        acc[assignment[i]] += powers[i] * points[i];
        total[assignment[i]] += powers[i];
    }
    std::vector<Vec3> out;
    out.reserve(k);
    for (std::size_t c = 0; c < k; ++c)
        if (total[c] > 0.0) out.push_back(acc[c] / total[c]);
    return out;
}

namespace detail {

inline Clustering build_clustering(std::span<const Vec3> points,
                                   std::span<const double> powers,
                                   std::span<const Vec3> centroids,
                                   std::vector<std::size_t> assignment,
                                   const AxisRanges& ranges) {
    Clustering out;
    out.clusters.resize(centroids.size());
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        out.clusters[c].cluster_id = static_cast<int>(c);
        out.clusters[c].centroid = centroids[c];
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        ClusterParams& cl = out.clusters[assignment[i]];
        cl.members.push_back(i);
        cl.power += powers[i];
        out.objective += powers[i] * mcd(points[i], centroids[assignment[i]], ranges);
    }
    for (ClusterParams& cl : out.clusters) {
        cl.size = cl.members.size();
        std::vector<Vec3> pts;
        std::vector<double> pws;
        pts.reserve(cl.size);
        pws.reserve(cl.size);
        for (std::size_t i : cl.members) {
            pts.push_back(points[i]);
            pws.push_back(powers[i]);
        }
        cl.spread = spread_matrix(pts, pws, cl.centroid);
    }
    out.assignment = std::move(assignment);
    return out;
}

}  // namespace detail

/// KPowerMeans for one snapshot. Runs Lloyd iteration from the seed set to a
/// fixed point (assignment stable and centroids equal to the weighted means
/// of their members). If any resulting cluster holds less than
/// min_cluster_power_frac of the clustered power and more than one cluster
/// remains, the seed with the lowest assigned power is removed and the
/// clustering restarts from the reduced seed set, so the algorithm may end
/// with a single cluster.
inline Clustering cluster_snapshot(std::span<const Vec3> points,
                                   std::span<const double> powers,
                                   const SeedSet& seeds,
                                   const AxisRanges& ranges,
                                   const PipelineConfig& cfg) {
    if (seeds.size() == 0)
        throw std::invalid_argument("cluster_snapshot: empty seed set");
    if (points.empty() || points.size() != powers.size())
        throw std::invalid_argument("cluster_snapshot: empty or mismatched input");

    // Seed indices still in play; restarts remove one at a time.
    std::vector<std::size_t> alive(seeds.size());
    std::iota(alive.begin(), alive.end(), std::size_t{0});

    for (;;) {
        std::vector<Vec3> centroids;
        std::vector<std::size_t> origin;  // origin[c] = seed index of cluster c
        centroids.reserve(alive.size());
        origin.reserve(alive.size());
        for (std::size_t id : alive) {
            centroids.push_back(seeds.centroids[id]);
            origin.push_back(id);
        }

        std::vector<std::size_t> labels = assign(points, centroids, ranges);
        bool converged = false;
        for (int iter = 0; iter < cfg.max_lloyd_iters; ++iter) {
            const std::size_t k = centroids.size();
            std::vector<Vec3> acc(k, Vec3::Zero());
            std::vector<double> total(k, 0.0);
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc[labels[i]] += powers[i] * points[i];
                total[labels[i]] += powers[i];
            }
            std::vector<Vec3> next_centroids;
            std::vector<std::size_t> next_origin;
            next_centroids.reserve(k);
            next_origin.reserve(k);
            for (std::size_t c = 0; c < k; ++c) {
                if (total[c] > 0.0) {
                    next_centroids.push_back(acc[c] / total[c]);
                    next_origin.push_back(origin[c]);
                }
            }
            std::vector<std::size_t> next_labels =
                assign(points, next_centroids, ranges);
            const bool stable = next_centroids.size() == centroids.size() &&
                                next_labels == labels;
            centroids = std::move(next_centroids);
            origin = std::move(next_origin);
            labels = std::move(next_labels);
            if (stable) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw IterationLimitExceeded(
                "cluster_snapshot: no fixed point within " +
                    std::to_string(cfg.max_lloyd_iters) + " Lloyd iterations",
                detail::build_clustering(points, powers, centroids,
                                         std::move(labels), ranges));
        }

        const std::size_t k = centroids.size();
        std::vector<double> cluster_power(k, 0.0);
        for (std::size_t i = 0; i < points.size(); ++i)
            cluster_power[labels[i]] += powers[i];
        const double clustered =
            std::accumulate(cluster_power.begin(), cluster_power.end(), 0.0);

        bool restart = false;
        if (k > 1) {
            for (double p : cluster_power) {
                if (p < cfg.min_cluster_power_frac * clustered) {
                    restart = true;
                    break;
                }
            }
        }
        if (restart) {
            // Assigned power per alive seed in the failed round; seeds whose
            // cluster emptied during Lloyd count as zero.
            std::vector<double> seed_power(alive.size(), 0.0);
            for (std::size_t c = 0; c < k; ++c) {
                const auto pos =
                    std::find(alive.begin(), alive.end(), origin[c]);
                seed_power[static_cast<std::size_t>(pos - alive.begin())] =
                    cluster_power[c];
            }
            std::size_t weakest = 0;
            for (std::size_t s = 1; s < alive.size(); ++s)
                if (seed_power[s] < seed_power[weakest]) weakest = s;
            alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(weakest));
            continue;
        }

        return detail::build_clustering(points, powers, centroids,
                                        std::move(labels), ranges);
    }
}

}  // namespace mpctrack
