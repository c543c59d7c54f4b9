#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpctrack/pipeline.hpp"
#include "mpctrack/types.hpp"

namespace mpctrack {

/// One moving cluster in a synthetic scenario. The centroid travels at
/// constant velocity from birth to death; members scatter around it with
/// independent per-axis Gaussian spread and lognormal power.
struct ClusterSpec {
    int birth = 0;
    int death = 0;
    Vec3 initial_centroid = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 spread_std = Vec3::Zero();  // metres, per axis
    int n_mpcs = 1;
    double power_db_mean = 0.0;
    double power_db_std = 0.0;
};

struct ScenarioSpec {
    int n_snapshots = 1;
    std::vector<ClusterSpec> clusters;
    int noise_mpcs_per_snapshot = 0;
    std::uint64_t rng_seed = 0;
};

/// Snapshot plus per-MPC ground-truth labels (index into the scenario's
/// cluster list, or kNoise).
struct LabeledSnapshot {
    static constexpr int kNoise = -1;

    Snapshot snapshot;
    std::vector<int> truth;
};

class TooManyClustersForExactMatching : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void validate_scenario(const ScenarioSpec& spec) {
    if (spec.n_snapshots < 1)
        throw std::invalid_argument("scenario: n_snapshots must be >= 1");
    if (spec.clusters.empty())
        throw std::invalid_argument("scenario: needs at least one cluster");
    if (spec.noise_mpcs_per_snapshot < 0)
        throw std::invalid_argument("scenario: negative noise count");
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
        const ClusterSpec& cl = spec.clusters[c];
        if (cl.birth < 0 || cl.birth > cl.death || cl.death >= spec.n_snapshots)
            throw std::invalid_argument("scenario: cluster " + std::to_string(c) +
                                        " has invalid birth/death window");
        if (cl.n_mpcs < 1)
            throw std::invalid_argument("scenario: cluster " + std::to_string(c) +
                                        " needs n_mpcs >= 1");
        if ((cl.spread_std.array() < 0.0).any())
            throw std::invalid_argument("scenario: cluster " + std::to_string(c) +
                                        " has negative spread_std");
    }
    for (int n = 0; n < spec.n_snapshots; ++n) {
        bool live = spec.noise_mpcs_per_snapshot > 0;
        for (const ClusterSpec& cl : spec.clusters)
            live = live || (cl.birth <= n && n <= cl.death);
        if (!live)
            throw std::invalid_argument("scenario: snapshot " + std::to_string(n) +
                                        " would be empty");
    }
}

// Axis-aligned box covering every cluster trajectory, padded so noise MPCs
// plausibly surround the action.
inline std::pair<Vec3, Vec3> scene_box(const ScenarioSpec& spec) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    double max_spread = 0.0;
    for (const ClusterSpec& cl : spec.clusters) {
        const Vec3 start = cl.initial_centroid;
        const Vec3 end =
            cl.initial_centroid + cl.velocity * double(cl.death - cl.birth);
        lo = lo.cwiseMin(start.cwiseMin(end));
        hi = hi.cwiseMax(start.cwiseMax(end));
        max_spread = std::max(max_spread, cl.spread_std.maxCoeff());
    }
    const Vec3 pad = Vec3::Constant(3.0 * max_spread + 1.0);
    return {lo - pad, hi + pad};
}

}  // namespace detail

/// Generates labeled snapshots 0..n_snapshots-1, deterministic in rng_seed.
inline std::vector<LabeledSnapshot> generate(const ScenarioSpec& spec) {
    detail::validate_scenario(spec);
    const auto [box_lo, box_hi] = detail::scene_box(spec);

    double noise_db = 0.0;
    for (const ClusterSpec& cl : spec.clusters) noise_db += cl.power_db_mean;
    noise_db = noise_db / double(spec.clusters.size()) - 20.0;
    const double noise_power = db_to_linear(noise_db);

    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit_uniform(0.0, 1.0);

    std::vector<LabeledSnapshot> out;
    out.reserve(static_cast<std::size_t>(spec.n_snapshots));
    for (int n = 0; n < spec.n_snapshots; ++n) {
        LabeledSnapshot labeled;
        labeled.snapshot.index = n;
        int next_path = 0;
        for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
            const ClusterSpec& cl = spec.clusters[c];
            if (n < cl.birth || n > cl.death) continue;
            const Vec3 centroid =
                cl.initial_centroid + cl.velocity * double(n - cl.birth);
            for (int i = 0; i < cl.n_mpcs; ++i) {
                Mpc m;
                m.path_id = next_path++;
                for (int axis = 0; axis < 3; ++axis)
                    m.ms_pos[axis] = centroid[axis] +
                                     cl.spread_std[axis] * unit_normal(rng);
                m.bs_pos = m.ms_pos;
                m.power = db_to_linear(cl.power_db_mean +
                                       cl.power_db_std * unit_normal(rng));
                labeled.snapshot.mpcs.push_back(m);
                labeled.truth.push_back(static_cast<int>(c));
            }
        }
        for (int i = 0; i < spec.noise_mpcs_per_snapshot; ++i) {
            Mpc m;
            m.path_id = next_path++;
            for (int axis = 0; axis < 3; ++axis)
                m.ms_pos[axis] = box_lo[axis] + (box_hi[axis] - box_lo[axis]) *
                                                    unit_uniform(rng);
            m.bs_pos = m.ms_pos;
            m.power = noise_power;
            labeled.snapshot.mpcs.push_back(m);
            labeled.truth.push_back(LabeledSnapshot::kNoise);
        }
        out.push_back(std::move(labeled));
    }
    return out;
}

struct ScoreReport {
    std::vector<double> per_snapshot_accuracy;
    double accuracy = 0.0;            // mean of per-snapshot accuracies
    double id_continuity = 0.0;       // found-ID persistence over true persistences
    double mean_lifetime_error = 0.0; // snapshots, over matched tracks
};

namespace detail {

// Best injective matching (smaller side exhaustively permuted into the
// larger) maximizing total shared power. rows <= 8.
inline double best_matching(const std::vector<std::vector<double>>& shared,
                            std::vector<int>& row_to_col) {
    const std::size_t rows = shared.size();
    const std::size_t cols = rows == 0 ? 0 : shared[0].size();
    row_to_col.assign(rows, -1);
    if (rows == 0 || cols == 0) return 0.0;

    std::vector<int> current(rows, -1);
    std::vector<bool> used(cols, false);
    double best = -1.0;

    auto recurse = [&](auto&& self, std::size_t r, double acc) -> void {
        if (r == rows) {
            if (acc > best) {
                best = acc;
                row_to_col = current;
            }
            return;
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (used[c]) continue;
            used[c] = true;
            current[r] = static_cast<int>(c);
            self(self, r + 1, acc + shared[r][c]);
            used[c] = false;
        }
        current[r] = -1;
    };
    recurse(recurse, 0, 0.0);
    return best;
}

}  // namespace detail

/// Compares a tracked clustering run against ground truth. Per snapshot, the
/// found clusters are matched one-to-one with the true clusters to maximize
/// shared power (exhaustive, refused above 8 on the smaller side). Accuracy
/// is the matched fraction of labeled power; continuity asks whether the
/// found track id persisted wherever the true cluster did; lifetime error
/// compares each true cluster's span with its dominant track's lifetime.
inline ScoreReport score(const RunRecord& run,
                         std::span<const LabeledSnapshot> truth) {
    if (run.snapshots.size() != truth.size())
        throw std::invalid_argument("score: snapshot count mismatch");

    const std::size_t n_snapshots = truth.size();
    // tid_at[n][true_id] = found track id matched to that true cluster
    std::vector<std::map<int, int>> tid_at(n_snapshots);

    ScoreReport report;
    report.per_snapshot_accuracy.reserve(n_snapshots);

    for (std::size_t n = 0; n < n_snapshots; ++n) {
        const SnapshotResult& found = run.snapshots[n];
        const LabeledSnapshot& ts = truth[n];
        if (found.snapshot_index != ts.snapshot.index)
            throw std::invalid_argument("score: snapshot index mismatch");

        std::set<int> alive;
        double labeled_power = 0.0;
        for (std::size_t i = 0; i < ts.truth.size(); ++i) {
            if (ts.truth[i] >= 0) {
                alive.insert(ts.truth[i]);
                labeled_power += ts.snapshot.mpcs[i].power;
            }
        }
        std::vector<int> true_ids(alive.begin(), alive.end());

        const std::size_t k_found = found.clustering.clusters.size();
        const std::size_t k_true = true_ids.size();
        if (std::min(k_found, k_true) > 8)
            throw TooManyClustersForExactMatching(
                "score: snapshot " + std::to_string(ts.snapshot.index) +
                " has min(k_found, k_true) > 8");
        if (k_true == 0) {
            report.per_snapshot_accuracy.push_back(1.0);
            continue;
        }

        // shared[f][t] = power of found cluster f's members labeled true_ids[t]
        std::vector<std::vector<double>> shared(
            k_found, std::vector<double>(k_true, 0.0));
        for (std::size_t f = 0; f < k_found; ++f) {
            for (std::size_t m : found.clustering.clusters[f].members) {
                const std::size_t orig = found.retained[m];
                const int label = ts.truth[orig];
                if (label < 0) continue;
                const auto pos =
                    std::lower_bound(true_ids.begin(), true_ids.end(), label);
                shared[f][static_cast<std::size_t>(pos - true_ids.begin())] +=
                    ts.snapshot.mpcs[orig].power;
            }
        }

        // Orient the exhaustive search over the smaller side.
        std::vector<int> row_to_col;
        double matched_power = 0.0;
        if (k_found <= k_true) {
            matched_power = detail::best_matching(shared, row_to_col);
            for (std::size_t f = 0; f < k_found; ++f)
                if (row_to_col[f] >= 0)
                    tid_at[n][true_ids[static_cast<std::size_t>(row_to_col[f])]] =
                        found.clustering.clusters[f].cluster_id;
        } else {
            std::vector<std::vector<double>> transposed(
                k_true, std::vector<double>(k_found, 0.0));
            for (std::size_t f = 0; f < k_found; ++f)
                for (std::size_t t = 0; t < k_true; ++t)
                    transposed[t][f] = shared[f][t];
            matched_power = detail::best_matching(transposed, row_to_col);
            for (std::size_t t = 0; t < k_true; ++t)
                if (row_to_col[t] >= 0)
                    tid_at[n][true_ids[t]] =
                        found.clustering
                            .clusters[static_cast<std::size_t>(row_to_col[t])]
                            .cluster_id;
        }
        report.per_snapshot_accuracy.push_back(
            labeled_power > 0.0 ? matched_power / labeled_power : 1.0);
    }

    double acc_sum = 0.0;
    for (double a : report.per_snapshot_accuracy) acc_sum += a;
    report.accuracy = report.per_snapshot_accuracy.empty()
                          ? 1.0
                          : acc_sum / double(report.per_snapshot_accuracy.size());

    // ID continuity over consecutive true-cluster persistences.
    std::size_t persist_events = 0;
    std::size_t persist_kept = 0;
    for (std::size_t n = 0; n + 1 < n_snapshots; ++n) {
        std::set<int> alive_now, alive_next;
        for (int l : truth[n].truth)
            if (l >= 0) alive_now.insert(l);
        for (int l : truth[n + 1].truth)
            if (l >= 0) alive_next.insert(l);
        for (int t : alive_now) {
            if (!alive_next.count(t)) continue;
            ++persist_events;
            const auto a = tid_at[n].find(t);
            const auto b = tid_at[n + 1].find(t);
            if (a != tid_at[n].end() && b != tid_at[n + 1].end() &&
                a->second == b->second)
                ++persist_kept;
        }
    }
    report.id_continuity =
        persist_events == 0 ? 1.0
                            : double(persist_kept) / double(persist_events);

    // Lifetime error: dominant matched track per true cluster.
    const std::vector<TrackState> all_tracks = run.registry.all_tracks();
    std::map<int, int> true_lifetime;  // true id -> snapshots alive
    for (const LabeledSnapshot& ts : truth) {
        std::set<int> alive;
        for (int l : ts.truth)
            if (l >= 0) alive.insert(l);
        for (int t : alive) ++true_lifetime[t];
    }
    double err_sum = 0.0;
    std::size_t err_count = 0;
    for (const auto& [true_id, life] : true_lifetime) {
        std::map<int, int> votes;
        for (std::size_t n = 0; n < n_snapshots; ++n) {
            const auto it = tid_at[n].find(true_id);
            if (it != tid_at[n].end()) ++votes[it->second];
        }
        if (votes.empty()) continue;
        int dominant = votes.begin()->first;
        for (const auto& [tid, count] : votes)
            if (count > votes[dominant]) dominant = tid;
        for (const TrackState& tr : all_tracks) {
            if (tr.cluster_id == dominant) {
                err_sum += std::abs(tr.lifetime - life);
                ++err_count;
                break;
            }
        }
    }
    report.mean_lifetime_error =
        err_count == 0 ? 0.0 : err_sum / double(err_count);
    return report;
}

}  // namespace mpctrack
