#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpctrack/geometry.hpp"
#include "mpctrack/kpowermeans.hpp"
#include "mpctrack/seeding.hpp"
#include "mpctrack/tracking.hpp"
#include "mpctrack/types.hpp"

namespace mpctrack {

class NonMonotonicSnapshots : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filtered state of one active track at one snapshot, as recorded for
/// trajectory output.
struct TrackSample {
    int track_id = 0;
    Vec6 theta = Vec6::Zero();
};

struct SnapshotResult {
    int snapshot_index = 0;
    std::vector<std::size_t> retained;  // indices into the snapshot's MPC list
    Clustering clustering;              // cluster_id fields hold track ids
    std::vector<TrackSample> tracks;
};

struct RunRecord {
    std::vector<SnapshotResult> snapshots;
    TrackRegistry registry;
    PipelineConfig config;
};

/// Runs the full per-snapshot chain: side selection, noise pruning, MCD
/// normalization, seeding (from track predictions once tracks exist),
/// KPowerMeans clustering, association and Kalman tracking. Deterministic
/// given inputs and config.
inline RunRecord run_pipeline(std::span<const Snapshot> snapshots,
                              const PipelineConfig& cfg) {
    validate_config(cfg);
    if (snapshots.empty())
        throw std::invalid_argument("run_pipeline: no snapshots");
    for (std::size_t i = 1; i < snapshots.size(); ++i)
        if (snapshots[i].index <= snapshots[i - 1].index)
            throw NonMonotonicSnapshots(
                "run_pipeline: snapshot indices must be strictly increasing (" +
                std::to_string(snapshots[i - 1].index) + " then " +
                std::to_string(snapshots[i].index) + ")");

    AxisRanges global_ranges;
    if (cfg.mcd_normalization == McdNormalization::Global) {
        std::vector<Vec3> all_points;
        for (const Snapshot& s : snapshots) {
            const std::vector<Vec3> pts = select_side(validate_snapshot(s), cfg.side);
            all_points.insert(all_points.end(), pts.begin(), pts.end());
        }
        global_ranges = axis_ranges(all_points);
    }

    const KalmanModel model = make_kalman_model(cfg.q_scale, cfg.r_scale);

    RunRecord run;
    run.config = cfg;
    run.snapshots.reserve(snapshots.size());

    std::vector<PredictedCentroid> predictions;
    for (const Snapshot& snapshot : snapshots) {
        try {
            validate_snapshot(snapshot);
            const std::vector<Vec3> all_points = select_side(snapshot, cfg.side);
            const std::vector<double> all_powers = powers_of(snapshot);

            SnapshotResult result;
            result.snapshot_index = snapshot.index;
            result.retained = prune_noise(all_powers, cfg);

            std::vector<Vec3> points;
            std::vector<double> powers;
            points.reserve(result.retained.size());
            powers.reserve(result.retained.size());
            for (std::size_t i : result.retained) {
                points.push_back(all_points[i]);
                powers.push_back(all_powers[i]);
            }

            const AxisRanges ranges =
                cfg.mcd_normalization == McdNormalization::Global
                    ? global_ranges
                    : axis_ranges(points);

            const SeedSet seeds =
                predictions.empty()
                    ? seed_from_scratch(points, powers, ranges, cfg)
                    : seed_from_prediction(predictions, points, powers, ranges,
                                           cfg);

            result.clustering =
                cluster_snapshot(points, powers, seeds, ranges, cfg);

            predictions =
                step_registry(run.registry, result.clustering, model,
                              snapshot.index, cfg.spread_regularization_eps);

            result.tracks.reserve(run.registry.active.size());
            for (const TrackEntry& e : run.registry.active)
                result.tracks.push_back({e.state.cluster_id, e.state.theta});

            run.snapshots.push_back(std::move(result));
        } catch (const ValidationError&) {
            throw;  // already carries the snapshot index
        } catch (const IterationLimitExceeded&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error("snapshot " +
                                     std::to_string(snapshot.index) + ": " +
                                     e.what());
        }
    }
    return run;
}

}  // namespace mpctrack
