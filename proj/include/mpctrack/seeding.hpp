#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpctrack/geometry.hpp"
#include "mpctrack/types.hpp"

namespace mpctrack {

enum class SeedProvenance { Predicted, StrongestPath, MaxMin };

/// Initial-guess centroid set for one snapshot.
struct SeedSet {
    std::vector<Vec3> centroids;
    std::vector<SeedProvenance> provenance;

    std::size_t size() const { return centroids.size(); }
};

/// Kalman-predicted centroid offered as a seed, ranked by the power of the
/// cluster last observed on that track.
struct PredictedCentroid {
    Vec3 position = Vec3::Zero();
    double track_power = 0.0;
};

namespace detail {

// Nearest-centroid index by unweighted MCD, ties to the lowest index.
inline std::size_t nearest_centroid(const Vec3& p,
                                    std::span<const Vec3> centroids,
                                    const AxisRanges& ranges) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = mcd(p, centroids[c], ranges);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

// Max-min growth loop: repeatedly add the path farthest (in weighted MCD)
// from every current centroid, until k_max is reached or the newest centroid
// captures no more than min_centroid_power_frac of the snapshot power, in
// which case it is discarded and the loop stops.
inline void extend_max_min(SeedSet& seeds, std::span<const Vec3> points,
                           std::span<const double> powers,
                           const AxisRanges& ranges,
                           const PipelineConfig& cfg) {
    const double total = std::accumulate(powers.begin(), powers.end(), 0.0);
    const double threshold = cfg.min_centroid_power_frac * total;

    while (seeds.size() < static_cast<std::size_t>(cfg.k_max)) {
        const Eigen::MatrixXd dist =
            weighted_distance_matrix(points, powers, seeds.centroids, ranges);

        std::size_t l_sel = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < points.size(); ++l) {
            const double min_c =
                dist.row(static_cast<Eigen::Index>(l)).minCoeff();
            if (min_c > best) {
                best = min_c;
                l_sel = l;
            }
        }

        seeds.centroids.push_back(points[l_sel]);
        seeds.provenance.push_back(SeedProvenance::MaxMin);

        const std::size_t newest = seeds.size() - 1;
        double newest_power = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (nearest_centroid(points[i], seeds.centroids, ranges) == newest)
                newest_power += powers[i];
        }
        if (newest_power <= threshold) {
            seeds.centroids.pop_back();
            seeds.provenance.pop_back();
            break;
        }
    }
}

}  // namespace detail

/// Seeds from scratch: the strongest path first, then max-min growth.
inline SeedSet seed_from_scratch(std::span<const Vec3> points,
                                 std::span<const double> powers,
                                 const AxisRanges& ranges,
                                 const PipelineConfig& cfg) {
    if (points.empty() || points.size() != powers.size())
        throw std::invalid_argument("seed_from_scratch: empty or mismatched input");

    std::size_t strongest = 0;
    for (std::size_t i = 1; i < powers.size(); ++i)
        if (powers[i] > powers[strongest]) strongest = i;

    SeedSet seeds;
    seeds.centroids.push_back(points[strongest]);
    seeds.provenance.push_back(SeedProvenance::StrongestPath);
    detail::extend_max_min(seeds, points, powers, ranges, cfg);
    return seeds;
}

/// Seeds from Kalman predictions, clamped to k_max by keeping the tracks with
/// the highest last-observed cluster power, then extended by the same max-min
/// growth used from scratch.
inline SeedSet seed_from_prediction(std::span<const PredictedCentroid> predicted,
                                    std::span<const Vec3> points,
                                    std::span<const double> powers,
                                    const AxisRanges& ranges,
                                    const PipelineConfig& cfg) {
    if (predicted.empty())
        throw std::invalid_argument("seed_from_prediction: no predictions");
    if (points.empty() || points.size() != powers.size())
        throw std::invalid_argument(
            "seed_from_prediction: empty or mismatched input");

    std::vector<std::size_t> order(predicted.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (predicted.size() > static_cast<std::size_t>(cfg.k_max)) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             return predicted[a].track_power >
                                    predicted[b].track_power;
                         });
        order.resize(static_cast<std::size_t>(cfg.k_max));
        std::sort(order.begin(), order.end());
    }

    SeedSet seeds;
    for (std::size_t i : order) {
        seeds.centroids.push_back(predicted[i].position);
        seeds.provenance.push_back(SeedProvenance::Predicted);
    }
    detail::extend_max_min(seeds, points, powers, ranges, cfg);
    return seeds;
}

}  // namespace mpctrack
