#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "mpctrack/types.hpp"

namespace mpctrack {

/// Per-axis normalization ranges for the component distance. Each entry is
/// the max pairwise absolute coordinate difference over the normalization set,
/// which equals (max - min) along that axis.
struct AxisRanges {
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;

    double operator[](int axis) const {
        return axis == 0 ? dx : (axis == 1 ? dy : dz);
    }
};

inline AxisRanges axis_ranges(std::span<const Vec3> points) {
    if (points.empty())
        throw std::invalid_argument("axis_ranges: empty input");
    Vec3 lo = points.front();
    Vec3 hi = points.front();
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return {hi.x() - lo.x(), hi.y() - lo.y(), hi.z() - lo.z()};
}

/// Range-normalized Euclidean distance between two coordinate vectors.
/// Axes with zero range contribute nothing (all points share that coordinate).
inline double mcd(const Vec3& a, const Vec3& b, const AxisRanges& ranges) {
    double sum = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const double range = ranges[axis];
        if (range > 0.0) {
            const double t = std::abs(a[axis] - b[axis]) / range;
            sum += t * t;
        }
    }
    return std::sqrt(sum);
}

/// Weighted path-to-centroid distance matrix. Row l is scaled by
/// w_l = log10(p_l / p_min), so the weakest path carries weight zero and the
/// entries are invariant to a global rescaling of all powers.
inline Eigen::MatrixXd weighted_distance_matrix(std::span<const Vec3> points,
                                                std::span<const double> powers,
                                                std::span<const Vec3> centroids,
                                                const AxisRanges& ranges) {
    if (points.size() != powers.size())
        throw std::invalid_argument(
            "weighted_distance_matrix: points/powers size mismatch");
    if (centroids.empty())
        throw std::invalid_argument("weighted_distance_matrix: no centroids");
    const double p_min = *std::min_element(powers.begin(), powers.end());
    Eigen::MatrixXd dist(points.size(), centroids.size());
    for (std::size_t l = 0; l < points.size(); ++l) {
        const double w = std::log10(powers[l] / p_min);
        for (std::size_t c = 0; c < centroids.size(); ++c)
            dist(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c)) =
                w * mcd(points[l], centroids[c], ranges);
    }
    return dist;
}

/// Power-weighted mean position.
inline Vec3 weighted_centroid(std::span<const Vec3> points,
                              std::span<const double> powers) {
    if (points.empty() || points.size() != powers.size())
        throw std::invalid_argument("weighted_centroid: empty or mismatched input");
    Vec3 acc = Vec3::Zero();
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        acc += powers[i] * points[i];
        total += powers[i];
    }
    return acc / total;
}

/// Power-weighted coordinate covariance about the given centroid.
inline Mat3 spread_matrix(std::span<const Vec3> points,
                          std::span<const double> powers, const Vec3& centroid) {
    if (points.empty() || points.size() != powers.size())
        throw std::invalid_argument("spread_matrix: empty or mismatched input");
    Mat3 acc = Mat3::Zero();
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 d = points[i] - centroid;
        acc += powers[i] * (d * d.transpose());
        total += powers[i];
    }
    Mat3 out = acc / total;
    return (out + out.transpose()) / 2.0;
}

/// Gaussian closeness of a candidate centroid to a cluster of shape
/// (centroid, spread). The spread is regularized with eps on the diagonal so
/// degenerate clusters (single MPC, collinear members) stay evaluable.
inline double closeness(const Vec3& candidate, const Vec3& centroid,
                        const Mat3& spread, double eps) {
    const Mat3 sigma = spread + eps * Mat3::Identity();
    const double det = sigma.determinant();
    const Vec3 d = candidate - centroid;
    const double quad = d.dot(sigma.inverse() * d);
    const double norm =
        1.0 / (std::pow(2.0 * std::numbers::pi, 1.5) * std::sqrt(det));
    return norm * std::exp(-0.5 * quad);
}

}  // namespace mpctrack
