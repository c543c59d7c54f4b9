#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mpctrack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/// One multipath component: interaction coordinates on both link ends plus
/// linear power (|complex gain|^2, phase dropped at ingestion).
struct Mpc {
    int path_id = 0;
    Vec3 ms_pos = Vec3::Zero();
    Vec3 bs_pos = Vec3::Zero();
    double power = 0.0;
};

/// All MPCs observed at one MS position along the route.
struct Snapshot {
    int index = 0;
    std::vector<Mpc> mpcs;
};

/// Per-snapshot cluster observation. `members` holds indices into the
/// point/power sequence the clustering ran on.
struct ClusterParams {
    int cluster_id = 0;
    std::vector<std::size_t> members;
    double power = 0.0;
    std::size_t size = 0;
    Vec3 centroid = Vec3::Zero();
    Mat3 spread = Mat3::Zero();
};

/// Kalman state of one tracked cluster. theta = [x, vx, y, vy, z, vz] with
/// positions in metres and velocities in metres per snapshot.
struct TrackState {
    int cluster_id = 0;
    Vec6 theta = Vec6::Zero();
    Mat6 cov = Mat6::Zero();
    int born_at = 0;
    int last_seen = 0;
    int lifetime = 0;
};

enum class Side { MS, BS };

enum class McdNormalization { PerSnapshot, Global };

struct PipelineConfig {
    int k_max = 10;
    double min_centroid_power_frac = 1e-4;  // 0.01% of snapshot power
    double min_cluster_power_frac = 0.01;   // 1% of clustered power
    double power_keep_frac = 0.99;          // clustering sees >= 99% of power
    double q_scale = 1e-4;                  // state-noise variance, m^2
    double r_scale = 0.01;                  // observation-noise variance, m^2
    Side side = Side::MS;
    McdNormalization mcd_normalization = McdNormalization::PerSnapshot;
    double spread_regularization_eps = 1e-6;  // m^2, added to spread diagonals
    int max_lloyd_iters = 100;
};

class ValidationError : public std::runtime_error {
public:
    enum class Kind {
        EmptySnapshot,
        NonPositivePower,
        NonFiniteCoordinate,
        DuplicatePathId,
    };

    ValidationError(Kind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline void validate_config(const PipelineConfig& cfg) {
    if (cfg.k_max < 1)
        throw std::invalid_argument("k_max must be >= 1");
    if (!(cfg.min_centroid_power_frac > 0.0 &&
          cfg.min_centroid_power_frac < cfg.min_cluster_power_frac &&
          cfg.min_cluster_power_frac < cfg.power_keep_frac &&
          cfg.power_keep_frac <= 1.0))
        throw std::invalid_argument(
            "power fractions must satisfy 0 < min_centroid < min_cluster < keep <= 1");
    if (!(cfg.q_scale > 0.0) || !(cfg.r_scale > 0.0))
        throw std::invalid_argument("q_scale and r_scale must be positive");
    if (!(cfg.spread_regularization_eps > 0.0))
        throw std::invalid_argument("spread_regularization_eps must be positive");
    if (cfg.max_lloyd_iters < 1)
        throw std::invalid_argument("max_lloyd_iters must be >= 1");
}

/// Checks every MPC invariant; returns the snapshot unchanged on success.
inline const Snapshot& validate_snapshot(const Snapshot& s) {
    if (s.mpcs.empty())
        throw ValidationError(ValidationError::Kind::EmptySnapshot,
                              "snapshot " + std::to_string(s.index) + " has no MPCs");
    std::unordered_set<int> seen;
    seen.reserve(s.mpcs.size());
    for (const Mpc& m : s.mpcs) {
        if (!(m.power > 0.0))
            throw ValidationError(
                ValidationError::Kind::NonPositivePower,
                "snapshot " + std::to_string(s.index) + " path " +
                    std::to_string(m.path_id) + ": power must be > 0");
        for (int a = 0; a < 3; ++a) {
            if (!std::isfinite(m.ms_pos[a]) || !std::isfinite(m.bs_pos[a]))
                throw ValidationError(
                    ValidationError::Kind::NonFiniteCoordinate,
                    "snapshot " + std::to_string(s.index) + " path " +
                        std::to_string(m.path_id) + ": non-finite coordinate");
        }
        if (!seen.insert(m.path_id).second)
            throw ValidationError(
                ValidationError::Kind::DuplicatePathId,
                "snapshot " + std::to_string(s.index) + ": duplicate path_id " +
                    std::to_string(m.path_id));
    }
    return s;
}

/// Projects one side's interaction coordinates, order preserved.
inline std::vector<Vec3> select_side(const Snapshot& s, Side side) {
    std::vector<Vec3> out;
    out.reserve(s.mpcs.size());
    for (const Mpc& m : s.mpcs)
        out.push_back(side == Side::MS ? m.ms_pos : m.bs_pos);
    return out;
}

inline std::vector<double> powers_of(const Snapshot& s) {
    std::vector<double> out;
    out.reserve(s.mpcs.size());
    for (const Mpc& m : s.mpcs) out.push_back(m.power);
    return out;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double p) { return 10.0 * std::log10(p); }

}  // namespace mpctrack
