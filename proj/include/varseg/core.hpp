#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace varseg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. Every public function reports failures through one of
// these; the CLI maps them to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (bad lag, block size, grid, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite iterates, failed decompositions.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed input files.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A segment became too short to estimate after trimming.
class SegmentError : public Error {
public:
    using Error::Error;
};

/// T x p observation matrix. Row r holds y_{r+1}; the public API uses
/// 1-based time indices throughout.
class TimeSeries {
public:
    TimeSeries() = default;
    explicit TimeSeries(Matrix values);

    int length() const { return static_cast<int>(values_.rows()); }
    int dim() const { return static_cast<int>(values_.cols()); }
    const Matrix& values() const { return values_; }

    /// Observation y_t for 1-based t.
    auto at(int t) const { return values_.row(t - 1); }

private:
    Matrix values_;
};

/// Ordered lag matrices Phi^(1..q) of one stationary segment.
struct TransitionSet {
    std::vector<Matrix> lags;

    TransitionSet() = default;
    explicit TransitionSet(std::vector<Matrix> lag_matrices);

    int lag_count() const { return static_cast<int>(lags.size()); }
    int dim() const { return lags.empty() ? 0 : static_cast<int>(lags.front().rows()); }

    /// (Phi^(1), ..., Phi^(q)) as one p x pq matrix.
    Matrix stacked() const;
    static TransitionSet from_stacked(const Matrix& stacked, int q);

    TransitionSet scaled(double factor) const;
};

/// Ground truth of a simulated piecewise VAR. Segment j covers
/// t_{j-1} <= t < t_j (left-closed, right-open) with t_0 = 1.
struct PiecewiseVarModel {
    std::vector<int> break_points;
    std::vector<TransitionSet> segments;
    std::vector<double> noise_scales;

    void validate(int T) const;
    int segment_of(int t) const;
};

/// Block end points q = r_0 < r_1 < ... < r_k = T + 1. Block b covers the
/// time indices [r_b, r_{b+1}).
struct BlockPartition {
    std::vector<int> endpoints;
    int block_size = 0;

    int block_count() const { return static_cast<int>(endpoints.size()) - 1; }
    int block_of(int t) const;
};

enum class GroupKind {
    columnwise_separate,
    columnwise_simultaneous,
    rowwise_separate,
    rowwise_simultaneous,
    hierarchical_lag,
    explicit_index,
};

enum class GroupOrientation { column, row };

/// Coefficient grouping for the group-sparse penalty. For explicit_index,
/// each group lists 0-based flat indices (lag-1)*p + column (or row,
/// depending on orientation).
struct Grouping {
    GroupKind kind = GroupKind::columnwise_separate;
    GroupOrientation orientation = GroupOrientation::column;
    std::vector<std::vector<int>> groups;
};

enum class PenaltyKind { sparse, group_sparse, fixed_lowrank_sparse, lowrank_sparse };

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::sparse;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::optional<double> mu;
    std::optional<Grouping> grouping;

    void validate() const;
    bool has_lowrank() const
    {
        return kind == PenaltyKind::fixed_lowrank_sparse || kind == PenaltyKind::lowrank_sparse;
    }
};

struct DetectionResult {
    std::vector<int> change_points;
    /// One p x pq matrix per segment (the sparse component when a low-rank
    /// part is estimated separately).
    std::vector<Matrix> sparse_mats;
    std::optional<std::vector<Matrix>> lowrank_mats;
    int lag = 1;
    double elapsed_seconds = 0.0;

    void validate(int T) const;
};

/// Design and response of the lagged regression y_{l+1} = B' Y_l.
struct LaggedDesign {
    Matrix design;    ///< rows Y_l' = (y_l', ..., y_{l-q+1}')
    Matrix response;  ///< rows y_{l+1}'
};

/// Rows for l = q, ..., T-1: a (T-q) x pq design with responses y_{l+1}.
LaggedDesign stack_lag_rows(const TimeSeries& data, int q);

/// Rows whose response time t lies in [t_begin, t_end) (1-based, t_begin > q).
LaggedDesign lagged_window(const TimeSeries& data, int q, int t_begin, int t_end);

/// Largest eigenvalue modulus of the pq x pq companion matrix.
double companion_spectral_radius(const TransitionSet& ts);

Matrix companion_matrix(const TransitionSet& ts);

BlockPartition make_blocks(int T, int q, std::optional<int> block_size = std::nullopt);

/// Validates user-supplied block end points (first = q, last = T + 1).
BlockPartition blocks_from_endpoints(int T, int q, std::vector<int> endpoints);

/// Max absolute entry.
inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace varseg
