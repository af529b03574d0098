#include "varseg/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace varseg {

TimeSeries::TimeSeries(Matrix values) : values_(std::move(values))
{
    if (values_.rows() < 2 || values_.cols() < 1) {
        throw ConfigError("time series needs T >= 2 rows and p >= 1 columns, got " +
                          std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
    }
    if (!values_.allFinite()) throw ConfigError("time series contains non-finite entries");
}

TransitionSet::TransitionSet(std::vector<Matrix> lag_matrices) : lags(std::move(lag_matrices))
{
    if (lags.empty()) throw ConfigError("transition set needs at least one lag");
    const auto p = lags.front().rows();
    for (const auto& m : lags) {
        if (m.rows() != p || m.cols() != p) throw ConfigError("lag matrices must all be p x p");
    }
}

Matrix TransitionSet::stacked() const
{
    const int p = dim();
    Matrix out(p, p * lag_count());
    for (int l = 0; l < lag_count(); ++l) out.middleCols(l * p, p) = lags[l];
    return out;
}

TransitionSet TransitionSet::from_stacked(const Matrix& stacked, int q)
{
    if (q < 1 || stacked.cols() != stacked.rows() * q) {
        throw ConfigError("stacked transition matrix must be p x pq");
    }
    const auto p = stacked.rows();
    std::vector<Matrix> lags;
    for (int l = 0; l < q; ++l) lags.emplace_back(stacked.middleCols(l * p, p));
    return TransitionSet(std::move(lags));
}

TransitionSet TransitionSet::scaled(double factor) const
{
    TransitionSet out = *this;
    for (auto& m : out.lags) m *= factor;
    return out;
}

void PiecewiseVarModel::validate(int T) const
{
    if (segments.size() != break_points.size() + 1) {
        throw ConfigError("segment count must equal break point count + 1");
    }
    if (noise_scales.size() != segments.size()) throw ConfigError("one noise scale per segment");
    int prev = 1;
    for (int b : break_points) {
        if (b <= prev || b > T) throw ConfigError("break points must be strictly increasing in (1, T]");
        prev = b;
    }
    for (double s : noise_scales) {
        if (!(s > 0.0)) throw ConfigError("noise scales must be positive");
    }
}

int PiecewiseVarModel::segment_of(int t) const
{
    return static_cast<int>(std::upper_bound(break_points.begin(), break_points.end(), t) -
                            break_points.begin());
}

int BlockPartition::block_of(int t) const
{
    auto it = std::upper_bound(endpoints.begin(), endpoints.end(), t);
    int b = static_cast<int>(it - endpoints.begin()) - 1;
    return std::clamp(b, 0, block_count() - 1);
}

void PenaltySpec::validate() const
{
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("penalty weights must be non-negative");
    if (has_lowrank() && !mu) throw ConfigError("low-rank penalties need mu");
    if (!has_lowrank() && mu) throw ConfigError("mu is only used by low-rank penalties");
    if (mu && *mu < 0.0) throw ConfigError("mu must be non-negative");
    if (kind == PenaltyKind::group_sparse && !grouping) {
        throw ConfigError("group-sparse penalty needs a grouping");
    }
}

void DetectionResult::validate(int T) const
{
    if (sparse_mats.size() != change_points.size() + 1) {
        throw ConfigError("need one segment estimate per segment");
    }
    if (lowrank_mats && lowrank_mats->size() != sparse_mats.size()) {
        throw ConfigError("low-rank estimates must match segment count");
    }
    int prev = lag;
    for (int c : change_points) {
        if (c <= prev || c >= T) throw ConfigError("change points must be increasing inside (q, T)");
        prev = c;
    }
}

LaggedDesign lagged_window(const TimeSeries& data, int q, int t_begin, int t_end)
{
    const int T = data.length();
    if (q < 1) throw ConfigError("lag must be positive");
    if (t_begin <= q || t_end > T + 1 || t_end < t_begin) {
        throw ConfigError("lagged window [" + std::to_string(t_begin) + ", " +
                          std::to_string(t_end) + ") out of range for q=" + std::to_string(q));
    }
    const int p = data.dim();
    const int rows = t_end - t_begin;
    LaggedDesign out{Matrix(rows, p * q), Matrix(rows, p)};
    const Matrix& y = data.values();
    for (int r = 0; r < rows; ++r) {
        const int t = t_begin + r;  // response time, 1-based
        out.response.row(r) = y.row(t - 1);
        for (int l = 1; l <= q; ++l) out.design.block(r, (l - 1) * p, 1, p) = y.row(t - 1 - l);
    }
    return out;
}

LaggedDesign stack_lag_rows(const TimeSeries& data, int q)
{
    if (q < 1 || q >= data.length()) {
        throw ConfigError("invalid lag " + std::to_string(q) + " for T=" + std::to_string(data.length()));
    }
    return lagged_window(data, q, q + 1, data.length() + 1);
}

Matrix companion_matrix(const TransitionSet& ts)
{
    const int p = ts.dim();
    const int q = ts.lag_count();
    Matrix c = Matrix::Zero(p * q, p * q);
    c.topRows(p) = ts.stacked();
    if (q > 1) c.bottomLeftCorner(p * (q - 1), p * (q - 1)).setIdentity();
    return c;
}

double companion_spectral_radius(const TransitionSet& ts)
{
    if (ts.lag_count() == 0) return 0.0;
    const Matrix c = companion_matrix(ts);
    if (c.isZero(0.0)) return 0.0;
    Eigen::EigenSolver<Matrix> solver(c, false);
    if (solver.info() == Eigen::Success) return solver.eigenvalues().cwiseAbs().maxCoeff();
    // The real Schur iteration can stall on repeated eigenvalues; the complex
    // QR uses different shifts.
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> complex(c.cast<std::complex<double>>(), false);
    if (complex.info() != Eigen::Success) throw NumericError("companion eigendecomposition failed");
    return complex.eigenvalues().cwiseAbs().maxCoeff();
}

BlockPartition make_blocks(int T, int q, std::optional<int> block_size)
{
    const int n = T - q + 1;
    if (q < 1 || n < 4) throw ConfigError("series too short for blocking");
    int b = 0;
    if (block_size) {
        b = *block_size;
        if (b < 2 || b > n / 2) {
            throw ConfigError("block size " + std::to_string(b) + " outside [2, " +
                              std::to_string(n / 2) + "]");
        }
    } else {
        b = std::max(2, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)))));
    }
    const int k = (n + b - 1) / b;
    BlockPartition out;
    out.block_size = b;
    out.endpoints.reserve(k + 1);
    for (int i = 0; i < k; ++i) out.endpoints.push_back(q + i * b);
    out.endpoints.push_back(T + 1);
    return out;
}

BlockPartition blocks_from_endpoints(int T, int q, std::vector<int> endpoints)
{
    if (endpoints.size() < 3 || endpoints.front() != q || endpoints.back() != T + 1) {
        throw ConfigError("block end points must start at q, end at T+1 and give >= 2 blocks");
    }
    int widest = 0;
    for (std::size_t i = 1; i < endpoints.size(); ++i) {
        const int w = endpoints[i] - endpoints[i - 1];
        if (w < 2) throw ConfigError("block end points must increase by at least 2");
        widest = std::max(widest, w);
    }
    BlockPartition out;
    out.endpoints = std::move(endpoints);
    out.block_size = widest;
    return out;
}

}  // namespace varseg
