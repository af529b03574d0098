#pragma once

#include "varseg/core.hpp"
#include "varseg/fista.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace varseg::tbss {

struct TbssConfig {
    PenaltyKind penalty = PenaltyKind::sparse;
    std::optional<Grouping> grouping;  ///< required for group_sparse
    /// Nuclear weight for fixed_lowrank_sparse, on the summed squared-error
    /// scale (the normalized objective uses mu / n).
    std::optional<double> mu;
    int q = 1;
    std::optional<int> block_size;
    std::optional<std::vector<int>> blocks;  ///< explicit block end points
    /// lambda1 weighs the fused differences, lambda2 the block coefficients.
    /// Empty grids are filled by the data-driven defaults.
    std::vector<double> lambda1_grid;
    std::vector<double> lambda2_grid;
    std::optional<std::vector<int>> an_grid;
    bool use_bic_for_omega = true;
    std::optional<double> omega;  ///< fixed screening penalty, skips selection
    std::optional<double> eta;    ///< fixed local-fit weight
    double tol = 1e-2;
    int max_iter = 50;
    int lowrank_rounds = 3;
    bool refit = false;
    std::optional<int> refit_radius;
    std::optional<double> refit_lambda;
    std::uint64_t cv_seed = 1;

    void validate() const;
};

/// Per-block sufficient statistics of the lagged regression. Block b holds
/// responses t in [r_b, r_{b+1}) with t > q, minus any excluded times.
struct BlockProblem {
    BlockPartition blocks;
    int p = 0;
    int q = 1;
    std::vector<Matrix> gram;   ///< X_b' X_b  (pq x pq)
    std::vector<Matrix> cross;  ///< X_b' Y_b  (pq x p)
    std::vector<double> yy;
    std::vector<int> counts;
    int n = 0;  ///< total responses

    int block_count() const { return blocks.block_count(); }
};

BlockProblem build_block_problem(const TimeSeries& data, int q, const BlockPartition& blocks,
                                 const std::set<int>& excluded = {});

struct BlockFit {
    std::vector<Matrix> phi;       ///< per block p x pq (Phi-hat, includes L for fLS)
    std::vector<Matrix> sparse;    ///< per block sparse part S_b (== phi without low rank)
    std::optional<Matrix> lowrank; ///< common L (p x pq) for fLS
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    int iterations = 0;
    /// Number of Step-1 optimization variables, k_n p^2 q.
    long long variable_count = 0;
};

struct FitSettings {
    PenaltyKind penalty = PenaltyKind::sparse;
    std::optional<Grouping> grouping;
    double mu = 0.0;  ///< summed-scale nuclear weight
    double tol = 1e-2;
    int max_iter = 50;
    int lowrank_rounds = 3;
};

/// Step 1: block fused fit for one (lambda1, lambda2) pair. `warm` may carry
/// a previous fit used as the starting point.
BlockFit block_fused_fit(const BlockProblem& problem, double lambda1, double lambda2,
                         const FitSettings& settings, const BlockFit* warm = nullptr);

struct CandidateSet {
    std::vector<int> points;         ///< time indices r_b
    std::vector<int> block_indices;  ///< b (0-based, >= 1)
    std::vector<Matrix> theta_hats;  ///< differences of the sparse parts
};

CandidateSet extract_candidates(const BlockFit& fit, const BlockPartition& blocks);

/// Smallest lambda1 for which the fit has no differences (a dual certificate
/// built from the pooled fit at the given lambda2).
double lambda1_max(const BlockProblem& problem, double lambda2, const FitSettings& settings);

struct CvResult {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::vector<double> lambda1_grid;  ///< last grid used (per lambda2 when automatic)
    std::vector<double> lambda2_grid;
    std::vector<std::vector<double>> mspe;  ///< [lambda2 index][lambda1 index]
    std::vector<int> validation_times;
};

std::vector<int> validation_times(const BlockPartition& blocks, std::uint64_t seed);

CvResult cross_validate_lambdas(const TimeSeries& data, const BlockPartition& blocks,
                                const TbssConfig& config, const FitSettings& settings);

/// Local model used by screening: penalty kind plus what it needs.
struct LocalModel {
    PenaltyKind penalty = PenaltyKind::sparse;
    std::optional<Grouping> grouping;
    std::optional<Matrix> lowrank;  ///< residualize responses with this L for fLS
    double tol = 1e-4;
    int max_iter = 500;
};

/// SSE of the penalized local fit on responses [t_begin, t_end).
double local_sse(const TimeSeries& data, int q, int t_begin, int t_end, double eta, const LocalModel& model);

/// Merged and split SSE around one candidate t: left [t-a, t), right
/// [t, t+a), merged [t-a, t+a).
struct LocalJump {
    double merged = 0.0;
    double left = 0.0;
    double right = 0.0;

    double split() const { return left + right; }
    /// v = L_n without the candidate minus L_n with it.
    double value() const { return merged - split(); }
};

/// Local fits around each candidate; entries are empty for candidates whose
/// windows leave the data.
std::vector<std::optional<LocalJump>> local_jumps(const TimeSeries& data, int q, const std::vector<int>& candidates,
                                                  int a, double eta, const LocalModel& model);

std::vector<std::optional<double>> jump_values(const std::vector<std::optional<LocalJump>>& jumps);

/// Keeps candidate k iff v_k > omega (exact minimizer of the LIC).
std::vector<int> local_screen(const std::vector<int>& candidates, const std::vector<std::optional<double>>& jumps,
                              double omega);

/// L_n(A) + |A| omega for a subset A (bit mask over candidates); candidates
/// without a jump cannot be selected.
double lic_value(const std::vector<std::optional<double>>& jumps, const std::vector<double>& split_sse,
                 const std::vector<double>& merged_sse, unsigned mask, double omega);

struct TwoMeans {
    double threshold = 0.0;  ///< midpoint between clusters
    double between_ratio = 0.0;
    double small_max = 0.0;
    double large_min = 0.0;
};

/// Exact 2-means on the line (optimal split of the sorted values).
TwoMeans two_means_1d(std::vector<double> values);

double default_eta(int a, int p);

/// Reference jump v^r: the larger jump at t = a + q + 1 and t = T - a.
std::optional<double> reference_jump(const TimeSeries& data, int q, int a, double eta, const LocalModel& model);

/// k-means rule: 2-means on (v_1..v_m, v^r, v^r); if the split explains more
/// than 67% of the spread and v^r is in the small cluster, omega separates
/// the clusters, else omega = max V.
double select_omega(const std::vector<std::optional<double>>& jumps, std::optional<double> reference);

/// Gaussian BIC of the piecewise model with breaks at `points`: per
/// segment penalized fit, pooled noise variance, nonzero count times log N.
double segmentation_bic(const TimeSeries& data, int q, const std::vector<int>& points, const LocalModel& model);

/// k-means combined with BIC: repeatedly move the large 2-means cluster of
/// the remaining jumps (with v^r twice) into the selection while v^r stays
/// in the small cluster and the segmentation BIC decreases. omega separates
/// the selected jumps from the rest; max V when nothing is selected.
double select_omega_bic(const TimeSeries& data, int q, const std::vector<int>& candidates,
                        const std::vector<std::optional<double>>& jumps, std::optional<double> reference,
                        const LocalModel& model);

std::vector<int> an_grid_default(const TimeSeries& data, int q, const BlockPartition& blocks,
                                 const std::vector<int>& candidates, std::vector<std::string>* warnings = nullptr);

/// Index of the first grid value whose screened count repeats for three
/// consecutive grid values, else the last index.
int stable_count_index(const std::vector<int>& counts);

/// Greedy minimal partition of sorted points into clusters of diameter <= d.
std::vector<std::vector<int>> cluster_points(const std::vector<int>& sorted_points, int d);

/// Step 3. `segment_phi(b)` gives the p x pq estimate of block b.
std::vector<int> exhaustive_search(const TimeSeries& data, int q, const std::vector<int>& screened, int a,
                                   const BlockPartition& blocks, const std::vector<Matrix>& block_phi);

/// Split SSE for a single cluster scan; returns (best s, best value).
std::pair<int, double> split_scan(const TimeSeries& data, int q, int lo, int hi, const Matrix& left_phi,
                                  const Matrix& right_phi);

/// Step 4: per-segment lasso on the trimmed segments. Returns p x pq
/// matrices. With `lowrank`, the sparse part of y - L Y is fitted.
std::vector<Matrix> refit_segments(const TimeSeries& data, int q, const std::vector<int>& points, int radius,
                                   std::optional<double> rho, const std::optional<Matrix>& lowrank = std::nullopt);

struct TbssDiagnostics {
    BlockPartition blocks;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    long long variable_count = 0;
    CandidateSet candidates;
    int an = 0;
    double eta = 0.0;
    double omega = 0.0;
    std::vector<int> screened;
    std::vector<int> an_grid;
    std::vector<int> an_counts;
    std::vector<std::string> warnings;
};

struct TbssOutput {
    DetectionResult result;
    TbssDiagnostics diagnostics;
};

TbssOutput tbss_detect(const TimeSeries& data, const TbssConfig& config);

}  // namespace varseg::tbss
