#pragma once

#include "varseg/core.hpp"
#include "varseg/datagen.hpp"
#include "varseg/lstsp.hpp"
#include "varseg/tbss.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace varseg::eval {

/// Hausdorff distance between two index sets; +infinity when either is empty.
double hausdorff(const std::vector<int>& a, const std::vector<int>& b);

/// Success window [t_j - (t_j - t_{j-1}) / L, t_j + (t_{j+1} - t_j) / L]
/// with t_0 = 0 and t_{m+1} = T.
std::pair<double, double> success_window(const std::vector<int>& truth, std::size_t j, int T, int L);

/// Per true change point, the fraction of replicates with an estimate in
/// its success window.
std::vector<double> selection_rate(const std::vector<std::vector<int>>& estimates, const std::vector<int>& truth, int T,
                                   int L = 5);

struct Confusion {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;
};

/// Matthews correlation; 0 when any factor of the denominator is 0.
double mcc(const Confusion& c);

struct SupportMetrics {
    double sen = 0.0;
    double spc = 0.0;
    double acc = 0.0;
    double mcc = 0.0;
};

/// Entry-wise confusion of |estimate| > threshold against the nonzero
/// pattern of the truth, pooled over segments.
Confusion support_confusion(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth, double threshold);
SupportMetrics support_metrics(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth,
                               double threshold = 0.1);

struct CpRow {
    double truth = 0.0;  ///< fraction of T
    double mean = 0.0;   ///< fraction of T, over count-matched replicates
    double std = 0.0;
    double selection_rate = 0.0;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

struct ReplicateRecord {
    int index = 0;
    std::uint64_t seed = 0;
    std::vector<int> change_points;
    double hausdorff = std::numeric_limits<double>::infinity();
    std::optional<SupportMetrics> support;
    double seconds = 0.0;
    std::string error;  ///< non-empty when generation or detection threw
};

struct SimulationSummary {
    int T = 0;
    int L = 5;
    double threshold = 0.1;
    std::vector<int> truth;
    std::vector<CpRow> rows;
    double hausdorff_mean = 0.0;
    double hausdorff_std = 0.0;
    double hausdorff_median = 0.0;
    /// Replicates with an empty side, left out of the Hausdorff statistics.
    std::vector<int> hausdorff_flagged;
    MeanStd sen, spc, acc, mcc;
    /// Replicates whose change point count differs from the truth, or that threw.
    std::vector<int> failed;
    double mean_seconds = 0.0;
    std::vector<ReplicateRecord> replicates;
};

using Detector = std::function<DetectionResult(const TimeSeries&)>;

struct ReplicationOptions {
    int L = 5;
    double threshold = 0.1;
};

/// Replicate i (0-based) uses generator seed spec.seed + i.
SimulationSummary run_replications(int nreps, const datagen::GenerationSpec& spec, const Detector& detector,
                                   const ReplicationOptions& options = {});
SimulationSummary run_replications(int nreps, const datagen::GenerationSpec& spec, const tbss::TbssConfig& config,
                                   const ReplicationOptions& options = {});
SimulationSummary run_replications(int nreps, const datagen::GenerationSpec& spec, const lstsp::LstspConfig& config,
                                   const ReplicationOptions& options = {});

/// Matrices the estimates are scored against: the stacked transitions, or
/// the sparse components for the low-rank methods.
std::vector<Matrix> support_truth(const datagen::Simulation& sim, datagen::Method method);

/// Residuals r_t = y_t - sum_l Phi^(l) y_{t-l} for t in [t_begin, t_end),
/// t_begin > d; `phi` is p x pd.
Matrix segment_residuals(const TimeSeries& data, const Matrix& phi, int t_begin, int t_end);

/// log det(sum r r' / (N - d)) + k log N / N, k = nonzeros of `phi`.
double segment_bic(const TimeSeries& data, const Matrix& phi, int t_begin, int t_end);

/// Sum of segment BICs of a detection result fitted with lag d.
double result_bic(const TimeSeries& data, const DetectionResult& result);

struct LagSelection {
    int lag = 1;
    std::vector<std::optional<double>> bic;  ///< index d - 1; empty when d was skipped
    std::vector<std::vector<int>> change_points;
    std::vector<std::string> warnings;
};

using LagDetector = std::function<DetectionResult(const TimeSeries&, int)>;

LagSelection bic_lag_select(const TimeSeries& data, int max_lag, const LagDetector& detector);
/// TBSS with q = d for each candidate lag; the refit estimates are scored.
LagSelection bic_lag_select(const TimeSeries& data, int max_lag, const tbss::TbssConfig& config);

}  // namespace varseg::eval
