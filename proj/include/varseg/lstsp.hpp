#pragma once

#include "varseg/core.hpp"
#include "varseg/fista.hpp"

#include <array>
#include <optional>
#include <vector>

namespace varseg::lstsp {

/// Weights of one low-rank plus sparse fit on the summed scale
/// 1/2 sum ||y_t - (L + S) y_{t-1}||^2 + lambda |S|_1 + mu |L|_*.
struct Penalty {
    double lambda = 0.0;
    double mu = 0.0;
};

struct SolverControls {
    double tol = 1e-4;
    int max_iter = 100;
};

struct LstspConfig {
    /// Rolling-window weights for the left and right fits.
    std::optional<std::array<Penalty, 2>> window_penalty;
    /// Defaults to the left rolling-window weights.
    std::optional<Penalty> screen_penalty;
    /// Defaults to the screening weights.
    std::optional<Penalty> refit_penalty;
    std::optional<double> omega;
    double omega_constant = 0.1;  ///< C in omega = C log n log p
    std::optional<int> window;    ///< h
    std::optional<int> step;      ///< l
    int skip = 5;
    SolverControls solver;
    bool cv = false;
    int folds = 5;
    std::optional<int> refit_radius;

    void validate() const;
};

/// One fitted segment: responses t in [begin, end).
struct SegmentFit {
    int begin = 0;
    int end = 0;
    Matrix lowrank;
    Matrix sparse;
    double sse = 0.0;
    double objective = 0.0;  ///< sse + 2 (lambda |S|_1 + mu |L|_*)
};

SegmentFit fit_segment(const TimeSeries& data, int t_begin, int t_end, const Penalty& penalty,
                       const SolverControls& controls, const SegmentFit* warm = nullptr);

struct SingleCp {
    int tau = 0;
    double score = 0.0;
    std::vector<int> taus;          ///< search domain
    std::vector<double> profile;    ///< score per tau
};

/// Best single split of the window [b, e): left responses [b, tau), right
/// [tau, e), tau trimmed by `skip` at both ends; score = SSE / (h - 1).
SingleCp single_cp_search(const TimeSeries& data, int b, int e, const std::array<Penalty, 2>& penalty, int skip,
                          const SolverControls& controls);

struct Window {
    int begin = 0;  ///< first observation
    int end = 0;    ///< one past the last observation
};

/// Windows [1, 1 + h), [1 + l, 1 + l + h), ...; the last one ends at T.
std::vector<Window> rolling_windows(int T, int h, int l);

/// Sorted candidates; runs with consecutive gaps below `distance` collapse
/// to their (lower) median.
std::vector<int> dedup_candidates(std::vector<int> candidates, int distance);

struct ScreenResult {
    std::vector<int> points;
    double ic = 0.0;
    std::vector<double> ic_trace;  ///< IC after each accepted removal, starting with the full set
    std::vector<int> removed;      ///< in removal order
};

/// Sum of segment objectives with breaks at `points`, divided by T - 1,
/// plus |points| omega.
double information_criterion(const TimeSeries& data, const std::vector<int>& points, const Penalty& penalty,
                             double omega, const SolverControls& controls);

/// Backward elimination: drop the candidate whose removal lowers the IC
/// most, until no single removal lowers it.
ScreenResult backward_screen(const TimeSeries& data, const std::vector<int>& candidates, const Penalty& penalty,
                             double omega, const SolverControls& controls);

/// Per-segment fits on [tau_j + R + 1, tau_{j+1} - R - 1).
std::vector<SegmentFit> lstsp_refit(const TimeSeries& data, const std::vector<int>& points, int radius,
                                    const Penalty& penalty, const SolverControls& controls);

/// Weights from the theoretical scalings for fits on about n responses.
Penalty default_penalty(int n, int p);

/// Forward-chained CV inside one window over scaled default weights.
Penalty cv_window_penalty(const TimeSeries& data, int b, int e, int folds, const SolverControls& controls);

struct LstspDiagnostics {
    int window = 0;
    int step = 0;
    std::vector<Window> windows;
    std::vector<int> raw_candidates;  ///< one per window
    std::vector<int> candidates;      ///< after dedup
    int search_count = 0;             ///< single_cp_search invocations
    double omega = 0.0;
    ScreenResult screen;
};

struct LstspOutput {
    DetectionResult result;
    LstspDiagnostics diagnostics;
};

LstspOutput lstsp_detect(const TimeSeries& data, const LstspConfig& config);

}  // namespace varseg::lstsp
