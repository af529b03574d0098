#include "varseg/lstsp.hpp"

#include "varseg/parallel.hpp"
#include "varseg/prox.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace varseg::lstsp {

void LstspConfig::validate() const
{
    auto check = [](const Penalty& w, const char* what) {
        if (!(w.lambda >= 0.0) || !(w.mu >= 0.0) || !std::isfinite(w.lambda) || !std::isfinite(w.mu)) {
            throw ConfigError(std::string(what) + " weights must be finite and non-negative");
        }
    };
    if (window_penalty) {
        check((*window_penalty)[0], "rolling-window");
        check((*window_penalty)[1], "rolling-window");
    }
    if (screen_penalty) check(*screen_penalty, "screening");
    if (refit_penalty) check(*refit_penalty, "refit");
    if (omega && !(*omega >= 0.0)) throw ConfigError("omega must be non-negative");
    if (!(omega_constant > 0.0)) throw ConfigError("omega constant must be positive");
    if (window && *window < 1) throw ConfigError("window h must be at least 1");
    if (step && *step < 1) throw ConfigError("step l must be at least 1");
    if (window && step && *step > *window) throw ConfigError("step l must not exceed the window h");
    if (skip < 1) throw ConfigError("skip must be at least 1");
    if (!(solver.tol > 0.0) || solver.max_iter < 1) throw ConfigError("invalid solver controls");
    if (cv && folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (refit_radius && *refit_radius < 0) throw ConfigError("refit radius must be non-negative");
}

namespace {

solvers::FistaOptions options_of(const SolverControls& c)
{
    solvers::FistaOptions o;
    o.tol = c.tol;
    o.max_iter = c.max_iter;
    return o;
}

// Least-squares statistics of responses [b, e) regressed on their first lag.
struct Stats {
    Matrix gram;
    Matrix cross;
    double yy = 0.0;
    int n = 0;
};

Stats stats_of(const TimeSeries& data, int b, int e)
{
    const LaggedDesign d = lagged_window(data, 1, b, e);
    return {d.design.transpose() * d.design, d.design.transpose() * d.response, d.response.squaredNorm(),
            static_cast<int>(d.design.rows())};
}

SegmentFit fit_stats(const Stats& st, int b, int e, const Penalty& w, const SolverControls& controls,
                     const SegmentFit* warm)
{
    if (st.n < 1) throw SegmentError("empty segment [" + std::to_string(b) + ", " + std::to_string(e) + ")");
    const double n = st.n;
    const solvers::GramLoss loss(st.gram, st.cross, st.yy, n);
    std::optional<solvers::LowRankSparse> init;
    if (warm) init = solvers::LowRankSparse{warm->lowrank, warm->sparse, 0.0, 0};
    // Summed half-SSE weights become 2 w / n on the (1/n) SSE scale.
    const auto r = solvers::lowrank_sparse_regression(loss, 2.0 * w.lambda / n, 2.0 * w.mu / n, options_of(controls),
                                                      init ? &*init : nullptr);
    SegmentFit f;
    f.begin = b;
    f.end = e;
    f.lowrank = r.lowrank;
    f.sparse = r.sparse;
    f.sse = r.loss * n;
    f.objective = f.sse + 2.0 * (w.lambda * f.sparse.cwiseAbs().sum() + w.mu * solvers::nuclear_norm(f.lowrank));
    return f;
}

}  // namespace

SegmentFit fit_segment(const TimeSeries& data, int t_begin, int t_end, const Penalty& penalty,
                       const SolverControls& controls, const SegmentFit* warm)
{
    const int b = std::max(t_begin, 2);
    const int e = std::min(t_end, data.length() + 1);
    if (e <= b) {
        throw SegmentError("empty segment [" + std::to_string(t_begin) + ", " + std::to_string(t_end) + ")");
    }
    return fit_stats(stats_of(data, b, e), t_begin, t_end, penalty, controls, warm);
}

SingleCp single_cp_search(const TimeSeries& data, int b, int e, const std::array<Penalty, 2>& penalty, int skip,
                          const SolverControls& controls)
{
    const int T = data.length();
    const int p = data.dim();
    if (b < 1 || e > T + 1 || e - b < 2 * skip + 2) {
        throw SegmentError("window [" + std::to_string(b) + ", " + std::to_string(e) + ") is shorter than 2 skip + 2");
    }
    const int first = std::max(b, 2);
    const LaggedDesign d = lagged_window(data, 1, first, e);
    const int m = static_cast<int>(d.design.rows());
    // Prefix sums of the per-response statistics.
    std::vector<Matrix> gram(m + 1, Matrix::Zero(p, p)), cross(m + 1, Matrix::Zero(p, p));
    std::vector<double> yy(m + 1, 0.0);
    for (int i = 0; i < m; ++i) {
        gram[i + 1] = gram[i] + d.design.row(i).transpose() * d.design.row(i);
        cross[i + 1] = cross[i] + d.design.row(i).transpose() * d.response.row(i);
        yy[i + 1] = yy[i] + d.response.row(i).squaredNorm();
    }
    SingleCp out;
    for (int tau = std::max(b + skip, first + 1); tau <= e - skip && tau < e; ++tau) out.taus.push_back(tau);
    if (out.taus.empty()) throw SegmentError("window has an empty search domain");
    out.profile.resize(out.taus.size());
    std::optional<SegmentFit> left_warm, right_warm;
    for (std::size_t k = 0; k < out.taus.size(); ++k) {
        const int i = out.taus[k] - first;
        const Stats ls{gram[i], cross[i], yy[i], i};
        const Stats rs{gram[m] - gram[i], cross[m] - cross[i], yy[m] - yy[i], m - i};
        SegmentFit lf = fit_stats(ls, first, out.taus[k], penalty[0], controls, left_warm ? &*left_warm : nullptr);
        SegmentFit rf = fit_stats(rs, out.taus[k], e, penalty[1], controls, right_warm ? &*right_warm : nullptr);
        out.profile[k] = (lf.sse + rf.sse) / (e - b - 1);
        left_warm = std::move(lf);
        right_warm = std::move(rf);
    }
    const auto best = std::min_element(out.profile.begin(), out.profile.end());
    out.tau = out.taus[best - out.profile.begin()];
    out.score = *best;
    return out;
}

std::vector<Window> rolling_windows(int T, int h, int l)
{
    if (h < 1 || l < 1 || l > h || h > T) throw ConfigError("rolling windows need 1 <= l <= h <= T");
    std::vector<Window> out;
    const int last = T - h + 1;
    int b = 1;
    for (; b <= last; b += l) out.push_back({b, b + h});
    if (out.back().begin < last) out.push_back({last, T + 1});
    return out;
}

std::vector<int> dedup_candidates(std::vector<int> candidates, int distance)
{
    std::sort(candidates.begin(), candidates.end());
    std::vector<int> out;
    std::size_t i = 0;
    while (i < candidates.size()) {
        std::size_t j = i + 1;
        while (j < candidates.size() && candidates[j] - candidates[j - 1] < std::max(distance, 1)) ++j;
        out.push_back(candidates[i + (j - i - 1) / 2]);
        i = j;
    }
    return out;
}

namespace {

class SegmentCache {
public:
    SegmentCache(const TimeSeries& data, const Penalty& w, const SolverControls& c) : data_(data), w_(w), c_(c) {}

    double objective(int b, int e)
    {
        const auto key = std::make_pair(b, e);
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double v = fit_segment(data_, b, e, w_, c_).objective;
        cache_.emplace(key, v);
        return v;
    }

    /// Fits all missing segments in parallel.
    void prefetch(const std::vector<std::pair<int, int>>& keys)
    {
        std::vector<std::pair<int, int>> todo;
        for (const auto& k : keys) {
            if (!cache_.count(k) && std::find(todo.begin(), todo.end(), k) == todo.end()) todo.push_back(k);
        }
        std::vector<double> values(todo.size());
        parallel_for(todo.size(), [&](std::size_t i) {
            values[i] = fit_segment(data_, todo[i].first, todo[i].second, w_, c_).objective;
        });
        for (std::size_t i = 0; i < todo.size(); ++i) cache_.emplace(todo[i], values[i]);
    }

private:
    const TimeSeries& data_;
    Penalty w_;
    SolverControls c_;
    std::map<std::pair<int, int>, double> cache_;
};

std::vector<std::pair<int, int>> segments_of(const std::vector<int>& points, int T)
{
    std::vector<std::pair<int, int>> out;
    int prev = 2;
    for (int t : points) {
        out.emplace_back(prev, t);
        prev = t;
    }
    out.emplace_back(prev, T + 1);
    return out;
}

// The summed objective is divided by the response count n = T - 1 so that
// omega = C log n log p is on the scale of a per-observation loss.
double ic_of(SegmentCache& cache, const std::vector<int>& points, int T, double omega)
{
    double total = 0.0;
    for (const auto& [b, e] : segments_of(points, T)) total += cache.objective(b, e);
    return total / (T - 1) + omega * static_cast<double>(points.size());
}

void check_candidates(const std::vector<int>& points, int T)
{
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i] <= 2 || points[i] > T) throw ConfigError("candidate outside (2, T]");
        if (i > 0 && points[i] <= points[i - 1]) throw ConfigError("candidates must be strictly increasing");
    }
}

}  // namespace

double information_criterion(const TimeSeries& data, const std::vector<int>& points, const Penalty& penalty,
                             double omega, const SolverControls& controls)
{
    check_candidates(points, data.length());
    SegmentCache cache(data, penalty, controls);
    return ic_of(cache, points, data.length(), omega);
}

ScreenResult backward_screen(const TimeSeries& data, const std::vector<int>& candidates, const Penalty& penalty,
                             double omega, const SolverControls& controls)
{
    const int T = data.length();
    check_candidates(candidates, T);
    SegmentCache cache(data, penalty, controls);
    ScreenResult out;
    out.points = candidates;
    cache.prefetch(segments_of(out.points, T));
    out.ic = ic_of(cache, out.points, T, omega);
    out.ic_trace.push_back(out.ic);
    while (!out.points.empty()) {
        const auto& pts = out.points;
        std::vector<std::pair<int, int>> merged;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            merged.emplace_back(j == 0 ? 2 : pts[j - 1], j + 1 == pts.size() ? T + 1 : pts[j + 1]);
        }
        cache.prefetch(merged);
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            std::vector<int> rest = pts;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
            const double v = ic_of(cache, rest, T, omega);
            if (v < best) {
                best = v;
                arg = j;
            }
        }
        if (!(best < out.ic)) break;
        out.removed.push_back(pts[arg]);
        out.points.erase(out.points.begin() + static_cast<std::ptrdiff_t>(arg));
        out.ic = best;
        out.ic_trace.push_back(best);
    }
    return out;
}

std::vector<SegmentFit> lstsp_refit(const TimeSeries& data, const std::vector<int>& points, int radius,
                                    const Penalty& penalty, const SolverControls& controls)
{
    const int T = data.length();
    const int p = data.dim();
    const int m = static_cast<int>(points.size());
    std::vector<std::pair<int, int>> ranges;
    for (int j = 0; j <= m; ++j) {
        const int b = j == 0 ? 2 : points[j - 1] + radius + 1;
        const int e = j == m ? T + 1 : points[j] - radius - 1;
        if (e - b < p) {
            throw SegmentError("segment " + std::to_string(j + 1) + " has " + std::to_string(std::max(0, e - b)) +
                               " responses after trimming radius " + std::to_string(radius) + ", fewer than p");
        }
        ranges.emplace_back(b, e);
    }
    std::vector<SegmentFit> out(ranges.size());
    parallel_for(ranges.size(), [&](std::size_t j) {
        out[j] = fit_segment(data, ranges[j].first, ranges[j].second, penalty, controls);
    });
    return out;
}

Penalty default_penalty(int n, int p)
{
    const double nn = std::max(n, 1);
    return {0.5 * std::sqrt(nn * std::log(std::max(p, 2))), std::sqrt(nn * p)};
}

Penalty cv_window_penalty(const TimeSeries& data, int b, int e, int folds, const SolverControls& controls)
{
    const int first = std::max(b, 2);
    const int n = e - first;
    if (folds < 2 || n < 2 * folds) throw ConfigError("window too short for the requested folds");
    const Penalty base = default_penalty(n / 2, data.dim());
    const double scales[] = {0.25, 0.5, 1.0, 2.0};
    Penalty best_w = base;
    double best = std::numeric_limits<double>::infinity();
    for (double sl : scales) {
        for (double sm : scales) {
            const Penalty w{base.lambda * sl, base.mu * sm};
            double err = 0.0;
            for (int k = 1; k < folds; ++k) {
                const int cut = first + n * k / folds;
                const int stop = first + n * (k + 1) / folds;
                const SegmentFit f = fit_segment(data, first, cut, w, controls);
                const LaggedDesign d = lagged_window(data, 1, cut, stop);
                err += (d.response - d.design * (f.lowrank + f.sparse).transpose()).squaredNorm();
            }
            if (err < best) {
                best = err;
                best_w = w;
            }
        }
    }
    return best_w;
}

LstspOutput lstsp_detect(const TimeSeries& data, const LstspConfig& config)
{
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    const int T = data.length();
    const int p = data.dim();
    if (p < 1) throw ConfigError("data has no columns");
    if (!data.values().allFinite()) throw ConfigError("data contains non-finite values");
    const int n = T - 1;

    LstspOutput out;
    LstspDiagnostics& diag = out.diagnostics;
    diag.window = config.window.value_or(static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)))));
    diag.step = config.step.value_or(std::max(1, diag.window / 4));
    if (diag.window > T) throw ConfigError("window h exceeds the series length");
    if (diag.step > diag.window) throw ConfigError("step l must not exceed the window h");
    if (diag.window < 2 * config.skip + 2) throw ConfigError("window h must be at least 2 skip + 2");
    diag.windows = rolling_windows(T, diag.window, diag.step);

    const Penalty half = default_penalty(diag.window / 2, p);
    const std::array<Penalty, 2> window_w = config.window_penalty.value_or(std::array<Penalty, 2>{half, half});
    diag.raw_candidates.resize(diag.windows.size());
    parallel_for(diag.windows.size(), [&](std::size_t k) {
        const Window& w = diag.windows[k];
        std::array<Penalty, 2> pw = window_w;
        if (config.cv && !config.window_penalty) {
            const Penalty c = cv_window_penalty(data, w.begin, w.end, config.folds, config.solver);
            pw = {c, c};
        }
        diag.raw_candidates[k] = single_cp_search(data, w.begin, w.end, pw, config.skip, config.solver).tau;
    });
    diag.search_count = static_cast<int>(diag.windows.size());
    diag.candidates = dedup_candidates(diag.raw_candidates, diag.window / 4);

    const Penalty screen_w = config.screen_penalty.value_or(config.window_penalty ? (*config.window_penalty)[0] : half);
    diag.omega = config.omega.value_or(config.omega_constant * std::log(static_cast<double>(n)) *
                                       std::log(static_cast<double>(std::max(p, 2))));
    diag.screen = backward_screen(data, diag.candidates, screen_w, diag.omega, config.solver);

    DetectionResult& res = out.result;
    res.change_points = diag.screen.points;
    res.lag = 1;
    const int radius = config.refit_radius.value_or(config.skip);
    const auto fits = lstsp_refit(data, res.change_points, radius, config.refit_penalty.value_or(screen_w),
                                  config.solver);
    std::vector<Matrix> lowrank;
    for (const SegmentFit& f : fits) {
        res.sparse_mats.push_back(f.sparse);
        lowrank.push_back(f.lowrank);
    }
    res.lowrank_mats = std::move(lowrank);
    res.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    res.validate(T);
    return out;
}

}  // namespace varseg::lstsp
