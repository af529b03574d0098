#include "varseg/evalsuite.hpp"

#include "varseg/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace varseg::eval {

double hausdorff(const std::vector<int>& a, const std::vector<int>& b)
{
    if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
    auto directed = [](const std::vector<int>& from, const std::vector<int>& to) {
        double worst = 0.0;
        for (int x : from) {
            double best = std::numeric_limits<double>::infinity();
            for (int y : to) best = std::min(best, std::abs(static_cast<double>(x) - y));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

std::pair<double, double> success_window(const std::vector<int>& truth, std::size_t j, int T, int L)
{
    if (L < 2) throw ConfigError("L must be at least 2");
    if (j >= truth.size()) throw ConfigError("change point index out of range");
    const double prev = j == 0 ? 0.0 : truth[j - 1];
    const double next = j + 1 == truth.size() ? static_cast<double>(T) : truth[j + 1];
    const double t = truth[j];
    return {t - (t - prev) / L, t + (next - t) / L};
}

std::vector<double> selection_rate(const std::vector<std::vector<int>>& estimates, const std::vector<int>& truth, int T,
                                   int L)
{
    if (L < 2) throw ConfigError("L must be at least 2");
    std::vector<double> rates(truth.size(), 0.0);
    if (estimates.empty()) return rates;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        const auto [lo, hi] = success_window(truth, j, T, L);
        int hits = 0;
        for (const auto& est : estimates) {
            if (std::any_of(est.begin(), est.end(), [&](int t) { return t >= lo && t <= hi; })) ++hits;
        }
        rates[j] = static_cast<double>(hits) / static_cast<double>(estimates.size());
    }
    return rates;
}

double mcc(const Confusion& c)
{
    const double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
    const double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
    if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return 0.0;
    const double v = (tp * tn - fp * fn) / std::sqrt(f1 * f2 * f3 * f4);
    return std::clamp(v, -1.0, 1.0);
}

Confusion support_confusion(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth, double threshold)
{
    if (estimated.size() != truth.size()) throw ConfigError("segment counts of estimate and truth differ");
    if (!(threshold >= 0.0)) throw ConfigError("threshold must be non-negative");
    Confusion c;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        const Matrix& e = estimated[j];
        const Matrix& t = truth[j];
        if (e.rows() != t.rows() || e.cols() != t.cols()) throw ConfigError("estimate and truth shapes differ");
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const bool pe = std::abs(e(i)) > threshold;
            const bool pt = t(i) != 0.0;
            if (pe && pt) {
                ++c.tp;
            } else if (pe) {
                ++c.fp;
            } else if (pt) {
                ++c.fn;
            } else {
                ++c.tn;
            }
        }
    }
    return c;
}

SupportMetrics support_metrics(const std::vector<Matrix>& estimated, const std::vector<Matrix>& truth, double threshold)
{
    const Confusion c = support_confusion(estimated, truth, threshold);
    auto ratio = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
    SupportMetrics m;
    m.sen = ratio(c.tp, c.tp + c.fn);
    m.spc = ratio(c.tn, c.tn + c.fp);
    m.acc = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
    m.mcc = mcc(c);
    return m;
}

namespace {

// Sample standard deviation; 0 for fewer than two values.
MeanStd mean_std(const std::vector<double>& v)
{
    MeanStd out;
    if (v.empty()) return out;
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return out;
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return out;
}

double median(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool is_lowrank(datagen::Method m)
{
    return m == datagen::Method::fixed_lowrank_sparse || m == datagen::Method::lowrank_sparse;
}

}  // namespace

std::vector<Matrix> support_truth(const datagen::Simulation& sim, datagen::Method method)
{
    if (is_lowrank(method)) return sim.sparse;
    std::vector<Matrix> out;
    for (const TransitionSet& ts : sim.model.segments) out.push_back(ts.stacked());
    return out;
}

SimulationSummary run_replications(int nreps, const datagen::GenerationSpec& spec, const Detector& detector,
                                   const ReplicationOptions& options)
{
    if (nreps < 1) throw ConfigError("nreps must be at least 1");
    if (options.L < 2) throw ConfigError("L must be at least 2");
    if (!(options.threshold >= 0.0)) throw ConfigError("threshold must be non-negative");
    spec.validate();

    SimulationSummary s;
    s.T = spec.T;
    s.L = options.L;
    s.threshold = options.threshold;
    s.truth.assign(spec.break_points.begin(), spec.break_points.end() - 1);
    s.replicates.resize(nreps);

    parallel_for(static_cast<std::size_t>(nreps), [&](std::size_t i) {
        ReplicateRecord& r = s.replicates[i];
        r.index = static_cast<int>(i);
        r.seed = spec.seed + i;
        const auto started = std::chrono::steady_clock::now();
        try {
            datagen::GenerationSpec g = spec;
            g.seed = r.seed;
            const datagen::Simulation sim = datagen::simulate(g);
            const DetectionResult res = detector(sim.series);
            r.change_points = res.change_points;
            r.hausdorff = hausdorff(res.change_points, s.truth);
            const std::vector<Matrix> truth = support_truth(sim, spec.method);
            if (res.sparse_mats.size() == truth.size() && !truth.empty() &&
                res.sparse_mats[0].rows() == truth[0].rows() && res.sparse_mats[0].cols() == truth[0].cols()) {
                r.support = support_metrics(res.sparse_mats, truth, options.threshold);
            }
        } catch (const Error& e) {
            r.error = e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    });

    const std::size_t m = s.truth.size();
    std::vector<std::vector<int>> estimates;
    std::vector<std::vector<double>> located(m);
    std::vector<double> hd, sen, spc, acc, mc, secs;
    for (const ReplicateRecord& r : s.replicates) {
        estimates.push_back(r.change_points);
        secs.push_back(r.seconds);
        if (!r.error.empty() || r.change_points.size() != m) {
            s.failed.push_back(r.index);
        } else {
            for (std::size_t j = 0; j < m; ++j) located[j].push_back(static_cast<double>(r.change_points[j]) / s.T);
        }
        if (r.error.empty() && std::isfinite(r.hausdorff)) {
            hd.push_back(r.hausdorff);
        } else if (r.error.empty() && !(r.change_points.empty() && m == 0)) {
            s.hausdorff_flagged.push_back(r.index);
        }
        if (r.support) {
            sen.push_back(r.support->sen);
            spc.push_back(r.support->spc);
            acc.push_back(r.support->acc);
            mc.push_back(r.support->mcc);
        }
    }
    const std::vector<double> rates = selection_rate(estimates, s.truth, s.T, s.L);
    for (std::size_t j = 0; j < m; ++j) {
        const MeanStd loc = mean_std(located[j]);
        s.rows.push_back({static_cast<double>(s.truth[j]) / s.T, loc.mean, loc.std, rates[j]});
    }
    const MeanStd h = mean_std(hd);
    s.hausdorff_mean = h.mean;
    s.hausdorff_std = h.std;
    s.hausdorff_median = median(hd);
    s.sen = mean_std(sen);
    s.spc = mean_std(spc);
    s.acc = mean_std(acc);
    s.mcc = mean_std(mc);
    s.mean_seconds = mean_std(secs).mean;
    return s;
}

SimulationSummary run_replications(int nreps, const datagen::GenerationSpec& spec, const tbss::TbssConfig& config,
                                   const ReplicationOptions& options)
{
    config.validate();
    return run_replications(
        nreps, spec, [&](const TimeSeries& x) { return tbss::tbss_detect(x, config).result; }, options);
}

SimulationSummary run_replications(int nreps, const datagen::GenerationSpec& spec, const lstsp::LstspConfig& config,
                                   const ReplicationOptions& options)
{
    config.validate();
    return run_replications(
        nreps, spec, [&](const TimeSeries& x) { return lstsp::lstsp_detect(x, config).result; }, options);
}

Matrix segment_residuals(const TimeSeries& data, const Matrix& phi, int t_begin, int t_end)
{
    const int p = data.dim();
    if (phi.rows() != p || phi.cols() % p != 0 || phi.cols() == 0) throw ConfigError("phi must be p x pd");
    const int d = static_cast<int>(phi.cols()) / p;
    if (t_begin <= d || t_end > data.length() + 1 || t_end < t_begin) {
        throw SegmentError("residual range [" + std::to_string(t_begin) + ", " + std::to_string(t_end) +
                           ") invalid for lag " + std::to_string(d));
    }
    const LaggedDesign ld = lagged_window(data, d, t_begin, t_end);
    return ld.response - ld.design * phi.transpose();
}

double segment_bic(const TimeSeries& data, const Matrix& phi, int t_begin, int t_end)
{
    const int p = data.dim();
    const int d = static_cast<int>(phi.cols()) / std::max(p, 1);
    const Matrix r = segment_residuals(data, phi, t_begin, t_end);
    const double n = static_cast<double>(r.rows());
    if (r.rows() < d + p) {
        throw SegmentError("segment with " + std::to_string(r.rows()) + " responses is shorter than d + p");
    }
    const Matrix sigma = r.transpose() * r / (n - d);
    const Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericError("residual covariance is not positive definite");
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double k = static_cast<double>((phi.array() != 0.0).count());
    return logdet + k * std::log(n) / n;
}

double result_bic(const TimeSeries& data, const DetectionResult& result)
{
    const int T = data.length();
    const int d = result.lag;
    const std::size_t m = result.change_points.size();
    if (result.sparse_mats.size() != m + 1) throw ConfigError("result has the wrong number of segment matrices");
    double total = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
        const int b = std::max(j == 0 ? 1 : result.change_points[j - 1], d + 1);
        const int e = j == m ? T + 1 : result.change_points[j];
        Matrix phi = result.sparse_mats[j];
        if (result.lowrank_mats) phi += (*result.lowrank_mats)[j];
        total += segment_bic(data, phi, b, e);
    }
    return total;
}

LagSelection bic_lag_select(const TimeSeries& data, int max_lag, const LagDetector& detector)
{
    if (max_lag < 1 || max_lag > 8) throw ConfigError("max lag must be in [1, 8]");
    LagSelection out;
    out.bic.resize(max_lag);
    out.change_points.resize(max_lag);
    for (int d = 1; d <= max_lag; ++d) {
        try {
            const DetectionResult res = detector(data, d);
            out.change_points[d - 1] = res.change_points;
            out.bic[d - 1] = result_bic(data, res);
        } catch (const SegmentError& e) {
            out.warnings.push_back("lag " + std::to_string(d) + " skipped: " + e.what());
        }
    }
    std::optional<int> best;
    for (int d = 1; d <= max_lag; ++d) {
        if (out.bic[d - 1] && (!best || *out.bic[d - 1] < *out.bic[*best - 1])) best = d;
    }
    if (!best) throw SegmentError("no candidate lag could be scored");
    out.lag = *best;
    return out;
}

LagSelection bic_lag_select(const TimeSeries& data, int max_lag, const tbss::TbssConfig& config)
{
    return bic_lag_select(data, max_lag, [&](const TimeSeries& x, int d) {
        tbss::TbssConfig c = config;
        c.q = d;
        c.refit = true;
        return tbss::tbss_detect(x, c).result;
    });
}

}  // namespace varseg::eval
