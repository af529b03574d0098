#include "varseg/datagen.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>

namespace varseg::datagen {

namespace {

constexpr std::uint64_t lowrank_stream = 1000;
constexpr std::uint64_t noise_stream = 2000;

// Value for (segment j, lag l) from a list given per segment, per
// (segment, lag) in segment-major order, or as one broadcast value.
double per_segment_lag(const std::vector<double>& values, const GenerationSpec& spec, int j, int l,
                       const char* what)
{
    const int m = spec.segment_count();
    const auto n = values.size();
    if (n == 1) return values[0];
    if (n == static_cast<std::size_t>(m)) return values[j];
    if (!spec.lags_vector.empty()) {
        int offset = 0;
        for (int s = 0; s < j; ++s) offset += spec.lags_vector[s];
        int total = offset;
        for (int s = j; s < m; ++s) total += spec.lags_vector[s];
        if (n == static_cast<std::size_t>(total)) return values[offset + l];
    }
    if (n == static_cast<std::size_t>(m * spec.max_lag())) return values[j * spec.max_lag() + l];
    throw ConfigError(std::string(what) + " has " + std::to_string(n) +
                      " entries; expected 1, one per segment, or one per segment and lag");
}

Matrix gaussian(std::mt19937_64& rng, int r, int c)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = nd(rng);
    return m;
}

Matrix pattern_matrix(const GenerationSpec& spec, int j, int l, double signal, std::mt19937_64& rng)
{
    const int p = spec.p;
    Matrix a = Matrix::Zero(p, p);
    switch (spec.pattern.kind) {
    case PatternKind::off_diagonal:
        for (int i = 0; i + 1 < p; ++i) a(i, i + 1) = signal;
        break;
    case PatternKind::diagonal:
        a.diagonal().setConstant(signal);
        break;
    case PatternKind::random: {
        const double d = per_segment_lag(spec.pattern.density, spec, j, l, "density");
        std::bernoulli_distribution edge(d);
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c)
                if (edge(rng)) a(r, c) = signal;
        break;
    }
    }
    return a;
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

int GenerationSpec::max_lag() const
{
    if (lags_vector.empty()) return q;
    return *std::max_element(lags_vector.begin(), lags_vector.end());
}

int GenerationSpec::lag_of_segment(int j) const { return lags_vector.empty() ? q : lags_vector[j]; }

void GenerationSpec::validate() const
{
    if (T < 2 || p < 1) throw ConfigError("need T >= 2 and p >= 1");
    if (q < 1) throw ConfigError("lag must be positive");
    if (break_points.empty() || break_points.back() != T + 1) {
        throw ConfigError("break points must end with T + 1");
    }
    int prev = 1;
    for (int b : break_points) {
        if (b <= prev) throw ConfigError("break points must be strictly increasing and > 1");
        prev = b;
    }
    if (!lags_vector.empty()) {
        if (lags_vector.size() != break_points.size()) throw ConfigError("lags_vector needs one lag per segment");
        for (int l : lags_vector)
            if (l < 1) throw ConfigError("lags_vector entries must be positive");
    }
    if (!(spectral_radius > 0.0 && spectral_radius < 1.0)) {
        throw ConfigError("spectral radius must lie in (0, 1)");
    }
    if (skip < 0) throw ConfigError("skip must be non-negative");
    if (noise_scales.size() != 1 && noise_scales.size() != break_points.size()) {
        throw ConfigError("noise scales: give one value or one per segment");
    }
    for (double s : noise_scales)
        if (!(s >= 0.0)) throw ConfigError("noise scales must be non-negative");
    if (pattern.kind == PatternKind::random && !transitions) {
        if (pattern.density.empty()) throw ConfigError("random sparsity pattern needs a density");
        for (double d : pattern.density)
            if (!(d > 0.0 && d < 1.0)) throw ConfigError("density must lie in (0, 1)");
    }
    if (method == Method::fixed_lowrank_sparse || method == Method::lowrank_sparse) {
        if (max_lag() != 1) throw ConfigError("low-rank plus sparse generation supports lag 1 only");
        if (rank.empty()) throw ConfigError("low-rank generation needs ranks");
        const int rmax = *std::max_element(rank.begin(), rank.end());
        if (static_cast<int>(singular_vals.size()) != rmax) {
            throw ConfigError("singular_vals length must equal the maximum rank");
        }
        for (int r : rank)
            if (r < 0 || r > p) throw ConfigError("rank must lie in [0, p]");
        for (double s : singular_vals)
            if (!(s > 0.0)) throw ConfigError("singular values must be positive");
        for (double g : info_ratio)
            if (!(g > 0.0)) throw ConfigError("information ratios must be positive");
    }
}

std::vector<TransitionSet> gen_sparse_transitions(const GenerationSpec& spec)
{
    const int m = spec.segment_count();
    const int qmax = spec.max_lag();
    if (spec.signals.empty()) throw ConfigError("sparse generation needs signals");
    std::vector<TransitionSet> out;
    for (int j = 0; j < m; ++j) {
        auto rng = make_stream(spec.seed, j);
        std::vector<Matrix> lags;
        for (int l = 0; l < qmax; ++l) {
            if (l < spec.lag_of_segment(j)) {
                const double s = per_segment_lag(spec.signals, spec, j, l, "signals");
                lags.push_back(pattern_matrix(spec, j, l, s, rng));
            } else {
                lags.push_back(Matrix::Zero(spec.p, spec.p));
            }
        }
        out.emplace_back(std::move(lags));
    }
    return out;
}

std::vector<TransitionSet> gen_group_sparse_transitions(const GenerationSpec& spec)
{
    const int m = spec.segment_count();
    const int qmax = spec.max_lag();
    const int p = spec.p;
    if (spec.signals.empty()) throw ConfigError("group sparse generation needs signals");
    std::vector<std::pair<int, int>> cells;  // (lag, column or row), 0-based
    for (const auto& group : spec.group_index) {
        for (int f : group) {
            if (f < 1 || f > p * qmax) {
                throw ConfigError("group index " + std::to_string(f) + " outside [1, " +
                                  std::to_string(p * qmax) + "]");
            }
            cells.emplace_back((f - 1) / p, (f - 1) % p);
        }
    }
    std::vector<TransitionSet> out;
    for (int j = 0; j < m; ++j) {
        std::vector<Matrix> lags(qmax, Matrix::Zero(p, p));
        for (auto [l, k] : cells) {
            if (l >= spec.lag_of_segment(j)) continue;
            const double s = per_segment_lag(spec.signals, spec, j, l, "signals");
            if (spec.group_type == GroupOrientation::column) lags[l].col(k).setConstant(s);
            else lags[l].row(k).setConstant(s);
        }
        out.emplace_back(std::move(lags));
    }
    return out;
}

Matrix gen_lowrank_component(int p, int r, const std::vector<double>& singular_vals, std::mt19937_64& rng)
{
    if (r > p) throw ConfigError("rank " + std::to_string(r) + " exceeds dimension " + std::to_string(p));
    if (r < 0 || static_cast<int>(singular_vals.size()) < r) {
        throw ConfigError("need at least rank-many singular values");
    }
    if (r == 0) return Matrix::Zero(p, p);
    const Matrix u = Eigen::HouseholderQR<Matrix>(gaussian(rng, p, r)).householderQ() * Matrix::Identity(p, r);
    const Matrix v = Eigen::HouseholderQR<Matrix>(gaussian(rng, p, r)).householderQ() * Matrix::Identity(p, r);
    Vector s(r);
    for (int i = 0; i < r; ++i) s[i] = singular_vals[i];
    return u * s.asDiagonal() * v.transpose();
}

Matrix apply_info_ratio(const Matrix& l, const Matrix& s, double gamma)
{
    const double smax = max_abs(s);
    const double lmax = max_abs(l);
    if (smax == 0.0) throw ConfigError("information ratio undefined for a zero sparse component");
    if (!(gamma > 0.0)) throw ConfigError("information ratio must be positive");
    if (lmax == 0.0) return l;
    return l * (gamma * smax / lmax);
}

double stabilizing_factor(const TransitionSet& ts, double rho)
{
    if (companion_spectral_radius(ts) < rho) return 1.0;
    const double target = rho * (1.0 - 1e-6);
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (companion_spectral_radius(ts.scaled(mid)) <= target) lo = mid;
        else hi = mid;
    }
    return lo;
}

TransitionSet stabilize(const TransitionSet& ts, double rho)
{
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("spectral radius target must lie in (0, 1)");
    const double c = stabilizing_factor(ts, rho);
    return c == 1.0 ? ts : ts.scaled(c);
}

namespace {

// Zero noise scales are accepted here so a noiseless series can be produced.
Simulation run_recursion(const PiecewiseVarModel& model, int T, int skip, std::uint64_t seed)
{
    const int p = model.segments.front().dim();
    const int q = model.segments.front().lag_count();
    for (const auto& s : model.segments) {
        if (s.dim() != p || s.lag_count() != q) throw ConfigError("segments must share p and q");
    }
    const int total = T + skip;
    Matrix y = Matrix::Zero(total, p);
    Matrix e(total, p);
    auto rng = make_stream(seed, noise_stream);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Matrix> stacked;
    for (const auto& s : model.segments) stacked.push_back(s.stacked());

    for (int r = 0; r < total; ++r) {
        const int t = r - skip + 1;  // output time index; burn-in uses segment 0
        const int j = t < 1 ? 0 : model.segment_of(t);
        const double sigma = model.noise_scales[j];
        for (int c = 0; c < p; ++c) e(r, c) = sigma * nd(rng);
        Vector acc = e.row(r).transpose();
        for (int l = 1; l <= q && r - l >= 0; ++l) {
            acc.noalias() += stacked[j].middleCols((l - 1) * p, p) * y.row(r - l).transpose();
        }
        y.row(r) = acc.transpose();
    }
    if (!y.allFinite()) throw NumericError("simulated series diverged");
    return Simulation{TimeSeries(y.bottomRows(T)), e.bottomRows(T), model, {}, {}};
}

}  // namespace

Simulation simulate_model(const PiecewiseVarModel& model, int T, int skip, std::uint64_t seed)
{
    model.validate(T);
    return run_recursion(model, T, skip, seed);
}

Simulation simulate(const GenerationSpec& spec)
{
    spec.validate();
    const int m = spec.segment_count();
    const int p = spec.p;
    std::vector<TransitionSet> segments;
    std::vector<Matrix> lowrank, sparse;

    if (spec.transitions) {
        segments = *spec.transitions;
        if (static_cast<int>(segments.size()) != m) throw ConfigError("one transition set per segment");
    } else if (spec.method == Method::sparse) {
        segments = gen_sparse_transitions(spec);
    } else if (spec.method == Method::group_sparse) {
        segments = gen_group_sparse_transitions(spec);
    } else {
        const auto s_sets = gen_sparse_transitions(spec);
        auto ratio = [&](int j) {
            if (spec.info_ratio.empty()) return 1.0;
            return spec.info_ratio.size() == 1 ? spec.info_ratio[0] : spec.info_ratio.at(j);
        };
        auto rank_of = [&](int j) { return spec.rank.size() == 1 ? spec.rank[0] : spec.rank.at(j); };
        if (spec.method == Method::fixed_lowrank_sparse) {
            for (int j = 1; j < m; ++j)
                if (rank_of(j) != rank_of(0)) throw ConfigError("fixed low-rank generation needs equal ranks");
            auto rng = make_stream(spec.seed, lowrank_stream);
            const Matrix l0 = gen_lowrank_component(p, rank_of(0), spec.singular_vals, rng);
            const Matrix l = apply_info_ratio(l0, s_sets[0].lags[0], ratio(0));
            // One common factor keeps the low-rank part identical across segments.
            double c = 1.0;
            for (int j = 0; j < m; ++j) {
                c = std::min(c, stabilizing_factor(TransitionSet({l + s_sets[j].lags[0]}), spec.spectral_radius));
            }
            for (int j = 0; j < m; ++j) {
                lowrank.push_back(c * l);
                sparse.push_back(c * s_sets[j].lags[0]);
                segments.push_back(TransitionSet({lowrank.back() + sparse.back()}));
            }
        } else {
            for (int j = 0; j < m; ++j) {
                auto rng = make_stream(spec.seed, lowrank_stream + 1 + j);
                const Matrix l0 = gen_lowrank_component(p, rank_of(j), spec.singular_vals, rng);
                const Matrix l = apply_info_ratio(l0, s_sets[j].lags[0], ratio(j));
                const double c = stabilizing_factor(TransitionSet({l + s_sets[j].lags[0]}), spec.spectral_radius);
                lowrank.push_back(c * l);
                sparse.push_back(c * s_sets[j].lags[0]);
                segments.push_back(TransitionSet({lowrank.back() + sparse.back()}));
            }
        }
    }
    for (auto& s : segments) {
        if (s.dim() != p) throw ConfigError("transition matrices must be p x p");
        s = stabilize(s, spec.spectral_radius);
        if (companion_spectral_radius(s) >= spec.spectral_radius) {
            throw NumericError("segment still unstable after stabilization");
        }
    }

    PiecewiseVarModel model;
    model.break_points.assign(spec.break_points.begin(), spec.break_points.end() - 1);
    model.segments = std::move(segments);
    for (int j = 0; j < m; ++j) {
        model.noise_scales.push_back(spec.noise_scales.size() == 1 ? spec.noise_scales[0]
                                                                   : spec.noise_scales[j]);
    }
    Simulation out = run_recursion(model, spec.T, spec.skip, spec.seed);
    out.lowrank = std::move(lowrank);
    out.sparse = std::move(sparse);
    return out;
}

}  // namespace varseg::datagen
