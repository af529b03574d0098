#include "varseg/tbss.hpp"

#include "varseg/groups.hpp"
#include "varseg/parallel.hpp"
#include "varseg/prox.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace varseg::tbss {

using solvers::FistaOptions;
using solvers::ProxOperator;
using solvers::SmoothFn;

void TbssConfig::validate() const
{
    if (q < 1) throw ConfigError("lag q must be at least 1");
    if (penalty == PenaltyKind::lowrank_sparse) {
        throw ConfigError("the time-varying low-rank penalty belongs to lstsp, not tbss");
    }
    if (penalty == PenaltyKind::group_sparse && !grouping) {
        throw ConfigError("group penalty needs a grouping");
    }
    if (penalty == PenaltyKind::fixed_lowrank_sparse && (!mu || *mu <= 0.0)) {
        throw ConfigError("fixed low-rank penalty needs mu > 0");
    }
    auto positive = [](const std::vector<double>& g, const char* name) {
        for (double v : g) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " values must be positive");
        }
    };
    positive(lambda1_grid, "lambda1 grid");
    positive(lambda2_grid, "lambda2 grid");
    if (an_grid) {
        if (an_grid->empty()) throw ConfigError("a_n grid is empty");
        for (int a : *an_grid) {
            if (a < 1) throw ConfigError("a_n values must be at least 1");
        }
    }
    if (omega && *omega < 0.0) throw ConfigError("omega must be non-negative");
    if (eta && *eta < 0.0) throw ConfigError("eta must be non-negative");
    if (tol <= 0.0 || max_iter < 1 || lowrank_rounds < 1) throw ConfigError("invalid solver controls");
    if (refit_radius && *refit_radius < 1) throw ConfigError("refit radius must be positive");
    if (refit_radius && block_size && *refit_radius < *block_size) {
        throw ConfigError("refit radius must be at least the block size");
    }
    if (refit_lambda && *refit_lambda < 0.0) throw ConfigError("refit lambda must be non-negative");
}

BlockProblem build_block_problem(const TimeSeries& data, int q, const BlockPartition& blocks,
                                 const std::set<int>& excluded)
{
    const int T = data.length();
    const int p = data.dim();
    const LaggedDesign all = stack_lag_rows(data, q);
    BlockProblem out;
    out.blocks = blocks;
    out.p = p;
    out.q = q;
    const int k = blocks.block_count();
    out.gram.assign(k, Matrix::Zero(p * q, p * q));
    out.cross.assign(k, Matrix::Zero(p * q, p));
    out.yy.assign(k, 0.0);
    out.counts.assign(k, 0);
    for (int b = 0; b < k; ++b) {
        const int lo = std::max(blocks.endpoints[b], q + 1);
        const int hi = std::min(blocks.endpoints[b + 1], T + 1);
        std::vector<int> rows;
        for (int t = lo; t < hi; ++t) {
            if (!excluded.count(t)) rows.push_back(t - q - 1);
        }
        if (rows.empty()) continue;
        Matrix x(rows.size(), p * q);
        Matrix y(rows.size(), p);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x.row(i) = all.design.row(rows[i]);
            y.row(i) = all.response.row(rows[i]);
        }
        out.gram[b].noalias() = x.transpose() * x;
        out.cross[b].noalias() = x.transpose() * y;
        out.yy[b] = y.squaredNorm();
        out.counts[b] = static_cast<int>(rows.size());
        out.n += out.counts[b];
    }
    if (out.n == 0) throw ConfigError("no responses left in the block problem");
    return out;
}

namespace {

// Step 1 variable: column b of Z is vec(B_b) of the pq x p coefficient
// matrix B_b = Phi_b'; row r is one coefficient's chain across blocks.
Matrix column_to_b(const Matrix& z, int b, int pq, int p) { return Eigen::Map<const Matrix>(z.col(b).data(), pq, p); }

double block_lipschitz(const BlockProblem& pr)
{
    double lip = 0.0;
    for (int b = 0; b < pr.block_count(); ++b) {
        if (pr.counts[b] > 0) lip = std::max(lip, solvers::largest_eigenvalue_sym(pr.gram[b]));
    }
    return 2.0 / pr.n * lip;
}

// Loss (1/n) sum_b ||Y_b - X_b (B_b + shift)||^2 in the column layout.
SmoothFn block_loss(const BlockProblem& pr, const Matrix* shift)
{
    const int pq = pr.p * pr.q;
    const int p = pr.p;
    const double n = pr.n;
    return [&pr, shift, pq, p, n](const Matrix& z, Matrix* grad) {
        if (grad) grad->resize(z.rows(), z.cols());
        double value = 0.0;
        for (int b = 0; b < pr.block_count(); ++b) {
            if (pr.counts[b] == 0) {
                if (grad) grad->col(b).setZero();
                continue;
            }
            Matrix coef = column_to_b(z, b, pq, p);
            if (shift) coef += *shift;
            const Matrix gb = pr.gram[b] * coef;
            value += pr.yy[b] - 2.0 * (coef.array() * pr.cross[b].array()).sum() +
                     (coef.array() * gb.array()).sum();
            if (grad) {
                const Matrix g = (2.0 / n) * (gb - pr.cross[b]);
                grad->col(b) = Eigen::Map<const Vector>(g.data(), g.size());
            }
        }
        return value / n;
    };
}

// Group shrinkage in coefficient space. Groups are applied smallest first,
// which is the exact prox for disjoint or nested (tree) structures.
struct CoefGroups {
    std::vector<std::vector<int>> groups;

    CoefGroups() = default;
    CoefGroups(const Grouping& grouping, int p, int q)
        : groups(solvers::coefficient_groups(grouping, p, q))
    {
        std::stable_sort(groups.begin(), groups.end(),
                         [](const auto& a, const auto& b) { return a.size() < b.size(); });
    }

    void shrink(Eigen::Ref<Vector> v, double thr) const
    {
        for (const auto& g : groups) {
            double norm = 0.0;
            for (int i : g) norm += v[i] * v[i];
            norm = std::sqrt(norm);
            const double scale = norm > thr ? 1.0 - thr / norm : 0.0;
            for (int i : g) v[i] *= scale;
        }
    }

    double penalty(const Eigen::Ref<const Vector>& v) const
    {
        double total = 0.0;
        for (const auto& g : groups) {
            double norm = 0.0;
            for (int i : g) norm += v[i] * v[i];
            total += std::sqrt(norm);
        }
        return total;
    }
};

double total_variation(const Matrix& z)
{
    if (z.cols() < 2) return 0.0;
    return (z.rightCols(z.cols() - 1) - z.leftCols(z.cols() - 1)).cwiseAbs().sum();
}

ProxOperator fused_prox(double lambda1, double lambda2, const CoefGroups* groups)
{
    if (!groups) {
        return {[lambda1, lambda2](const Matrix& v, double step) {
                    Matrix out(v.rows(), v.cols());
                    for (Eigen::Index r = 0; r < v.rows(); ++r) {
                        const Vector row = v.row(r).transpose();
                        out.row(r) = solvers::sparse_fused_prox(row, step * lambda2, step * lambda1).transpose();
                    }
                    return out;
                },
                [lambda1, lambda2](const Matrix& z) {
                    return lambda1 * total_variation(z) + lambda2 * z.cwiseAbs().sum();
                }};
    }
    return {[lambda1, lambda2, groups](const Matrix& v, double step) {
                auto tv = [&](const Matrix& m) {
                    Matrix out(m.rows(), m.cols());
                    for (Eigen::Index r = 0; r < m.rows(); ++r) {
                        const Vector row = m.row(r).transpose();
                        out.row(r) = solvers::fused_chain_prox(row, step * lambda1).transpose();
                    }
                    return out;
                };
                auto grp = [&](const Matrix& m) {
                    Matrix out = m;
                    for (Eigen::Index c = 0; c < out.cols(); ++c) groups->shrink(out.col(c), step * lambda2);
                    return out;
                };
                return solvers::dykstra_prox(v, tv, grp, 1e-6, 50);
            },
            [lambda1, lambda2, groups](const Matrix& z) {
                double g = 0.0;
                for (Eigen::Index c = 0; c < z.cols(); ++c) g += groups->penalty(z.col(c));
                return lambda1 * total_variation(z) + lambda2 * g;
            }};
}

FistaOptions step1_options(const FitSettings& s, double lipschitz)
{
    FistaOptions o;
    o.tol = s.tol;
    o.max_iter = s.max_iter;
    if (lipschitz > 0.0) o.step.initial_step = 1.0 / lipschitz;
    return o;
}

// Pooled statistics of all blocks.
solvers::GramLoss pooled_loss(const BlockProblem& pr, const Matrix* sparse_by_block = nullptr)
{
    const int pq = pr.p * pr.q;
    Matrix gram = Matrix::Zero(pq, pq);
    Matrix cross = Matrix::Zero(pq, pr.p);
    double yy = 0.0;
    for (int b = 0; b < pr.block_count(); ++b) {
        gram += pr.gram[b];
        if (sparse_by_block) {
            const Matrix s = column_to_b(*sparse_by_block, b, pq, pr.p);
            cross += pr.cross[b] - pr.gram[b] * s;
            yy += pr.yy[b] - 2.0 * (s.array() * pr.cross[b].array()).sum() +
                  (s.array() * (pr.gram[b] * s).array()).sum();
        } else {
            cross += pr.cross[b];
            yy += pr.yy[b];
        }
    }
    return solvers::GramLoss(gram, cross, yy, pr.n);
}

// Nuclear step of the fixed low-rank fit: L' (pq x p) given the sparse blocks.
Matrix lowrank_step(const BlockProblem& pr, const Matrix& z, double mu, const Matrix& init, const FitSettings& s)
{
    const solvers::GramLoss loss = pooled_loss(pr, &z);
    FistaOptions o = step1_options(s, loss.lipschitz());
    o.tol = std::min(s.tol, 1e-4);
    o.max_iter = std::max(s.max_iter, 200);
    return solvers::fista_minimize(std::cref(loss), solvers::nuclear_prox(mu / pr.n), init, o).solution;
}

}  // namespace

BlockFit block_fused_fit(const BlockProblem& problem, double lambda1, double lambda2, const FitSettings& settings,
                         const BlockFit* warm)
{
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("block fit weights must be non-negative");
    const int p = problem.p;
    const int pq = p * problem.q;
    const int k = problem.block_count();

    std::optional<CoefGroups> groups;
    if (settings.penalty == PenaltyKind::group_sparse) {
        if (!settings.grouping) throw ConfigError("group penalty needs a grouping");
        groups.emplace(*settings.grouping, p, problem.q);
    }
    const ProxOperator prox = fused_prox(lambda1, lambda2, groups ? &*groups : nullptr);
    const FistaOptions options = step1_options(settings, block_lipschitz(problem));

    Matrix z = Matrix::Zero(static_cast<Eigen::Index>(pq) * p, k);
    if (warm && static_cast<int>(warm->sparse.size()) == k) {
        for (int b = 0; b < k; ++b) z.col(b) = Eigen::Map<const Vector>(warm->sparse[b].transpose().eval().data(), pq * p);
    }

    BlockFit fit;
    fit.lambda1 = lambda1;
    fit.lambda2 = lambda2;
    fit.variable_count = static_cast<long long>(k) * p * pq;

    if (settings.penalty == PenaltyKind::fixed_lowrank_sparse) {
        Matrix lt = Matrix::Zero(pq, p);
        if (warm && warm->lowrank) lt = warm->lowrank->transpose();
        for (int round = 0; round < settings.lowrank_rounds; ++round) {
            const auto res = solvers::fista_minimize(block_loss(problem, &lt), prox, z, options);
            z = res.solution;
            fit.iterations += res.iterations;
            lt = lowrank_step(problem, z, settings.mu, lt, settings);
        }
        fit.lowrank = lt.transpose();
    } else {
        const auto res = solvers::fista_minimize(block_loss(problem, nullptr), prox, z, options);
        z = res.solution;
        fit.iterations = res.iterations;
    }

    fit.sparse.reserve(k);
    fit.phi.reserve(k);
    for (int b = 0; b < k; ++b) {
        fit.sparse.push_back(column_to_b(z, b, pq, p).transpose());
        fit.phi.push_back(fit.lowrank ? Matrix(fit.sparse.back() + *fit.lowrank) : fit.sparse.back());
    }
    return fit;
}

CandidateSet extract_candidates(const BlockFit& fit, const BlockPartition& blocks)
{
    double scale = 1.0;
    for (const auto& m : fit.phi) scale = std::max(scale, max_abs(m));
    const double thr = 1e-6 * scale;
    CandidateSet out;
    for (int b = 1; b < static_cast<int>(fit.sparse.size()); ++b) {
        Matrix theta = fit.sparse[b] - fit.sparse[b - 1];
        if (max_abs(theta) > thr) {
            out.points.push_back(blocks.endpoints[b]);
            out.block_indices.push_back(b);
            out.theta_hats.push_back(std::move(theta));
        }
    }
    return out;
}

namespace {

// Pooled fit (all blocks share one coefficient matrix) with sparsity weight
// k * lambda2, the constrained optimum when every difference is zero.
BlockFit pooled_fit(const BlockProblem& pr, double lambda2, const FitSettings& settings)
{
    const int p = pr.p;
    const int pq = p * pr.q;
    const int k = pr.block_count();
    const double w = k * lambda2;
    FitSettings tight = settings;
    tight.tol = 1e-7;
    tight.max_iter = 2000;

    std::optional<CoefGroups> groups;
    if (settings.penalty == PenaltyKind::group_sparse) groups.emplace(*settings.grouping, p, pr.q);
    ProxOperator prox;
    if (groups) {
        const CoefGroups* g = &*groups;
        prox = {[g, w](const Matrix& v, double step) {
                    Matrix out = v;
                    Eigen::Map<Vector> flat(out.data(), out.size());
                    g->shrink(flat, w * step);
                    return out;
                },
                [g, w](const Matrix& x) { return w * g->penalty(Eigen::Map<const Vector>(x.data(), x.size())); }};
    } else {
        prox = solvers::l1_prox(w);
    }

    Matrix s = Matrix::Zero(pq, p);
    Matrix lt = Matrix::Zero(pq, p);
    const int rounds = settings.penalty == PenaltyKind::fixed_lowrank_sparse ? 10 : 1;
    for (int round = 0; round < rounds; ++round) {
        solvers::GramLoss loss = pooled_loss(pr);
        SmoothFn smooth = [&loss, &lt](const Matrix& b, Matrix* grad) { return loss(b + lt, grad); };
        s = solvers::fista_minimize(smooth, prox, s, step1_options(tight, loss.lipschitz())).solution;
        if (settings.penalty == PenaltyKind::fixed_lowrank_sparse) {
            Matrix zs(pq * p, k);
            for (int b = 0; b < k; ++b) zs.col(b) = Eigen::Map<const Vector>(s.data(), s.size());
            lt = lowrank_step(pr, zs, settings.mu, lt, tight);
        }
    }
    BlockFit fit;
    fit.lambda1 = std::numeric_limits<double>::infinity();
    fit.lambda2 = lambda2;
    for (int b = 0; b < k; ++b) {
        fit.sparse.push_back(s.transpose());
        fit.phi.push_back((s + lt).transpose());
    }
    if (settings.penalty == PenaltyKind::fixed_lowrank_sparse) fit.lowrank = lt.transpose();
    return fit;
}

}  // namespace

double lambda1_max(const BlockProblem& problem, double lambda2, const FitSettings& settings)
{
    const BlockFit pooled = pooled_fit(problem, lambda2, settings);
    const int k = problem.block_count();
    const Matrix b = pooled.phi.front().transpose();
    std::vector<Matrix> grads(k);
    Matrix mean = Matrix::Zero(b.rows(), b.cols());
    for (int j = 0; j < k; ++j) {
        grads[j] = (2.0 / problem.n) * (problem.gram[j] * b - problem.cross[j]);
        mean += grads[j];
    }
    mean /= k;
    // Dual variable of difference j is the suffix sum of the centred block
    // gradients; the certificate needs |u_j| <= lambda1 everywhere.
    Matrix suffix = Matrix::Zero(b.rows(), b.cols());
    double best = 0.0;
    for (int j = k - 1; j >= 1; --j) {
        suffix += grads[j] - mean;
        best = std::max(best, max_abs(suffix));
    }
    return best;
}

std::vector<int> validation_times(const BlockPartition& blocks, std::uint64_t seed)
{
    const int k = blocks.block_count();
    if (k < 5) throw ConfigError("cross-validation needs at least 5 blocks");
    const int spacing = 5;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> start(0, spacing - 1);
    std::vector<int> out;
    for (int b = start(rng); b < k; b += spacing) out.push_back(blocks.endpoints[b + 1] - 1);
    return out;
}

namespace {

double prediction_error(const TimeSeries& data, int q, const BlockPartition& blocks, const std::vector<int>& times,
                        const BlockFit& fit)
{
    double total = 0.0;
    for (int t : times) {
        const LaggedDesign d = lagged_window(data, q, t, t + 1);
        const Matrix& phi = fit.phi[blocks.block_of(t)];
        total += (d.response - d.design * phi.transpose()).squaredNorm();
    }
    return total / (static_cast<double>(times.size()) * data.dim());
}

std::vector<double> log_grid(double hi, double ratio, int count)
{
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(hi * std::pow(ratio, static_cast<double>(i) / (count - 1)));
    return out;
}

}  // namespace

CvResult cross_validate_lambdas(const TimeSeries& data, const BlockPartition& blocks, const TbssConfig& config,
                                const FitSettings& settings)
{
    const int p = data.dim();
    const int q = config.q;
    const int n = data.length() - q;
    CvResult out;
    out.lambda2_grid = config.lambda2_grid;
    if (out.lambda2_grid.empty()) {
        for (double c : {1.0, 0.1, 0.01}) out.lambda2_grid.push_back(c * std::sqrt(std::log(p) / n));
    }
    if (config.lambda1_grid.size() == 1 && out.lambda2_grid.size() == 1) {
        out.lambda1 = config.lambda1_grid.front();
        out.lambda2 = out.lambda2_grid.front();
        out.lambda1_grid = config.lambda1_grid;
        return out;
    }

    out.validation_times = validation_times(blocks, config.cv_seed);
    if (out.validation_times.empty()) throw ConfigError("empty validation set");
    const std::set<int> held(out.validation_times.begin(), out.validation_times.end());
    const BlockProblem train = build_block_problem(data, q, blocks, held);
    const double eps = blocks.block_size < 2 * p ? 1e-3 : 1e-4;

    double best = std::numeric_limits<double>::infinity();
    out.mspe.resize(out.lambda2_grid.size());
    for (std::size_t i = 0; i < out.lambda2_grid.size(); ++i) {
        const double l2 = out.lambda2_grid[i];
        std::vector<double> grid = config.lambda1_grid;
        if (grid.empty()) {
            const double top = lambda1_max(train, l2, settings);
            grid = log_grid(top > 0.0 ? top : 1e-8, eps, 10);
        }
        std::sort(grid.rbegin(), grid.rend());
        std::optional<BlockFit> prev;
        for (double l1 : grid) {
            BlockFit fit = block_fused_fit(train, l1, l2, settings, prev ? &*prev : nullptr);
            const double err = prediction_error(data, q, blocks, out.validation_times, fit);
            out.mspe[i].push_back(err);
            if (err < best) {
                best = err;
                out.lambda1 = l1;
                out.lambda2 = l2;
            }
            prev = std::move(fit);
        }
        out.lambda1_grid = grid;
    }
    if (!std::isfinite(best)) throw NumericError("cross-validation produced no finite prediction error");
    return out;
}

namespace {

// Penalized fit on responses [t_begin, t_end); returns the coefficients.
Matrix penalized_fit(const LaggedDesign& d, const Matrix& y, int p, int q, double eta, const LocalModel& model)
{
    FistaOptions o;
    o.tol = model.tol;
    o.max_iter = model.max_iter;
    if (model.penalty == PenaltyKind::group_sparse) {
        if (!model.grouping) throw ConfigError("group screening needs a grouping");
        const solvers::GroupStructure gs(solvers::coefficient_groups(*model.grouping, p, q),
                                         static_cast<int>(d.design.cols() * y.cols()));
        return solvers::group_lasso_regression(d.design, y, eta, gs, o);
    }
    return solvers::lasso_regression(d.design, y, eta, o);
}

LaggedDesign residual_window(const TimeSeries& data, int q, int t_begin, int t_end, const LocalModel& model)
{
    LaggedDesign d = lagged_window(data, q, t_begin, t_end);
    if (model.lowrank) d.response -= d.design * model.lowrank->transpose();
    return d;
}

}  // namespace

double local_sse(const TimeSeries& data, int q, int t_begin, int t_end, double eta, const LocalModel& model)
{
    const LaggedDesign d = residual_window(data, q, t_begin, t_end, model);
    const Matrix b = penalized_fit(d, d.response, data.dim(), q, eta, model);
    return solvers::sse(d.design, d.response, b);
}

std::vector<std::optional<LocalJump>> local_jumps(const TimeSeries& data, int q, const std::vector<int>& candidates,
                                                  int a, double eta, const LocalModel& model)
{
    if (a < 1) throw ConfigError("a_n must be at least 1");
    const int T = data.length();
    std::vector<std::optional<LocalJump>> out(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
        const int c = candidates[i];
        if (c - a < q + 1 || c + a > T + 1) return;
        out[i] = LocalJump{local_sse(data, q, c - a, c + a, eta, model), local_sse(data, q, c - a, c, eta, model),
                           local_sse(data, q, c, c + a, eta, model)};
    });
    return out;
}

std::vector<std::optional<double>> jump_values(const std::vector<std::optional<LocalJump>>& jumps)
{
    std::vector<std::optional<double>> out;
    out.reserve(jumps.size());
    for (const auto& j : jumps) out.push_back(j ? std::optional<double>(j->value()) : std::nullopt);
    return out;
}

std::vector<int> local_screen(const std::vector<int>& candidates, const std::vector<std::optional<double>>& jumps,
                              double omega)
{
    std::vector<int> out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (jumps[i] && *jumps[i] > omega) out.push_back(candidates[i]);
    }
    return out;
}

double lic_value(const std::vector<std::optional<double>>& jumps, const std::vector<double>& split_sse,
                 const std::vector<double>& merged_sse, unsigned mask, double omega)
{
    double total = 0.0;
    for (std::size_t i = 0; i < jumps.size(); ++i) {
        const bool in = (mask >> i) & 1u;
        if (!jumps[i]) {
            if (in) return std::numeric_limits<double>::infinity();
            continue;
        }
        total += in ? split_sse[i] + omega : merged_sse[i];
    }
    return total;
}

TwoMeans two_means_1d(std::vector<double> values)
{
    if (values.size() < 2) throw ConfigError("2-means needs at least two values");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + values[i];
        prefix_sq[i + 1] = prefix_sq[i] + values[i] * values[i];
    }
    auto wss = [&](std::size_t lo, std::size_t hi) {
        const double m = hi - lo;
        const double s = prefix[hi] - prefix[lo];
        return std::max(0.0, prefix_sq[hi] - prefix_sq[lo] - s * s / m);
    };
    const double total = wss(0, n);
    TwoMeans out;
    double best = std::numeric_limits<double>::infinity();
    std::size_t cut = 1;
    for (std::size_t i = 1; i < n; ++i) {
        const double w = wss(0, i) + wss(i, n);
        if (w < best) {
            best = w;
            cut = i;
        }
    }
    out.small_max = values[cut - 1];
    out.large_min = values[cut];
    out.threshold = 0.5 * (out.small_max + out.large_min);
    out.between_ratio = total > 0.0 ? (total - best) / total : 0.0;
    return out;
}

double default_eta(int a, int p) { return std::log(2.0 * a) * std::log(static_cast<double>(p)) / (2.0 * a); }

std::optional<double> reference_jump(const TimeSeries& data, int q, int a, double eta, const LocalModel& model)
{
    const int T = data.length();
    std::optional<double> out;
    for (const auto& j : local_jumps(data, q, {a + q + 1, T - a}, a, eta, model)) {
        if (j) out = out ? std::max(*out, j->value()) : j->value();
    }
    return out;
}

namespace {

std::vector<double> pooled_values(const std::vector<std::optional<double>>& jumps, double reference)
{
    std::vector<double> v;
    for (const auto& j : jumps) {
        if (j) v.push_back(*j);
    }
    v.push_back(reference);
    v.push_back(reference);
    return v;
}

}  // namespace

double select_omega(const std::vector<std::optional<double>>& jumps, std::optional<double> reference)
{
    const double inf = std::numeric_limits<double>::infinity();
    if (std::none_of(jumps.begin(), jumps.end(), [](const auto& j) { return j.has_value(); })) return inf;
    const double ref = reference.value_or(0.0);
    const std::vector<double> v = pooled_values(jumps, ref);
    const double vmax = *std::max_element(v.begin(), v.end());
    const TwoMeans km = two_means_1d(v);
    if (km.between_ratio > 0.67 && ref <= km.small_max) return km.threshold;
    return vmax;
}

double segmentation_bic(const TimeSeries& data, int q, const std::vector<int>& points, const LocalModel& model)
{
    const int T = data.length();
    const int p = data.dim();
    std::vector<int> cuts{q + 1};
    for (int t : points) {
        if (t > cuts.back() && t <= T) cuts.push_back(t);
    }
    cuts.push_back(T + 1);
    const int segments = static_cast<int>(cuts.size()) - 1;
    std::vector<double> rss(segments, 0.0);
    std::vector<long> df(segments, 0);
    parallel_for(segments, [&](std::size_t j) {
        const LaggedDesign d = residual_window(data, q, cuts[j], cuts[j + 1], model);
        const double nj = static_cast<double>(d.design.rows());
        const double eta = std::log(std::max(nj, 2.0)) * std::log(std::max(p, 2)) / nj;
        const Matrix b = penalized_fit(d, d.response, p, q, eta, model);
        rss[j] = solvers::sse(d.design, d.response, b);
        df[j] = static_cast<long>((b.array() != 0.0).count());
    });
    const double n = static_cast<double>(T - q);
    const double total_rss = std::accumulate(rss.begin(), rss.end(), 0.0);
    const double total_df = static_cast<double>(std::accumulate(df.begin(), df.end(), 0L));
    return n * p * std::log(std::max(total_rss, 1e-300) / (n * p)) + total_df * std::log(n);
}

double select_omega_bic(const TimeSeries& data, int q, const std::vector<int>& candidates,
                        const std::vector<std::optional<double>>& jumps, std::optional<double> reference,
                        const LocalModel& model)
{
    const double inf = std::numeric_limits<double>::infinity();
    if (std::none_of(jumps.begin(), jumps.end(), [](const auto& j) { return j.has_value(); })) return inf;
    const double ref = reference.value_or(0.0);
    const std::vector<double> all = pooled_values(jumps, ref);

    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < jumps.size(); ++i) {
        if (jumps[i]) remaining.push_back(i);
    }
    std::vector<int> selected_points;
    double selected_min = inf;
    double bic = segmentation_bic(data, q, {}, model);
    while (!remaining.empty()) {
        std::vector<double> v;
        for (std::size_t i : remaining) v.push_back(*jumps[i]);
        v.push_back(ref);
        v.push_back(ref);
        const TwoMeans km = two_means_1d(v);
        if (km.large_min <= km.small_max || ref > km.small_max) break;
        std::vector<int> trial = selected_points;
        std::vector<std::size_t> rest;
        double trial_min = selected_min;
        for (std::size_t i : remaining) {
            if (*jumps[i] > km.small_max) {
                trial.push_back(candidates[i]);
                trial_min = std::min(trial_min, *jumps[i]);
            } else {
                rest.push_back(i);
            }
        }
        std::sort(trial.begin(), trial.end());
        const double trial_bic = segmentation_bic(data, q, trial, model);
        if (trial_bic >= bic) break;
        bic = trial_bic;
        selected_points = std::move(trial);
        selected_min = trial_min;
        remaining = std::move(rest);
    }
    if (selected_points.empty()) return *std::max_element(all.begin(), all.end());
    double below = ref;
    for (std::size_t i : remaining) below = std::max(below, *jumps[i]);
    return 0.5 * (below + selected_min);
}

std::vector<int> an_grid_default(const TimeSeries& data, int q, const BlockPartition& blocks,
                                 const std::vector<int>& candidates, std::vector<std::string>* warnings)
{
    if (candidates.empty()) throw ConfigError("a_n grid needs at least one candidate");
    const int T = data.length();
    const int n = T - q + 1;
    const double mean_block = static_cast<double>(n) / blocks.block_count();
    const int lb = std::max(1, std::max(static_cast<int>(std::floor(mean_block)),
                                        static_cast<int>(std::floor(std::log(n) * std::log(data.dim())))));
    const int ub = std::min({10 * lb, candidates.front() - q - 1, T - q - candidates.back() - 1});
    if (ub < lb) {
        if (warnings) {
            warnings->push_back("a_n upper bound " + std::to_string(ub) + " below lower bound " + std::to_string(lb) +
                                ", using " + std::to_string(lb));
        }
        return {lb};
    }
    std::vector<int> grid;
    for (int i = 0; i < 5; ++i) grid.push_back(lb + static_cast<int>(std::lround((ub - lb) * i / 4.0)));
    return grid;
}

int stable_count_index(const std::vector<int>& counts)
{
    if (counts.empty()) throw ConfigError("no screening counts");
    for (std::size_t i = 0; i + 2 < counts.size(); ++i) {
        if (counts[i] == counts[i + 1] && counts[i + 1] == counts[i + 2]) return static_cast<int>(i);
    }
    return static_cast<int>(counts.size()) - 1;
}

std::vector<std::vector<int>> cluster_points(const std::vector<int>& sorted_points, int d)
{
    std::vector<std::vector<int>> out;
    for (int x : sorted_points) {
        if (out.empty() || x - out.back().front() > d) out.push_back({x});
        else out.back().push_back(x);
    }
    return out;
}

std::pair<int, double> split_scan(const TimeSeries& data, int q, int lo, int hi, const Matrix& left_phi,
                                  const Matrix& right_phi)
{
    const int T = data.length();
    const int b = std::max(lo, q + 1);
    const int e = std::min(hi, T + 1);
    if (e - b < 1 || hi - lo < 2) throw ConfigError("empty exhaustive-search interval");
    const LaggedDesign d = lagged_window(data, q, b, e);
    const Vector rl = (d.response - d.design * left_phi.transpose()).rowwise().squaredNorm();
    const Vector rr = (d.response - d.design * right_phi.transpose()).rowwise().squaredNorm();
    const int m = e - b;
    // cost(s) = sum of left residuals over [b, s) + right residuals over [s, e).
    std::vector<double> left_prefix(m + 1, 0.0), right_suffix(m + 1, 0.0);
    for (int i = 0; i < m; ++i) left_prefix[i + 1] = left_prefix[i] + rl[i];
    for (int i = m - 1; i >= 0; --i) right_suffix[i] = right_suffix[i + 1] + rr[i];
    int best_s = lo + 1;
    double best = std::numeric_limits<double>::infinity();
    for (int s = lo + 1; s < hi; ++s) {
        const int i = std::clamp(s - b, 0, m);
        const double cost = left_prefix[i] + right_suffix[i];
        if (cost < best) {
            best = cost;
            best_s = s;
        }
    }
    return {best_s, best};
}

std::vector<int> exhaustive_search(const TimeSeries& data, int q, const std::vector<int>& screened, int a,
                                   const BlockPartition& blocks, const std::vector<Matrix>& block_phi)
{
    if (screened.empty()) return {};
    const int T = data.length();
    const int k = blocks.block_count();
    std::vector<int> sorted = screened;
    std::sort(sorted.begin(), sorted.end());
    const auto clusters = cluster_points(sorted, 2 * a);
    const int m = static_cast<int>(clusters.size());

    std::vector<int> lo(m), hi(m);
    std::vector<std::pair<int, int>> span(m + 2);  // (min block, max block) per cluster, with sentinels
    span[0] = {0, 0};
    span[m + 1] = {k - 1, k - 1};
    for (int i = 0; i < m; ++i) {
        const auto& c = clusters[i];
        if (c.size() == 1) {
            lo[i] = std::max(c.front() - a, q);
            hi[i] = std::min(c.front() + a, T + 1);
        } else {
            lo[i] = c.front();
            hi[i] = c.back();
        }
        int bmin = k, bmax = -1;
        for (int bb = 1; bb < k; ++bb) {
            const int r = blocks.endpoints[bb];
            if (r > lo[i] && r < hi[i]) {
                bmin = std::min(bmin, bb);
                bmax = std::max(bmax, bb);
            }
        }
        if (bmax < 0) bmin = bmax = blocks.block_of(c.front());
        span[i + 1] = {bmin, bmax};
    }
    // w_i: block between cluster i-1 and cluster i, i = 0..m.
    std::vector<int> w(m + 1);
    for (int i = 0; i <= m; ++i) {
        w[i] = std::clamp(static_cast<int>(std::lround(0.5 * (span[i].second + span[i + 1].first))), 0, k - 1);
    }
    std::vector<int> out(m);
    parallel_for(m, [&](std::size_t i) {
        out[i] = split_scan(data, q, lo[i], hi[i], block_phi[w[i]], block_phi[w[i + 1]]).first;
    });
    std::sort(out.begin(), out.end());
    std::vector<int> unique;
    for (int t : out) {
        if (t <= q || t > T) continue;
        if (!unique.empty() && t - unique.back() <= 1) continue;
        unique.push_back(t);
    }
    return unique;
}

std::vector<Matrix> refit_segments(const TimeSeries& data, int q, const std::vector<int>& points, int radius,
                                   std::optional<double> rho, const std::optional<Matrix>& lowrank)
{
    const int T = data.length();
    const int p = data.dim();
    const int m = static_cast<int>(points.size());
    std::vector<std::pair<int, int>> ranges;  // responses [begin, end)
    int total = 0;
    for (int j = 0; j <= m; ++j) {
        const int begin = j == 0 ? q + 1 : points[j - 1] + radius + 1;
        const int end = j == m ? T + 1 : points[j] - radius;
        if (end <= begin) {
            throw SegmentError("segment " + std::to_string(j + 1) + " is empty after trimming radius " +
                               std::to_string(radius));
        }
        ranges.emplace_back(begin, end);
        total += end - begin;
    }
    const double rho_t = rho ? *rho : std::sqrt(std::log(static_cast<double>(p) * q) / total);
    FistaOptions o;
    o.tol = 1e-5;
    o.max_iter = 2000;
    std::vector<Matrix> out(m + 1);
    parallel_for(m + 1, [&](std::size_t j) {
        const auto [begin, end] = ranges[j];
        const LaggedDesign d = lagged_window(data, q, begin, end);
        Matrix y = d.response;
        if (lowrank) y -= d.design * lowrank->transpose();
        const double lam = rho_t * total / (end - begin);
        out[j] = solvers::lasso_regression(d.design, y, lam, o).transpose();
    });
    return out;
}

TbssOutput tbss_detect(const TimeSeries& data, const TbssConfig& config)
{
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    const int T = data.length();
    const int p = data.dim();
    const int q = config.q;
    if (p < 1) throw ConfigError("data has no columns");
    if (!data.values().allFinite()) throw ConfigError("data contains non-finite values");

    TbssOutput out;
    TbssDiagnostics& diag = out.diagnostics;
    diag.blocks = config.blocks ? blocks_from_endpoints(T, q, *config.blocks) : make_blocks(T, q, config.block_size);
    const BlockPartition& blocks = diag.blocks;
    if (T <= 2 * blocks.block_size) throw ConfigError("series must be longer than twice the block size");
    const int radius = config.refit_radius.value_or(blocks.block_size);
    if (radius < blocks.block_size) throw ConfigError("refit radius must be at least the block size");

    FitSettings settings;
    settings.penalty = config.penalty;
    settings.grouping = config.grouping;
    settings.mu = config.mu.value_or(0.0);
    settings.tol = config.tol;
    settings.max_iter = config.max_iter;
    settings.lowrank_rounds = config.lowrank_rounds;

    const CvResult cv = cross_validate_lambdas(data, blocks, config, settings);
    diag.lambda1 = cv.lambda1;
    diag.lambda2 = cv.lambda2;
    const BlockProblem full = build_block_problem(data, q, blocks);
    const BlockFit fit = block_fused_fit(full, cv.lambda1, cv.lambda2, settings);
    diag.variable_count = fit.variable_count;
    diag.candidates = extract_candidates(fit, blocks);

    LocalModel model;
    model.penalty = config.penalty == PenaltyKind::group_sparse ? PenaltyKind::group_sparse : PenaltyKind::sparse;
    model.grouping = config.grouping;
    model.lowrank = fit.lowrank;

    std::vector<int> final_points;
    const auto& cands = diag.candidates.points;
    if (!cands.empty()) {
        diag.an_grid = config.an_grid ? *config.an_grid : an_grid_default(data, q, blocks, cands, &diag.warnings);
        std::vector<std::vector<int>> screened_by_a;
        std::vector<double> etas, omegas;
        for (int a : diag.an_grid) {
            const double eta = config.eta.value_or(default_eta(a, std::max(p, 2)));
            const auto fits = local_jumps(data, q, cands, a, eta, model);
            const auto jumps = jump_values(fits);
            double omega = 0.0;
            if (config.omega) {
                omega = *config.omega;
            } else {
                const auto ref = reference_jump(data, q, a, eta, model);
                omega = config.use_bic_for_omega ? select_omega_bic(data, q, cands, jumps, ref, model)
                                                 : select_omega(jumps, ref);
            }
            screened_by_a.push_back(local_screen(cands, jumps, omega));
            diag.an_counts.push_back(static_cast<int>(screened_by_a.back().size()));
            etas.push_back(eta);
            omegas.push_back(omega);
        }
        const int idx = stable_count_index(diag.an_counts);
        diag.an = diag.an_grid[idx];
        diag.eta = etas[idx];
        diag.omega = omegas[idx];
        diag.screened = screened_by_a[idx];
        final_points = exhaustive_search(data, q, diag.screened, diag.an, blocks, fit.phi);
    }

    DetectionResult& res = out.result;
    res.change_points = final_points;
    res.lag = q;
    if (config.refit) {
        res.sparse_mats = refit_segments(data, q, final_points, radius, config.refit_lambda, fit.lowrank);
    } else {
        for (std::size_t j = 0; j <= final_points.size(); ++j) {
            const int begin = j == 0 ? q + 1 : final_points[j - 1];
            const int end = j == final_points.size() ? T + 1 : final_points[j];
            res.sparse_mats.push_back(fit.sparse[blocks.block_of((begin + end - 1) / 2)]);
        }
    }
    if (fit.lowrank) res.lowrank_mats = std::vector<Matrix>(res.sparse_mats.size(), *fit.lowrank);
    res.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    res.validate(T);
    return out;
}

}  // namespace varseg::tbss
