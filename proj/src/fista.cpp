#include "varseg/fista.hpp"

#include "varseg/prox.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace varseg::solvers {

ProxOperator zero_prox()
{
    return {[](const Matrix& v, double) { return v; }, [](const Matrix&) { return 0.0; }};
}

ProxOperator l1_prox(double lam)
{
    return {[lam](const Matrix& v, double step) { return soft_threshold(v, lam * step); },
            [lam](const Matrix& x) { return lam * x.cwiseAbs().sum(); }};
}

ProxOperator nuclear_prox(double mu)
{
    return {[mu](const Matrix& v, double step) { return singular_value_threshold(v, mu * step); },
            [mu](const Matrix& x) { return mu == 0.0 ? 0.0 : mu * nuclear_norm(x); }};
}

ProxOperator group_prox(const GroupStructure& groups, double lam)
{
    return {[groups, lam](const Matrix& v, double step) -> Matrix {
                return groups.prox(v.col(0), lam * step);
            },
            [groups, lam](const Matrix& x) { return lam * groups.penalty(x.col(0)); }};
}

FistaResult fista_minimize(const SmoothFn& smooth, const ProxOperator& prox, Matrix init,
                           const FistaOptions& options)
{
    if (options.tol <= 0.0 || options.max_iter < 1) {
        throw ConfigError("fista needs tol > 0 and max_iter >= 1");
    }
    const bool backtrack = options.step.kind == StepRule::Kind::backtracking;
    double step = options.step.initial_step;

    FistaResult result;
    Matrix x = std::move(init);
    double fx = smooth(x, nullptr);
    double obj_x = fx + prox.value(x);
    if (!std::isfinite(obj_x)) throw NumericError("fista: non-finite objective at the initial point");
    if (options.record_objective) result.objective.push_back(obj_x);

    Matrix y = x;
    Matrix grad;
    double t = 1.0;
    for (int it = 1; it <= options.max_iter; ++it) {
        result.iterations = it;
        const double fy = smooth(y, &grad);
        Matrix z;
        double fz = 0.0;
        for (int tries = 0;; ++tries) {
            z = prox.apply(y - step * grad, step);
            fz = smooth(z, nullptr);
            if (!backtrack) break;
            const Matrix d = z - y;
            const double model = fy + (grad.array() * d.array()).sum() + d.squaredNorm() / (2.0 * step);
            if (fz <= model + 1e-12 * std::max(1.0, std::abs(model)) || tries > 60) break;
            step *= options.step.shrink;
        }
        if (!z.allFinite() || !std::isfinite(fz)) {
            throw NumericError("fista diverged (non-finite iterate) at iteration " + std::to_string(it));
        }
        const double obj_z = fz + prox.value(z);
        const double change = (z - x).norm() / std::max(1.0, x.norm());

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (obj_z <= obj_x) {
            y = z + ((t - 1.0) / t_next) * (z - x);
            x = std::move(z);
            obj_x = obj_z;
        } else {
            // Monotone variant: keep x, extrapolate towards the rejected point.
            y = x + (t / t_next) * (z - x);
        }
        t = t_next;
        if (options.record_objective) result.objective.push_back(obj_x);
        if (change < options.tol) {
            result.converged = true;
            break;
        }
    }
    result.solution = std::move(x);
    return result;
}

double largest_eigenvalue_sym(const Matrix& m)
{
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

GramLoss::GramLoss(const Matrix& x, const Matrix& y)
    : gram_(x.transpose() * x), cross_(x.transpose() * y), yy_(y.squaredNorm()),
      n_(static_cast<double>(x.rows()))
{
    if (x.rows() != y.rows()) throw ConfigError("design and response row counts differ");
    if (x.rows() < 1) throw ConfigError("least-squares problem needs at least one row");
}

GramLoss::GramLoss(Matrix gram, Matrix cross, double yy, double n)
    : gram_(std::move(gram)), cross_(std::move(cross)), yy_(yy), n_(n)
{
}

double GramLoss::value(const Matrix& b) const
{
    const double quad = (b.array() * (gram_ * b).array()).sum();
    const double lin = (b.array() * cross_.array()).sum();
    return std::max(0.0, quad - 2.0 * lin + yy_) / n_;
}

Matrix GramLoss::gradient(const Matrix& b) const { return (2.0 / n_) * (gram_ * b - cross_); }

double GramLoss::operator()(const Matrix& b, Matrix* grad) const
{
    const Matrix gb = gram_ * b;
    if (grad) *grad = (2.0 / n_) * (gb - cross_);
    const double quad = (b.array() * gb.array()).sum();
    const double lin = (b.array() * cross_.array()).sum();
    return std::max(0.0, quad - 2.0 * lin + yy_) / n_;
}

double GramLoss::lipschitz() const { return 2.0 / n_ * largest_eigenvalue_sym(gram_); }

namespace {

FistaOptions with_lipschitz(FistaOptions options, double lipschitz)
{
    if (options.estimate_lipschitz && lipschitz > 0.0) options.step.initial_step = 1.0 / lipschitz;
    return options;
}

}  // namespace

FistaResult fista(const ProxProblem& problem, const ProxOperator& prox, const Matrix* init)
{
    const GramLoss loss(problem.design, problem.response);
    const FistaOptions options = with_lipschitz(problem.options, loss.lipschitz());
    Matrix x0 = init ? *init : Matrix::Zero(problem.design.cols(), problem.response.cols());
    return fista_minimize(std::cref(loss), prox, std::move(x0), options);
}

Matrix lasso_regression(const Matrix& x, const Matrix& y, double lam, const FistaOptions& options,
                        const Matrix* init)
{
    if (lam < 0.0) throw ConfigError("lasso weight must be non-negative");
    return fista(ProxProblem{x, y, options}, l1_prox(lam), init).solution;
}

Matrix group_lasso_regression(const Matrix& x, const Matrix& y, double lam,
                              const GroupStructure& groups, const FistaOptions& options)
{
    if (lam < 0.0) throw ConfigError("group lasso weight must be non-negative");
    const GramLoss loss(x, y);
    const auto d = x.cols();
    const auto m = y.cols();
    if (groups.coef_count() != d * m) throw ConfigError("grouping does not match coefficient count");
    SmoothFn smooth = [&](const Matrix& latent, Matrix* grad) {
        const Vector coef = groups.to_coef(latent.col(0));
        const Eigen::Map<const Matrix> b(coef.data(), d, m);
        Matrix g;
        const double v = loss(b, grad ? &g : nullptr);
        if (grad) {
            const Eigen::Map<const Vector> gv(g.data(), g.size());
            *grad = groups.to_latent_gradient(gv);
        }
        return v;
    };
    // Latent copies can sum several times onto one coefficient.
    double max_cover = 1.0;
    if (groups.overlapping()) {
        Vector ones = Vector::Ones(groups.latent_size());
        max_cover = groups.to_coef(ones).maxCoeff();
    }
    const FistaOptions opts = with_lipschitz(options, loss.lipschitz() * max_cover);
    auto res = fista_minimize(smooth, group_prox(groups, lam),
                              Matrix::Zero(groups.latent_size(), 1), opts);
    const Vector coef = groups.to_coef(res.solution.col(0));
    return Eigen::Map<const Matrix>(coef.data(), d, m);
}

Matrix nuclear_regression(const Matrix& x, const Matrix& y, double mu, const FistaOptions& options)
{
    if (mu < 0.0) throw ConfigError("nuclear weight must be non-negative");
    return fista(ProxProblem{x, y, options}, nuclear_prox(mu)).solution;
}

LowRankSparse lowrank_sparse_regression(const Matrix& x, const Matrix& y, double lam, double mu,
                                        const FistaOptions& options)
{
    return lowrank_sparse_regression(GramLoss(x, y), lam, mu, options);
}

LowRankSparse lowrank_sparse_regression(const GramLoss& loss, double lam, double mu, const FistaOptions& options,
                                        const LowRankSparse* warm)
{
    if (lam < 0.0 || mu < 0.0) throw ConfigError("low-rank plus sparse weights must be non-negative");
    const auto d = loss.gram().rows();
    const auto m = loss.cross().cols();
    // Stacked variable [B_L; B_S] sharing the smooth gradient.
    SmoothFn smooth = [&](const Matrix& z, Matrix* grad) {
        const Matrix b = z.topRows(d) + z.bottomRows(d);
        Matrix g;
        const double v = loss(b, grad ? &g : nullptr);
        if (grad) {
            grad->resize(2 * d, m);
            grad->topRows(d) = g;
            grad->bottomRows(d) = g;
        }
        return v;
    };
    ProxOperator prox{
        [lam, mu, d](const Matrix& v, double step) {
            Matrix out(v.rows(), v.cols());
            out.topRows(d) = singular_value_threshold(v.topRows(d), mu * step);
            out.bottomRows(d) = soft_threshold(v.bottomRows(d), lam * step);
            return out;
        },
        [lam, mu, d](const Matrix& z) {
            return (mu == 0.0 ? 0.0 : mu * nuclear_norm(z.topRows(d))) +
                   lam * z.bottomRows(d).cwiseAbs().sum();
        }};
    Matrix init = Matrix::Zero(2 * d, m);
    if (warm && warm->lowrank.rows() == m && warm->lowrank.cols() == d) {
        init.topRows(d) = warm->lowrank.transpose();
        init.bottomRows(d) = warm->sparse.transpose();
    }
    const FistaOptions opts = with_lipschitz(options, 2.0 * loss.lipschitz());
    auto res = fista_minimize(smooth, prox, std::move(init), opts);
    LowRankSparse out;
    out.lowrank = res.solution.topRows(d).transpose();
    out.sparse = res.solution.bottomRows(d).transpose();
    out.loss = loss.value(res.solution.topRows(d) + res.solution.bottomRows(d));
    out.iterations = res.iterations;
    return out;
}

double sse(const Matrix& x, const Matrix& y, const Matrix& b) { return (y - x * b).squaredNorm(); }

}  // namespace varseg::solvers
