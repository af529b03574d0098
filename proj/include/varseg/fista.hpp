#pragma once

#include "varseg/core.hpp"
#include "varseg/groups.hpp"

#include <functional>
#include <vector>

namespace varseg::solvers {

/// Smooth part of a composite objective: returns f(x) and, when `grad` is
/// non-null, writes the gradient into it.
using SmoothFn = std::function<double(const Matrix& x, Matrix* grad)>;

/// Proximal part: prox(v, step) = argmin_w g(w) + ||w - v||^2 / (2 step).
struct ProxOperator {
    std::function<Matrix(const Matrix& v, double step)> apply;
    std::function<double(const Matrix& x)> value;
};

ProxOperator zero_prox();
ProxOperator l1_prox(double lam);
ProxOperator nuclear_prox(double mu);
/// Group lasso on the latent representation of `groups` (x has latent_size rows).
ProxOperator group_prox(const GroupStructure& groups, double lam);

struct StepRule {
    enum class Kind { fixed, backtracking };
    Kind kind = Kind::backtracking;
    double initial_step = 1.0;
    double shrink = 0.5;

    static StepRule fixed(double step) { return {Kind::fixed, step, 1.0}; }
    static StepRule backtracking(double initial = 1.0, double shrink = 0.5)
    {
        return {Kind::backtracking, initial, shrink};
    }
};

struct FistaOptions {
    StepRule step = StepRule::backtracking();
    double tol = 1e-4;
    int max_iter = 100;
    /// Lower the initial step to 1/L using a power-iteration estimate of the
    /// Lipschitz constant when the problem can provide one.
    bool estimate_lipschitz = true;
    bool record_objective = false;
};

struct FistaResult {
    Matrix solution;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective;  ///< filled when record_objective is set
};

/// Monotone FISTA (accelerated proximal gradient). Convergence is declared
/// when the relative parameter change drops below `tol`. With backtracking
/// the objective sequence is non-increasing.
FistaResult fista_minimize(const SmoothFn& smooth, const ProxOperator& prox, Matrix init,
                           const FistaOptions& options);

/// Least-squares loss (1/N) ||Y - X B||_F^2 through the Gram matrices.
class GramLoss {
public:
    GramLoss() = default;
    GramLoss(const Matrix& x, const Matrix& y);
    GramLoss(Matrix gram, Matrix cross, double yy, double n);

    double value(const Matrix& b) const;
    Matrix gradient(const Matrix& b) const;
    double operator()(const Matrix& b, Matrix* grad) const;
    /// Largest eigenvalue of the gradient's linear part (2/N) X'X.
    double lipschitz() const;

    const Matrix& gram() const { return gram_; }
    const Matrix& cross() const { return cross_; }
    double n() const { return n_; }

private:
    Matrix gram_;
    Matrix cross_;
    double yy_ = 0.0;
    double n_ = 1.0;
};

double largest_eigenvalue_sym(const Matrix& m);

/// Generic least-squares problem with a penalty handled by `prox`.
struct ProxProblem {
    Matrix design;
    Matrix response;
    FistaOptions options;
};

FistaResult fista(const ProxProblem& problem, const ProxOperator& prox,
                  const Matrix* init = nullptr);

/// argmin_B (1/N)||Y - X B||^2 + lam ||B||_1.
Matrix lasso_regression(const Matrix& x, const Matrix& y, double lam,
                        const FistaOptions& options = {}, const Matrix* init = nullptr);

/// argmin_B (1/N)||Y - X B||^2 + lam sum_g ||B_g||_2 with latent overlap.
Matrix group_lasso_regression(const Matrix& x, const Matrix& y, double lam,
                              const GroupStructure& groups, const FistaOptions& options = {});

/// argmin_B (1/N)||Y - X B||^2 + mu ||B||_*.
Matrix nuclear_regression(const Matrix& x, const Matrix& y, double mu,
                          const FistaOptions& options = {});

struct LowRankSparse {
    Matrix lowrank;  ///< L, p x p, transition orientation (y_t = (L + S) y_{t-1})
    Matrix sparse;   ///< S
    double loss = 0.0;  ///< (1/N) sum ||y_t - (L + S) y_{t-1}||^2 at the solution
    int iterations = 0;
};

/// argmin_{L,S} (1/N) sum_t ||y_t - (L + S) x_t||^2 + lam ||S||_1 + mu ||L||_*
/// where rows of x are predictors x_t' and rows of y are responses y_t'.
LowRankSparse lowrank_sparse_regression(const Matrix& x, const Matrix& y, double lam, double mu,
                                        const FistaOptions& options = {});

/// Same problem from Gram statistics, optionally warm-started.
LowRankSparse lowrank_sparse_regression(const GramLoss& loss, double lam, double mu,
                                        const FistaOptions& options = {}, const LowRankSparse* warm = nullptr);

/// Sum of squared residuals ||Y - X B||_F^2.
double sse(const Matrix& x, const Matrix& y, const Matrix& b);

}  // namespace varseg::solvers
