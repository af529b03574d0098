#pragma once

#include "varseg/core.hpp"

#include <functional>

namespace varseg::solvers {

/// Elementwise sign(x) * max(|x| - lam, 0).
Matrix soft_threshold(const Matrix& x, double lam);

/// Block l2 shrinkage v * max(0, 1 - lam / ||v||); zero maps to zero.
Vector group_soft_threshold(const Vector& v, double lam);

/// U max(Sigma - mu, 0) V' for the SVD M = U Sigma V'.
Matrix singular_value_threshold(const Matrix& m, double mu);

double nuclear_norm(const Matrix& m);

/// Exact minimizer of 1/2 ||w - z||^2 + lam * sum_i |w_i - w_{i-1}|, computed
/// with the O(k) dynamic-programming 1-D total-variation algorithm.
Vector fused_chain_prox(const Vector& z, double lam);

/// soft_threshold(fused_chain_prox(z, lam2), lam1): the exact prox of
/// lam1 ||w||_1 + lam2 TV(w).
Vector sparse_fused_prox(const Vector& z, double lam1, double lam2);

/// Proximal Dykstra splitting for the prox of a sum of two functions whose
/// individual proxes are available. Converges to prox_{f+g}(z).
Matrix dykstra_prox(const Matrix& z, const std::function<Matrix(const Matrix&)>& prox_f,
                    const std::function<Matrix(const Matrix&)>& prox_g, double tol = 1e-10,
                    int max_iter = 200);

}  // namespace varseg::solvers
