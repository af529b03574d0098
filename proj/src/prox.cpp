#include "varseg/prox.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <vector>

namespace varseg::solvers {

Matrix soft_threshold(const Matrix& x, double lam)
{
    if (lam <= 0.0) return x;
    return x.unaryExpr([lam](double v) {
        const double a = std::abs(v) - lam;
        return a > 0.0 ? std::copysign(a, v) : 0.0;
    });
}

Vector group_soft_threshold(const Vector& v, double lam)
{
    if (lam <= 0.0) return v;
    const double norm = v.norm();
    if (norm <= lam) return Vector::Zero(v.size());
    return v * (1.0 - lam / norm);
}

Matrix singular_value_threshold(const Matrix& m, double mu)
{
    if (!m.allFinite()) throw NumericError("singular value threshold on non-finite input");
    if (m.size() == 0) return m;
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector s = (svd.singularValues().array() - mu).max(0.0).matrix();
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

double nuclear_norm(const Matrix& m)
{
    if (m.size() == 0) return 0.0;
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues().sum();
}

// Dynamic programming over the piecewise-quadratic messages (Johnson 2013).
// x holds the knots of the derivative of the message, with slope/intercept
// increments a/b between them; tm/tp are the back-pointer bounds.
Vector fused_chain_prox(const Vector& z, double lam)
{
    const int n = static_cast<int>(z.size());
    if (n <= 1 || lam <= 0.0) return z;
    if (!z.allFinite() || !std::isfinite(lam)) throw NumericError("fused_chain_prox: non-finite input");

    std::vector<double> x(2 * n), a(2 * n), b(2 * n), tm(n - 1), tp(n - 1);
    tm[0] = -lam + z[0];
    tp[0] = lam + z[0];
    int l = n - 1;
    int r = n;
    x[l] = tm[0];
    x[r] = tp[0];
    a[l] = 1.0;
    b[l] = -z[0] + lam;
    a[r] = -1.0;
    b[r] = z[0] + lam;
    double afirst = 1.0, bfirst = -lam - z[1];
    double alast = -1.0, blast = -lam + z[1];

    for (int k = 1; k < n - 1; ++k) {
        double alo = afirst, blo = bfirst;
        int lo = l;
        for (; lo <= r; ++lo) {
            if (alo * x[lo] + blo > -lam) break;
            alo += a[lo];
            blo += b[lo];
        }
        tm[k] = (-lam - blo) / alo;
        l = lo - 1;
        x[l] = tm[k];

        double ahi = alast, bhi = blast;
        int hi = r;
        for (; hi >= lo; --hi) {
            if (-ahi * x[hi] - bhi < lam) break;
            ahi += a[hi];
            bhi += b[hi];
        }
        tp[k] = (lam + bhi) / (-ahi);
        r = hi + 1;
        x[r] = tp[k];

        a[l] = alo;
        b[l] = blo + lam;
        a[r] = ahi;
        b[r] = bhi + lam;
        afirst = 1.0;
        bfirst = -lam - z[k + 1];
        alast = -1.0;
        blast = -lam + z[k + 1];
    }

    double alo = afirst, blo = bfirst;
    for (int lo = l; lo <= r; ++lo) {
        if (alo * x[lo] + blo > 0.0) break;
        alo += a[lo];
        blo += b[lo];
    }
    Vector out(n);
    out[n - 1] = -blo / alo;
    for (int k = n - 2; k >= 0; --k) {
        if (out[k + 1] > tp[k]) out[k] = tp[k];
        else if (out[k + 1] < tm[k]) out[k] = tm[k];
        else out[k] = out[k + 1];
    }
    return out;
}

Vector sparse_fused_prox(const Vector& z, double lam1, double lam2)
{
    return soft_threshold(fused_chain_prox(z, lam2), lam1);
}

Matrix dykstra_prox(const Matrix& z, const std::function<Matrix(const Matrix&)>& prox_f,
                    const std::function<Matrix(const Matrix&)>& prox_g, double tol, int max_iter)
{
    Matrix x = z;
    Matrix p = Matrix::Zero(z.rows(), z.cols());
    Matrix q = Matrix::Zero(z.rows(), z.cols());
    for (int it = 0; it < max_iter; ++it) {
        Matrix y = prox_f(x + p);
        p = x + p - y;
        Matrix next = prox_g(y + q);
        q = y + q - next;
        const double change = (next - x).norm();
        x = std::move(next);
        if (change <= tol * std::max(1.0, x.norm())) break;
    }
    return x;
}

}  // namespace varseg::solvers
