#include "doctest.h"
#include "oracles.hpp"

#include "varseg/fista.hpp"
#include "varseg/groups.hpp"
#include "varseg/prox.hpp"

using namespace varseg;
using namespace varseg::solvers;

TEST_CASE("soft threshold")
{
    Matrix a(1, 3);
    a << 1.0, -0.3, -2.0;
    const Matrix out = soft_threshold(a, 0.4);
    CHECK(out(0, 0) == doctest::Approx(0.6));
    CHECK(out(0, 1) == 0.0);
    CHECK(out(0, 2) == doctest::Approx(-1.6));
    CHECK(soft_threshold(a, 0.0) == a);
}

TEST_CASE("group soft threshold")
{
    Vector v(2);
    v << 3, 4;
    CHECK(group_soft_threshold(v, 5.0).isZero());
    const Vector h = group_soft_threshold(v, 2.5);
    CHECK(h[0] == doctest::Approx(1.5));
    CHECK(h[1] == doctest::Approx(2.0));
    CHECK(group_soft_threshold(v, 0.0) == v);
    CHECK(group_soft_threshold(Vector::Zero(3), 1.0).isZero());
}

TEST_CASE("singular value threshold basics")
{
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3;
    d(1, 1) = 1;
    const Matrix out = singular_value_threshold(d, 1.0);
    CHECK(out(0, 0) == doctest::Approx(2.0));
    CHECK(std::abs(out(1, 1)) < 1e-12);
    std::mt19937_64 rng(1);
    const Matrix m = oracle::random_matrix(rng, 4, 3);
    CHECK((singular_value_threshold(m, 0.0) - m).norm() < 1e-12);
    Matrix bad = m;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(singular_value_threshold(bad, 0.1), NumericError);
}

TEST_CASE("singular value threshold matches per-sigma oracle")
{
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix m = oracle::random_matrix(rng, 5, 5);
        const double mu = rep == 0 ? 0.7 : 0.05 * (rep % 30);
        CHECK((singular_value_threshold(m, mu) - oracle::svt(m, mu)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("svt rank and nuclear norm bound")
{
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 30; ++rep) {
        const Matrix m = oracle::random_matrix(rng, 6, 4);
        const double mu = 0.3 + 0.1 * rep;
        const Matrix out = singular_value_threshold(m, mu);
        Eigen::JacobiSVD<Matrix> svd(out);
        int rank = 0;
        for (int i = 0; i < svd.singularValues().size(); ++i) rank += svd.singularValues()[i] > 1e-10;
        CHECK(rank <= 4);
        CHECK(nuclear_norm(out) <= nuclear_norm(m) - mu * rank + 1e-9);
    }
}

TEST_CASE("fused chain prox small cases")
{
    Vector c = Vector::Constant(5, 2.5);
    CHECK(fused_chain_prox(c, 3.0) == c);
    Vector z(2);
    z << 0, 1;
    for (double lam : {0.5, 0.9, 4.0}) {
        const Vector w = fused_chain_prox(z, lam);
        CHECK(w[0] == doctest::Approx(0.5));
        CHECK(w[1] == doctest::Approx(0.5));
    }
    const Vector w = fused_chain_prox(z, 0.2);
    CHECK(w[0] == doctest::Approx(0.2));
    CHECK(w[1] == doctest::Approx(0.8));
}

TEST_CASE("fused chain prox matches dual oracle")
{
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> len(1, 12);
    for (int rep = 0; rep < 150; ++rep) {
        const int n = rep == 0 ? 8 : len(rng);
        const Vector z = oracle::random_matrix(rng, n, 1);
        const double lam = rep == 0 ? 0.3 : 0.02 * (rep % 40);
        const Vector got = fused_chain_prox(z, lam);
        const Vector want = oracle::tv_prox(z, lam);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("sparse fused prox matches dual oracle")
{
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<int> len(1, 6);
    for (int rep = 0; rep < 150; ++rep) {
        const int n = rep == 0 ? 6 : len(rng);
        const Vector z = oracle::random_matrix(rng, n, 1);
        const double l1 = rep == 0 ? 0.2 : 0.03 * (rep % 17);
        const double l2 = rep == 0 ? 0.4 : 0.05 * (rep % 13);
        const Vector got = sparse_fused_prox(z, l1, l2);
        const Vector want = oracle::sparse_fused_prox(z, l1, l2);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
    }
    Vector z(4);
    z << 1, -2, 0.5, 3;
    CHECK((sparse_fused_prox(z, 0.0, 0.7) - fused_chain_prox(z, 0.7)).norm() == 0.0);
    CHECK((sparse_fused_prox(z, 0.7, 0.0) - soft_threshold(z, 0.7)).norm() == 0.0);
}

TEST_CASE("prox optimality against random perturbations")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 1e-3);
    auto tv = [](const Vector& w) {
        double s = 0.0;
        for (int i = 1; i < w.size(); ++i) s += std::abs(w[i] - w[i - 1]);
        return s;
    };
    for (int rep = 0; rep < 5; ++rep) {
        const Vector z = oracle::random_matrix(rng, 7, 1);
        const double l1 = 0.15, l2 = 0.35;
        auto obj = [&](const Vector& w) { return 0.5 * (w - z).squaredNorm() + l1 * w.cwiseAbs().sum() + l2 * tv(w); };
        const Vector w = sparse_fused_prox(z, l1, l2);
        const double base = obj(w);
        for (int k = 0; k < 1000; ++k) {
            Vector d(7);
            for (int i = 0; i < 7; ++i) d[i] = nd(rng);
            CHECK(obj(w + d) >= base - 1e-10);
        }
    }
}

TEST_CASE("dykstra recovers the sparse fused prox")
{
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector z = oracle::random_matrix(rng, 7, 1);
        const Matrix w = dykstra_prox(
            z, [](const Matrix& v) -> Matrix { return fused_chain_prox(v.col(0), 0.3); },
            [](const Matrix& v) -> Matrix { return soft_threshold(v, 0.2); }, 1e-14, 5000);
        CHECK((w.col(0) - oracle::sparse_fused_prox(z, 0.2, 0.3)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("fista unpenalized least squares")
{
    std::mt19937_64 rng(2);
    const Matrix x = oracle::random_matrix(rng, 40, 5);
    const Matrix y = oracle::random_matrix(rng, 40, 2);
    FistaOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 20000;
    const Matrix b = lasso_regression(x, y, 0.0, opt);
    const Matrix want = oracle::ols(x, y);
    CHECK((b - want).norm() / want.norm() < 1e-6);
}

TEST_CASE("fista lasso full shrinkage")
{
    std::mt19937_64 rng(3);
    const Matrix x = oracle::random_matrix(rng, 30, 6);
    const Matrix y = oracle::random_matrix(rng, 30, 1);
    const double lam_max = (x.transpose() * y).cwiseAbs().maxCoeff() * 2.0 / 30.0;
    CHECK(lasso_regression(x, y, lam_max).isZero());
    CHECK(lasso_regression(x, y, 1e6).isZero());
}

TEST_CASE("lasso orthonormal design")
{
    std::mt19937_64 rng(4);
    const Matrix a = oracle::random_matrix(rng, 6, 6);
    const Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ();
    const Matrix y = oracle::random_matrix(rng, 6, 2);
    FistaOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 5000;
    // (1/N) normalization: minimizer of (1/N)||Y - QB||^2 at lam = 0 is Q'Y.
    CHECK((lasso_regression(q, y, 0.0, opt) - q.transpose() * y).norm() < 1e-8);
}

TEST_CASE("fista lasso matches coordinate descent")
{
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix x = oracle::random_matrix(rng, 10, 5);
        const Matrix y = oracle::random_matrix(rng, 10, 1);
        const double lam = 0.05 + 0.05 * rep;
        FistaOptions opt;
        opt.tol = 1e-13;
        opt.max_iter = 100000;
        const Matrix got = lasso_regression(x, y, lam, opt);
        const Matrix want = oracle::lasso_cd(x, y, lam);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("fista objective is monotone under backtracking")
{
    std::mt19937_64 rng(12);
    const Matrix x = oracle::random_matrix(rng, 25, 8);
    const Matrix y = oracle::random_matrix(rng, 25, 3);
    FistaOptions opt;
    opt.record_objective = true;
    opt.estimate_lipschitz = false;  // start from step 1 so backtracking kicks in
    opt.tol = 1e-10;
    opt.max_iter = 500;
    const auto res = fista(ProxProblem{x, y, opt}, l1_prox(0.1));
    REQUIRE(res.objective.size() > 2);
    for (std::size_t i = 1; i < res.objective.size(); ++i) CHECK(res.objective[i] <= res.objective[i - 1]);
}

TEST_CASE("fista reports divergence")
{
    const Matrix x = Matrix::Identity(3, 3) * 1e200;
    const Matrix y = Matrix::Ones(3, 1) * 1e200;
    FistaOptions opt;
    opt.step = StepRule::fixed(1.0);
    opt.estimate_lipschitz = false;
    CHECK_THROWS_AS(lasso_regression(x, y, 0.0, opt), NumericError);
}

TEST_CASE("group lasso regression")
{
    std::mt19937_64 rng(13);
    const int p = 3, q = 2;
    const Matrix x = oracle::random_matrix(rng, 60, p * q);
    Matrix b = Matrix::Zero(p * q, p);
    b.row(1).setConstant(0.8);  // one whole predictor column of Phi
    const Matrix y = x * b + 0.01 * oracle::random_matrix(rng, 60, p);
    Grouping g;
    g.kind = GroupKind::columnwise_separate;
    const GroupStructure gs(coefficient_groups(g, p, q), p * p * q);
    const Matrix est = group_lasso_regression(x, y, 0.05, gs);
    for (int r = 0; r < p * q; ++r) {
        if (r == 1) CHECK(est.row(r).norm() > 0.5);
        else CHECK(est.row(r).norm() < 1e-12);
    }
    CHECK(group_lasso_regression(x, y, 1e6, gs).isZero());
}

TEST_CASE("hierarchical groups are nested suffixes")
{
    Grouping g;
    g.kind = GroupKind::hierarchical_lag;
    const auto groups = coefficient_groups(g, 2, 3);
    CHECK(groups.size() == 6);
    CHECK(groups[0].size() == 6);
    CHECK(groups[2].size() == 2);
    const GroupStructure gs(groups, 2 * 2 * 3);
    CHECK(gs.overlapping());
    Vector lat = Vector::Ones(gs.latent_size());
    const Vector coef = gs.to_coef(lat);
    // lag-3 coefficients are in all three nested groups of their row
    CHECK(coef[4] == 3.0);
    CHECK(coef[0] == 1.0);
}

TEST_CASE("explicit group index bounds")
{
    Grouping g;
    g.kind = GroupKind::explicit_index;
    g.groups = {{0, 4}, {9}};
    CHECK_THROWS_AS(coefficient_groups(g, 3, 3), ConfigError);
    g.groups = {{0, 4}, {8}};
    CHECK(coefficient_groups(g, 3, 3).size() == 2);
}

TEST_CASE("nuclear regression limits")
{
    std::mt19937_64 rng(14);
    const Matrix x = oracle::random_matrix(rng, 30, 3);
    const Matrix y = oracle::random_matrix(rng, 30, 3);
    CHECK(nuclear_regression(x, y, 1e6).isZero());
}

TEST_CASE("lowrank plus sparse limits")
{
    std::mt19937_64 rng(15);
    const Matrix x = oracle::random_matrix(rng, 50, 3);
    const Matrix y = oracle::random_matrix(rng, 50, 3);
    FistaOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 50000;
    const auto big_mu = lowrank_sparse_regression(x, y, 0.1, 1e6, opt);
    CHECK(big_mu.lowrank.isZero());
    CHECK((big_mu.sparse.transpose() - oracle::lasso_cd(x, y, 0.1)).cwiseAbs().maxCoeff() < 1e-6);

    const auto big_lam = lowrank_sparse_regression(x, y, 1e6, 0.2, opt);
    CHECK(big_lam.sparse.isZero());
    const Matrix nuc = nuclear_regression(x, y, 0.2, opt);
    CHECK((big_lam.lowrank.transpose() - nuc).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lowrank plus sparse matches alternating oracle")
{
    std::mt19937_64 rng(16);
    const int p = 3, T = 60;
    const Vector u = oracle::random_matrix(rng, p, 1).normalized();
    const Vector v = oracle::random_matrix(rng, p, 1).normalized();
    const Matrix l = 0.5 * u * v.transpose();
    const Matrix s = 0.3 * Matrix::Identity(p, p);
    Matrix data(T, p);
    data.row(0) = oracle::random_matrix(rng, 1, p);
    for (int t = 1; t < T; ++t)
        data.row(t) = ((l + s) * data.row(t - 1).transpose()).transpose() + oracle::random_matrix(rng, 1, p);
    const Matrix x = data.topRows(T - 1);
    const Matrix y = data.bottomRows(T - 1);
    const double lam = 0.05, mu = 0.2;
    FistaOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 100000;
    const auto fit = lowrank_sparse_regression(x, y, lam, mu, opt);
    const double got = oracle::lowrank_sparse_objective(x, y, fit.lowrank, fit.sparse, lam, mu);
    const double want = oracle::lowrank_sparse_alternating(x, y, lam, mu);
    CHECK(got == doctest::Approx(want).epsilon(1e-4));
    CHECK(got <= want + 1e-4);
}
