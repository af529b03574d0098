#include "doctest.h"
#include "oracles.hpp"

#include "varseg/core.hpp"

#include <Eigen/Eigenvalues>

using namespace varseg;

TEST_CASE("stack_lag_rows shifts for q=1")
{
    Matrix v(3, 2);
    v << 1, 0, 0, 1, 1, 1;
    const auto d = stack_lag_rows(TimeSeries(v), 1);
    CHECK(d.design.rows() == 2);
    CHECK(d.design == v.topRows(2));
    CHECK(d.response == v.bottomRows(2));
}

TEST_CASE("stack_lag_rows q=2 scalar")
{
    Matrix v(4, 1);
    v << 1, 2, 3, 4;
    const auto d = stack_lag_rows(TimeSeries(v), 2);
    Matrix want(2, 2);
    want << 2, 1, 3, 2;
    CHECK(d.design == want);
    CHECK(d.response(0, 0) == 3);
    CHECK(d.response(1, 0) == 4);
}

TEST_CASE("stack_lag_rows index identity on random data")
{
    std::mt19937_64 rng(3);
    const int T = 10, p = 2, q = 3;
    const TimeSeries ts(oracle::random_matrix(rng, T, p));
    const auto d = stack_lag_rows(ts, q);
    REQUIRE(d.design.rows() == T - q);
    for (int r = 0; r < T - q; ++r) {
        const int l = q + r;  // design row for time l (1-based)
        for (int k = 1; k <= q; ++k) {
            // block-identity readout of lag k
            CHECK(d.design.block(r, (k - 1) * p, 1, p) == ts.at(l - k + 1));
        }
        CHECK(d.response.row(r) == ts.at(l + 1));
    }
}

TEST_CASE("stack_lag_rows rejects q >= T")
{
    const TimeSeries ts(Matrix::Ones(3, 1));
    CHECK_THROWS_AS(stack_lag_rows(ts, 3), ConfigError);
}

TEST_CASE("companion spectral radius")
{
    CHECK(companion_spectral_radius(TransitionSet({0.5 * Matrix::Identity(3, 3)})) ==
          doctest::Approx(0.5));
    CHECK(companion_spectral_radius(TransitionSet({Matrix::Zero(2, 2), Matrix::Zero(2, 2)})) == 0.0);

    Matrix a(2, 2);
    a << 0.5, 0.2, 0.0, 0.3;
    const TransitionSet ts({a, 0.1 * Matrix::Identity(2, 2)});
    Matrix comp(4, 4);
    comp << 0.5, 0.2, 0.1, 0.0,  //
        0.0, 0.3, 0.0, 0.1,      //
        1.0, 0.0, 0.0, 0.0,      //
        0.0, 1.0, 0.0, 0.0;
    Eigen::EigenSolver<Matrix> es(comp);
    const double want = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(companion_spectral_radius(ts) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("spectral radius with repeated companion eigenvalues")
{
    // The real Schur solver does not converge on this one.
    const double a = 0.23731537187322646 * 0.125, b = 1.3763515534392785 * 0.125;
    Matrix phi1(2, 2);
    phi1 << a, 0.0, a, a;
    const TransitionSet ts({phi1, b * Matrix::Identity(2, 2)});
    // Block triangular: the roots of z^2 - a z - b, each twice.
    const double want = std::max(std::abs(a + std::sqrt(a * a + 4 * b)), std::abs(a - std::sqrt(a * a + 4 * b))) / 2;
    CHECK(companion_spectral_radius(ts) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("spectral radius is homogeneous for q=1")
{
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const TransitionSet ts({oracle::random_matrix(rng, 4, 4)});
        const double c = -1.7 + 0.2 * rep;
        CHECK(companion_spectral_radius(ts.scaled(c)) ==
              doctest::Approx(std::abs(c) * companion_spectral_radius(ts)).epsilon(1e-9));
    }
}

TEST_CASE("make_blocks default rule")
{
    const auto b = make_blocks(4000, 1);
    CHECK(b.block_size == 63);
    CHECK(b.block_count() == 64);
    CHECK(b.endpoints.front() == 1);
    CHECK(b.endpoints.back() == 4001);
}

TEST_CASE("make_blocks explicit size")
{
    const auto b = make_blocks(100, 1, 10);
    REQUIRE(b.block_count() == 10);
    for (int i = 0; i <= 10; ++i) CHECK(b.endpoints[i] == 1 + 10 * i);

    const auto c = make_blocks(101, 2, 10);
    CHECK(c.block_count() == 10);
    CHECK(c.endpoints.back() - c.endpoints[c.endpoints.size() - 2] == 10);
    CHECK(c.endpoints.front() == 2);

    CHECK_THROWS_AS(make_blocks(100, 1, 1), ConfigError);
    CHECK_THROWS_AS(make_blocks(100, 1, 51), ConfigError);
}

TEST_CASE("make_blocks tiles [q, T+1)")
{
    for (int T = 20; T < 300; T += 17)
        for (int q = 1; q <= 3; ++q)
            for (int b : {2, 3, 5, 7}) {
                const auto part = make_blocks(T, q, b);
                CHECK(part.endpoints.front() == q);
                CHECK(part.endpoints.back() == T + 1);
                for (int i = 0; i + 1 < static_cast<int>(part.endpoints.size()); ++i) {
                    CHECK(part.endpoints[i] < part.endpoints[i + 1]);
                    if (i + 2 < static_cast<int>(part.endpoints.size()))
                        CHECK(part.endpoints[i + 1] - part.endpoints[i] == b);
                }
                for (int t = q; t <= T; ++t) {
                    const int k = part.block_of(t);
                    CHECK(part.endpoints[k] <= t);
                    CHECK(t < part.endpoints[k + 1]);
                }
            }
}

TEST_CASE("piecewise model validation")
{
    PiecewiseVarModel m;
    m.break_points = {50};
    m.segments = {TransitionSet({Matrix::Zero(2, 2)}), TransitionSet({Matrix::Zero(2, 2)})};
    m.noise_scales = {1.0, 1.0};
    CHECK_NOTHROW(m.validate(100));
    CHECK(m.segment_of(49) == 0);
    CHECK(m.segment_of(50) == 1);
    m.noise_scales = {1.0};
    CHECK_THROWS_AS(m.validate(100), ConfigError);
}
