#include "doctest.h"
#include "oracles.hpp"

#include "varseg/datagen.hpp"

#include <Eigen/SVD>

using namespace varseg;
using namespace varseg::datagen;

namespace {

GenerationSpec offdiag_spec()
{
    GenerationSpec s;
    s.T = 4000;
    s.p = 15;
    s.q = 2;
    s.break_points = {1333, 2666, 4001};
    s.signals = {-0.6, -0.4, 0.6, 0.4, -0.6, -0.4};
    s.pattern.kind = PatternKind::off_diagonal;
    return s;
}

}  // namespace

TEST_CASE("off-diagonal pattern")
{
    GenerationSpec s;
    s.T = 100;
    s.p = 3;
    s.break_points = {101};
    s.signals = {-0.6};
    const auto ts = gen_sparse_transitions(s);
    Matrix want = Matrix::Zero(3, 3);
    want(0, 1) = -0.6;
    want(1, 2) = -0.6;
    CHECK(ts[0].lags[0] == want);
}

TEST_CASE("diagonal pattern")
{
    GenerationSpec s;
    s.T = 100;
    s.p = 2;
    s.break_points = {101};
    s.signals = {0.5};
    s.pattern.kind = PatternKind::diagonal;
    CHECK(gen_sparse_transitions(s)[0].lags[0] == 0.5 * Matrix::Identity(2, 2));
}

TEST_CASE("random pattern needs density")
{
    GenerationSpec s;
    s.T = 100;
    s.p = 4;
    s.break_points = {101};
    s.signals = {0.5};
    s.pattern.kind = PatternKind::random;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("random pattern nonzero counts follow the binomial law")
{
    // Binomial(225, 0.05): mean 11.25, sd 3.27; the 99% two-sided band is [3, 21].
    GenerationSpec s;
    s.T = 100;
    s.p = 15;
    s.break_points = {101};
    s.signals = {0.3};
    s.pattern.kind = PatternKind::random;
    s.pattern.density = {0.05};
    int outside = 0;
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        s.seed = seed;
        const auto n = (gen_sparse_transitions(s)[0].lags[0].array() != 0.0).count();
        total += static_cast<double>(n);
        outside += (n < 3 || n > 21);
    }
    CHECK(outside <= 6);  // about 2 expected
    CHECK(total / 200.0 == doctest::Approx(11.25).epsilon(0.1));
}

TEST_CASE("group sparse columnwise and rowwise")
{
    GenerationSpec s;
    s.method = Method::group_sparse;
    s.T = 4000;
    s.p = 20;
    s.q = 2;
    s.break_points = {1333, 2666, 4001};
    s.signals = {-0.8, -0.4, 0.6, -0.4, -0.8, -0.4};
    s.group_index = {{1, 5}, {31}, {}};
    const auto ts = gen_group_sparse_transitions(s);
    for (int r = 0; r < 20; ++r) {
        CHECK(ts[0].lags[0](r, 0) == -0.8);
        CHECK(ts[0].lags[0](r, 4) == -0.8);
        CHECK(ts[0].lags[1](r, 10) == -0.4);
    }
    CHECK((ts[0].lags[0].array() != 0.0).count() == 40);
    CHECK((ts[0].lags[1].array() != 0.0).count() == 20);

    s.group_type = GroupOrientation::row;
    s.group_index = {{1, 3}, {21, 23}};
    const auto rows = gen_group_sparse_transitions(s);
    CHECK((rows[1].lags[0].row(0).array() == 0.6).all());
    CHECK((rows[1].lags[1].row(2).array() == -0.4).all());
    CHECK((rows[1].lags[1].array() != 0.0).count() == 40);

    s.group_index = {};
    CHECK(gen_group_sparse_transitions(s)[0].lags[0].isZero());
    s.group_index = {{41}};
    CHECK_THROWS_AS(gen_group_sparse_transitions(s), ConfigError);
}

TEST_CASE("low-rank component")
{
    auto rng = make_stream(5, 0);
    const Matrix o = gen_lowrank_component(6, 6, std::vector<double>(6, 1.0), rng);
    CHECK((o.transpose() * o - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);

    const Matrix r1 = gen_lowrank_component(5, 1, {0.8}, rng);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            for (int k = i + 1; k < 5; ++k)
                for (int l = j + 1; l < 5; ++l)
                    CHECK(std::abs(r1(i, j) * r1(k, l) - r1(i, l) * r1(k, j)) < 1e-10);

    const Matrix r2 = gen_lowrank_component(7, 2, {1.0, 0.75}, rng);
    Eigen::JacobiSVD<Matrix> svd(r2);
    CHECK(svd.singularValues()[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(svd.singularValues()[1] == doctest::Approx(0.75).epsilon(1e-8));
    CHECK(svd.singularValues()[2] < 1e-10);
    CHECK_THROWS_AS(gen_lowrank_component(3, 4, {1, 1, 1, 1}, rng), ConfigError);
}

TEST_CASE("information ratio")
{
    Matrix s = Matrix::Zero(3, 3);
    s(0, 1) = -0.7;
    auto rng = make_stream(9, 0);
    const Matrix l = gen_lowrank_component(3, 2, {1.0, 0.75}, rng);
    CHECK(max_abs(apply_info_ratio(l, s, 0.35)) == doctest::Approx(0.245));
    const Matrix same = apply_info_ratio(s, s, 1.0);
    CHECK((same - s).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(apply_info_ratio(l, Matrix::Zero(3, 3), 1.0), ConfigError);
    std::mt19937_64 r(3);
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix a = oracle::random_matrix(r, 4, 4);
        const Matrix b = oracle::random_matrix(r, 4, 4);
        const double g = 0.1 + 0.05 * rep;
        CHECK(std::abs(max_abs(apply_info_ratio(a, b, g)) / max_abs(b) - g) < 1e-12);
    }
}

TEST_CASE("stabilize")
{
    const TransitionSet half({0.5 * Matrix::Identity(2, 2)});
    CHECK(stabilize(half, 0.9).lags[0] == half.lags[0]);
    const TransitionSet two({2.0 * Matrix::Identity(3, 3)});
    const Matrix got = stabilize(two, 0.9).lags[0];
    CHECK((got - 0.9 * (1 - 1e-6) * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const TransitionSet ts({oracle::random_matrix(rng, 3, 3), oracle::random_matrix(rng, 3, 3)});
        if (companion_spectral_radius(ts) < 0.9) continue;
        const double r = companion_spectral_radius(stabilize(ts, 0.9));
        CHECK(r < 0.9);
        CHECK(std::abs(r - 0.9) < 1e-4);
    }
}

TEST_CASE("zero model and zero noise gives zero series")
{
    GenerationSpec s;
    s.T = 50;
    s.p = 3;
    s.break_points = {51};
    s.transitions = std::vector<TransitionSet>{TransitionSet({Matrix::Zero(3, 3)})};
    s.noise_scales = {0.0};
    CHECK(simulate(s).series.values().isZero());
}

TEST_CASE("stationary variance of an AR(1)")
{
    GenerationSpec s;
    s.T = 20000;
    s.p = 2;
    s.break_points = {20001};
    s.signals = {0.5};
    s.pattern.kind = PatternKind::diagonal;
    s.seed = 17;
    const Matrix y = simulate(s).series.values();
    for (int c = 0; c < 2; ++c) {
        const double mean = y.col(c).mean();
        const double var = (y.col(c).array() - mean).square().sum() / (y.rows() - 1);
        CHECK(var == doctest::Approx(1.0 / 0.75).epsilon(0.05));
    }
}

TEST_CASE("offdiagonal design matches the example")
{
    const auto sim = simulate(offdiag_spec());
    CHECK(sim.series.length() == 4000);
    CHECK(sim.series.dim() == 15);
    CHECK(sim.model.break_points == std::vector<int>{1333, 2666});
    for (int j = 0; j < 3; ++j) {
        const auto& seg = sim.model.segments[j];
        for (int l = 0; l < 2; ++l) {
            CHECK((seg.lags[l].array() != 0.0).count() == 14);
            CHECK(seg.lags[l](0, 1) == doctest::Approx(offdiag_spec().signals[j * 2 + l]));
        }
    }
}

TEST_CASE("recursion reconstruction and determinism")
{
    const auto spec = offdiag_spec();
    const auto sim = simulate(spec);
    const Matrix& y = sim.series.values();
    double worst = 0.0;
    for (int t = 3; t <= spec.T; ++t) {
        const auto& seg = sim.model.segments[sim.model.segment_of(t)];
        Vector pred = sim.noise.row(t - 1).transpose();
        for (int l = 1; l <= 2; ++l) pred += seg.lags[l - 1] * y.row(t - 1 - l).transpose();
        worst = std::max(worst, (pred.transpose() - y.row(t - 1)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-10);
    CHECK(simulate(spec).series.values() == y);
    auto other = spec;
    other.seed = 2;
    CHECK(simulate(other).series.values() != y);
}

TEST_CASE("mixed lags")
{
    GenerationSpec s;
    s.T = 1000;
    s.p = 15;
    s.lags_vector = {1, 2};
    s.break_points = {500, 1001};
    s.signals = {-0.8, 0.6, 0.4};
    const auto sim = simulate(s);
    CHECK(sim.model.segments[0].lag_count() == 2);
    CHECK(sim.model.segments[0].lags[1].isZero());
    CHECK(sim.model.segments[0].lags[0](0, 1) == doctest::Approx(-0.8));
    CHECK(sim.model.segments[1].lags[1](0, 1) == doctest::Approx(0.4));
}

TEST_CASE("fixed low-rank generation keeps L identical")
{
    GenerationSpec s;
    s.method = Method::fixed_lowrank_sparse;
    s.T = 300;
    s.p = 15;
    s.break_points = {100, 200, 301};
    s.signals = {-0.7, 0.85, -0.7};
    s.rank = {2, 2, 2};
    s.singular_vals = {1.0, 0.75};
    s.info_ratio = {0.35, 0.35, 0.35};
    const auto sim = simulate(s);
    REQUIRE(sim.lowrank.size() == 3);
    CHECK(sim.lowrank[0] == sim.lowrank[1]);
    CHECK(sim.lowrank[1] == sim.lowrank[2]);
    Eigen::JacobiSVD<Matrix> svd(sim.lowrank[0]);
    CHECK(svd.singularValues()[1] > 1e-6);
    CHECK(svd.singularValues()[2] < 1e-10);
    for (const auto& seg : sim.model.segments) CHECK(companion_spectral_radius(seg) < 0.9);
}

TEST_CASE("time-varying low-rank generation respects ranks")
{
    GenerationSpec s;
    s.method = Method::lowrank_sparse;
    s.T = 300;
    s.p = 20;
    s.break_points = {100, 200, 301};
    s.signals = {-0.7, 0.8, -0.7};
    s.rank = {1, 3, 1};
    s.singular_vals = {1.0, 0.75, 0.5};
    s.info_ratio = {0.35};
    const auto sim = simulate(s);
    const std::vector<int> want{1, 3, 1};
    for (int j = 0; j < 3; ++j) {
        Eigen::JacobiSVD<Matrix> svd(sim.lowrank[j]);
        int rank = 0;
        for (int i = 0; i < svd.singularValues().size(); ++i) rank += svd.singularValues()[i] > 1e-10;
        CHECK(rank == want[j]);
        CHECK((sim.lowrank[j] + sim.sparse[j] - sim.model.segments[j].lags[0]).cwiseAbs().maxCoeff() < 1e-14);
    }
    s.singular_vals = {1.0, 0.75};
    CHECK_THROWS_AS(simulate(s), ConfigError);
}
