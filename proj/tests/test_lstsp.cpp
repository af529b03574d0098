#include "doctest.h"
#include "oracles.hpp"

#include "varseg/datagen.hpp"
#include "varseg/lstsp.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

using namespace varseg;
using namespace varseg::lstsp;

namespace {

TimeSeries piecewise(const std::vector<int>& breaks, const std::vector<Matrix>& phis, int T, std::uint64_t seed)
{
    PiecewiseVarModel m;
    m.break_points = breaks;
    for (const Matrix& phi : phis) m.segments.emplace_back(std::vector<Matrix>{phi});
    m.noise_scales.assign(phis.size(), 1.0);
    return datagen::simulate_model(m, T, 50, seed).series;
}

Matrix rank_one(int p, double scale, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Vector u = oracle::random_matrix(rng, p, 1).col(0).normalized();
    Vector v = oracle::random_matrix(rng, p, 1).col(0).normalized();
    return scale * u * v.transpose();
}

double ols_sse(const TimeSeries& data, int b, int e)
{
    const LaggedDesign d = lagged_window(data, 1, b, e);
    return (d.response - d.design * oracle::ols(d.design, d.response)).squaredNorm();
}

const SolverControls tight{1e-10, 20000};

}  // namespace

TEST_CASE("rolling windows")
{
    const auto w = rolling_windows(300, 17, 4);
    REQUIRE(w.size() == static_cast<std::size_t>(std::ceil((300.0 - 17) / 4) + 1));
    CHECK(w[0].begin == 1);
    CHECK(w[1].begin == 5);
    CHECK(w[2].begin == 9);
    CHECK(w.back().end == 301);
    for (const Window& x : w) CHECK(x.end - x.begin == 17);
    for (int T : {40, 41, 57, 100}) {
        for (int l = 1; l <= 10; ++l) {
            const auto ws = rolling_windows(T, 10, l);
            CHECK(static_cast<int>(ws.size()) == (T - 10 + l - 1) / l + 1);
            CHECK(ws.back().end == T + 1);
        }
    }
    CHECK_THROWS_AS(rolling_windows(100, 10, 11), ConfigError);
    CHECK_THROWS_AS(rolling_windows(5, 10, 1), ConfigError);
}

TEST_CASE("candidate dedup")
{
    CHECK(dedup_candidates({10, 11, 12, 30, 31, 60}, 4) == std::vector<int>{11, 30, 60});
    CHECK(dedup_candidates({60, 10, 10, 10}, 4) == std::vector<int>{10, 60});
    CHECK(dedup_candidates({}, 4).empty());
    CHECK(dedup_candidates({5, 9}, 4) == std::vector<int>{5, 9});
}

TEST_CASE("single change point search agrees with an OLS split scan")
{
    Matrix a = rank_one(4, 0.75, 1);
    Matrix b = -a;
    const TimeSeries data = piecewise({121}, {a, b}, 240, 3);
    const SingleCp cp = single_cp_search(data, 1, 241, {Penalty{0.1, 0.1}, Penalty{0.1, 0.1}}, 10, tight);
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int tau : cp.taus) {
        const double v = ols_sse(data, 2, tau) + ols_sse(data, tau, 241);
        if (v < best) {
            best = v;
            arg = tau;
        }
    }
    CHECK(std::abs(cp.tau - 121) <= 3);
    CHECK(std::abs(cp.tau - arg) <= 3);
    CHECK(cp.taus.front() == 11);
    CHECK(cp.taus.back() == 231);
}

TEST_CASE("single change point search returns the profile minimum")
{
    const TimeSeries data = piecewise({}, {0.3 * Matrix::Identity(3, 3)}, 80, 5);
    const SingleCp cp = single_cp_search(data, 11, 61, {Penalty{1, 1}, Penalty{1, 1}}, 5, SolverControls{});
    const auto it = std::min_element(cp.profile.begin(), cp.profile.end());
    CHECK(cp.score == doctest::Approx(*it).epsilon(1e-12));
    CHECK(cp.tau == cp.taus[it - cp.profile.begin()]);
    CHECK(cp.taus.front() == 16);
    CHECK(cp.taus.back() == 56);
    CHECK_THROWS_AS(single_cp_search(data, 1, 12, {Penalty{}, Penalty{}}, 5, SolverControls{}), SegmentError);
}

TEST_CASE("backward screening matches exhaustive subset IC")
{
    const Matrix a = rank_one(4, 0.8, 2);
    const TimeSeries data = piecewise({200}, {a, -a}, 400, 7);
    const Penalty w{0.5, 0.5};
    const SolverControls c{1e-8, 5000};
    const std::vector<std::vector<int>> sets{{100, 200}, {200, 300}, {60, 199, 330}, {50, 120, 202, 260, 350}};
    for (const auto& cands : sets) {
        const double omega = 0.5;
        const ScreenResult sr = backward_screen(data, cands, w, omega, c);
        const int m = static_cast<int>(cands.size());
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> arg;
        for (unsigned mask = 0; mask < (1u << m); ++mask) {
            std::vector<int> sub;
            for (int i = 0; i < m; ++i) {
                if ((mask >> i) & 1u) sub.push_back(cands[i]);
            }
            const double v = information_criterion(data, sub, w, omega, c);
            if (v < best) {
                best = v;
                arg = sub;
            }
        }
        CHECK(sr.points == arg);
        CHECK(sr.ic == doctest::Approx(best).epsilon(1e-9));
        CHECK(std::abs(information_criterion(data, sr.points, w, omega, c) - sr.ic) < 1e-9);
        REQUIRE(sr.points.size() == 1);
        CHECK(std::abs(sr.points[0] - 200) <= 2);
        for (std::size_t i = 1; i < sr.ic_trace.size(); ++i) CHECK(sr.ic_trace[i] <= sr.ic_trace[i - 1]);
        for (int t : sr.points) CHECK(std::find(cands.begin(), cands.end(), t) != cands.end());
    }
}

TEST_CASE("screening penalty limits")
{
    const Matrix a = rank_one(3, 0.8, 4);
    const TimeSeries data = piecewise({150}, {a, -a}, 300, 2);
    const std::vector<int> cands{50, 150, 250};
    CHECK(backward_screen(data, cands, {0.5, 0.5}, 1e12, SolverControls{}).points.empty());
    CHECK(backward_screen(data, cands, {0.0, 0.0}, 0.0, tight).points == cands);
    CHECK(backward_screen(data, {}, {0.5, 0.5}, 1.0, SolverControls{}).points.empty());
}

TEST_CASE("refit recovers a rank one transition")
{
    const Matrix l = rank_one(5, 0.8, 9);
    const TimeSeries data = piecewise({}, {l}, 2000, 1);
    const auto fits = lstsp_refit(data, {}, 5, Penalty{1000.0, 200.0}, tight);
    REQUIRE(fits.size() == 1);
    const Vector sv = Eigen::JacobiSVD<Matrix>(fits[0].lowrank).singularValues();
    CHECK(sv[0] > 0.5);
    for (int i = 1; i < sv.size(); ++i) CHECK(sv[i] < 1e-3 * sv[0]);

    const auto zero = lstsp_refit(data, {}, 5, Penalty{1e9, 1e9}, SolverControls{});
    CHECK(zero[0].lowrank.isZero());
    CHECK(zero[0].sparse.isZero());
    CHECK_THROWS_AS(lstsp_refit(data, {1000, 1010}, 5, Penalty{1, 1}, SolverControls{}), SegmentError);
}

TEST_CASE("detect a single change against a global scan")
{
    const Matrix a = 0.7 * Matrix::Identity(4, 4);
    const TimeSeries data = piecewise({500}, {a, -a}, 1000, 6);
    LstspConfig c;
    const LstspOutput out = lstsp_detect(data, c);
    const auto& d = out.diagnostics;
    CHECK(d.window == 31);
    CHECK(d.step == 7);
    CHECK(d.search_count == static_cast<int>(d.windows.size()));
    CHECK(d.search_count == static_cast<int>(std::ceil((1000.0 - d.window) / d.step)) + 1);
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int tau = 20; tau <= 980; ++tau) {
        const double v = ols_sse(data, 2, tau) + ols_sse(data, tau, 1001);
        if (v < best) {
            best = v;
            arg = tau;
        }
    }
    REQUIRE(out.result.change_points.size() == 1);
    CHECK(std::abs(out.result.change_points[0] - arg) <= d.window / 2);
    CHECK(std::abs(out.result.change_points[0] - 500) <= d.window / 2);
    REQUIRE(out.result.lowrank_mats);
    CHECK(out.result.lowrank_mats->size() == 2);
    CHECK(out.result.sparse_mats.size() == 2);
    CHECK(std::abs(information_criterion(data, d.screen.points, default_penalty(d.window / 2, 4), d.omega,
                                         SolverControls{}) -
                   d.screen.ic) < 1e-9);
}

TEST_CASE("stationary low-rank series gives no change points")
{
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const TimeSeries data = piecewise({}, {rank_one(4, 0.8, seed)}, 1000, seed);
        CHECK(lstsp_detect(data, LstspConfig{}).result.change_points.empty());
    }
}

TEST_CASE("config validation")
{
    LstspConfig c;
    c.window = 10;
    c.step = 11;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    LstspConfig s;
    s.skip = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    LstspConfig w;
    w.window = 8;
    const TimeSeries data = piecewise({}, {0.5 * Matrix::Identity(2, 2)}, 100, 1);
    CHECK_THROWS_AS(lstsp_detect(data, w), ConfigError);
}
