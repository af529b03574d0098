#include "doctest.h"
#include "oracles.hpp"

#include "varseg/cli.hpp"
#include "varseg/io.hpp"
#include "varseg/plot.hpp"

#include <filesystem>
#include <random>
#include <sstream>
#include <unistd.h>

using namespace varseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("varseg_io_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "varseg");
    std::ostringstream out, err;
    const int code = cli::cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

DetectionResult sample_result(bool lowrank)
{
    std::mt19937_64 rng(4);
    DetectionResult r;
    r.change_points = {40, 90};
    r.lag = 2;
    for (int j = 0; j < 3; ++j) r.sparse_mats.push_back(oracle::random_matrix(rng, 3, 6));
    r.sparse_mats[1](0, 0) = 1e-300;
    r.sparse_mats[2](1, 2) = -0.1;
    if (lowrank) r.lowrank_mats = std::vector<Matrix>(3, oracle::random_matrix(rng, 3, 6));
    r.elapsed_seconds = 0.125;
    return r;
}

}  // namespace

TEST_CASE("csv parsing")
{
    const TimeSeries a = io::parse_csv("1,2\n3,4\n5,6");
    REQUIRE(a.length() == 3);
    REQUIRE(a.dim() == 2);
    CHECK(a.values()(2, 1) == 6.0);
    const TimeSeries b = io::parse_csv("a,b\n1,2\r\n3,4\n\n");
    CHECK(b.length() == 2);
    CHECK(b.values()(1, 0) == 3.0);
    CHECK(io::parse_csv(" -1.5e-3 , +2\n0,0\n").values()(0, 0) == -1.5e-3);

    auto message = [](const char* text) {
        try {
            io::parse_csv(text);
        } catch (const ParseError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("1,2\n3\n").find("line 2") != std::string::npos);
    CHECK(message("1,2\n3,x\n").find("line 2, column 2") != std::string::npos);
    CHECK_FALSE(message("").empty());
    CHECK_FALSE(message("a,b\n").empty());
}

TEST_CASE("csv round trip is exact")
{
    TempDir dir;
    std::mt19937_64 rng(2);
    Matrix m = oracle::random_matrix(rng, 25, 4);
    m(0, 0) = 1e-300;
    m(1, 1) = -123456789.123456789;
    m(2, 2) = 0.1;
    const TimeSeries data(m);
    io::save_csv(data, dir / "x.csv");
    CHECK(io::load_csv(dir / "x.csv").values() == m);
    CHECK_THROWS_AS(io::load_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("sha256 and atomic writes")
{
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    TempDir dir;
    io::atomic_write(dir / "f.txt", "one");
    io::atomic_write(dir / "f.txt", "two");
    CHECK(io::read_file(dir / "f.txt") == "two");
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) {
        (void)e;
        ++files;
    }
    CHECK(files == 1);
    CHECK_THROWS_AS(io::atomic_write(dir / "no/such/dir/f.txt", "x"), IoError);
}

TEST_CASE("result json round trip and schema")
{
    TempDir dir;
    for (bool lowrank : {false, true}) {
        const DetectionResult r = sample_result(lowrank);
        io::RunManifest m;
        m.command = "detect";
        m.seed = 7;
        const std::string digest = io::save_result(r, m, dir / "r.json");
        CHECK(digest == io::manifest_digest(m));
        const io::json doc = io::json::parse(io::read_file(dir / "r.json"));
        CHECK(io::validate_result_json(doc).empty());
        CHECK(doc["schema_version"] == 1);
        CHECK(doc["manifest"]["seed"] == 7);
        const DetectionResult back = io::load_result(dir / "r.json");
        CHECK(back.change_points == r.change_points);
        CHECK(back.lag == r.lag);
        CHECK(back.elapsed_seconds == r.elapsed_seconds);
        REQUIRE(back.sparse_mats.size() == 3);
        for (int j = 0; j < 3; ++j) CHECK(back.sparse_mats[j] == r.sparse_mats[j]);
        CHECK(back.lowrank_mats.has_value() == lowrank);
        if (lowrank) CHECK((*back.lowrank_mats)[2] == (*r.lowrank_mats)[2]);
        CHECK(io::manifest_from_json(doc["manifest"]).command == "detect");
    }
    DetectionResult empty;
    empty.sparse_mats = {Matrix::Zero(2, 2)};
    const io::json e = io::to_json(empty);
    CHECK(e["change_points"].is_array());
    CHECK(e["change_points"].empty());
    CHECK(e["lowrank_mats"].is_null());

    io::json bad = io::to_json(sample_result(false));
    bad["change_points"] = {0};
    CHECK_FALSE(io::validate_result_json(bad).empty());
    bad = io::to_json(sample_result(false));
    bad.erase("lag");
    CHECK_FALSE(io::validate_result_json(bad).empty());
    bad = io::to_json(sample_result(false));
    bad["sparse_mats"].erase(0);
    CHECK_FALSE(io::validate_result_json(bad).empty());
    CHECK_THROWS_AS(io::result_from_json(bad), ParseError);
}

TEST_CASE("generation spec json reproduces the series")
{
    datagen::GenerationSpec s;
    s.method = datagen::Method::lowrank_sparse;
    s.T = 120;
    s.p = 5;
    s.break_points = {60, 121};
    s.signals = {-0.5, 0.5};
    s.rank = {1, 2};
    s.singular_vals = {1.0, 0.5};
    s.info_ratio = {0.3, 0.3};
    s.seed = 9;
    const datagen::GenerationSpec back = io::spec_from_json(io::json::parse(io::to_json(s).dump()));
    CHECK(datagen::simulate(back).series.values() == datagen::simulate(s).series.values());
    const io::json truth = io::ground_truth_json(s, datagen::simulate(s));
    CHECK(truth["change_points"] == std::vector<int>{60});
    CHECK(truth["lowrank"].size() == 2);
}

TEST_CASE("density and granger edges")
{
    std::mt19937_64 rng(3);
    DetectionResult r;
    r.change_points = {10};
    for (int j = 0; j < 2; ++j) {
        Matrix m = oracle::random_matrix(rng, 4, 8);
        for (int i = 0; i < m.size(); i += 3) m(i) = 0.0;
        r.sparse_mats.push_back(m);
    }
    const auto d0 = plot::density_values(r, 0.0);
    for (int j = 0; j < 2; ++j) {
        int nz = 0;
        for (int i = 0; i < r.sparse_mats[j].size(); ++i) nz += r.sparse_mats[j](i) != 0.0;
        CHECK(d0[j] == static_cast<double>(nz) / 32.0);
    }
    CHECK(plot::granger_edges(Matrix::Zero(3, 3), 0.1).empty());
    Matrix phi = Matrix::Zero(3, 6);
    phi(2, 0) = 0.5;   // lag 1: series 1 drives series 3
    phi(0, 4) = -0.3;  // lag 2: series 2 drives series 1
    phi(1, 1) = 0.05;  // below threshold
    const auto e = plot::granger_edges(phi, 0.1);
    CHECK(e == std::vector<std::pair<int, int>>{{0, 2}, {1, 0}});
    const std::string svg = plot::granger_svg(Matrix::Zero(4, 4), 0.1, plot::Layout::circle, 1);
    CHECK(svg.find("class=\"edge\"") == std::string::npos);
    CHECK_THROWS_AS(plot::kind_of("heat"), ConfigError);
    CHECK_THROWS_AS(plot::layout_of("grid"), ConfigError);
}

TEST_CASE("layouts")
{
    const std::vector<std::pair<int, int>> edges{{2, 0}, {2, 1}, {3, 2}, {2, 4}};
    const auto star = plot::layout_nodes(5, edges, plot::Layout::star, 1);
    CHECK(star[2].first == 0.5);
    CHECK(star[2].second == 0.5);
    const auto circle = plot::layout_nodes(5, edges, plot::Layout::circle, 1);
    for (const auto& [x, y] : circle) CHECK(std::hypot(x - 0.5, y - 0.5) == doctest::Approx(0.4));
    const auto a = plot::layout_nodes(5, edges, plot::Layout::nicely, 3);
    const auto b = plot::layout_nodes(5, edges, plot::Layout::nicely, 3);
    CHECK(a == b);
    for (const auto& [x, y] : a) CHECK((x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0));
}

TEST_CASE("figures are byte-identical across runs")
{
    TempDir dir;
    std::mt19937_64 rng(1);
    const TimeSeries data(oracle::random_matrix(rng, 100, 3));
    DetectionResult r;
    r.change_points = {50};
    r.sparse_mats = {oracle::random_matrix(rng, 3, 3, 0.2), oracle::random_matrix(rng, 3, 3, 0.2)};
    for (plot::Kind k : {plot::Kind::cp, plot::Kind::param, plot::Kind::density, plot::Kind::granger}) {
        plot::RenderOptions o;
        o.kind = k;
        o.layout = plot::Layout::nicely;
        const auto first = plot::render_figures(r, data, o, dir / "a.svg");
        std::vector<std::string> bytes;
        for (const auto& f : first) bytes.push_back(io::read_file(f));
        const auto second = plot::render_figures(r, data, o, dir / "a.svg");
        REQUIRE(first == second);
        for (std::size_t i = 0; i < first.size(); ++i) CHECK(io::read_file(second[i]) == bytes[i]);
        CHECK(bytes[0].rfind("<?xml", 0) == 0);
        if (k == plot::Kind::cp) CHECK(bytes[0].find("stroke=\"red\"") != std::string::npos);
    }
}

TEST_CASE("cli usage errors")
{
    Run r = run({});
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    r = run({"detect", "--input", "x.csv", "--out", "y.json", "--frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("frobnicate") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"nonsense"}).code == 2);
    CHECK(run({"detect", "--input", "/nonexistent.csv", "--out", "/tmp/y.json"}).code == 1);
    CHECK(run({"detect", "--algo", "magic", "--input", "a", "--out", "b"}).code == 2);
}

TEST_CASE("cli pipeline on a strong-signal toy")
{
    TempDir dir;
    Run r = run({"simulate", "--T", "600", "--p", "4", "--break-points", "300", "--signals", "-0.8", "0.8", "--seed",
                 "5", "--out", dir / "d.csv", "--truth", dir / "t.json"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("manifest sha256: ") != std::string::npos);
    r = run({"detect", "--input", dir / "d.csv", "--out", dir / "r.json", "--refit"});
    REQUIRE(r.code == 0);
    const DetectionResult res = io::load_result(dir / "r.json");
    REQUIRE(res.change_points.size() == 1);
    CHECK(std::abs(res.change_points[0] - 300) <= 10);
    const io::json doc = io::json::parse(io::read_file(dir / "r.json"));
    CHECK(doc["manifest"]["input_digest"] == io::sha256_hex(io::read_file(dir / "d.csv")));

    r = run({"evaluate", "--spec", dir / "t.json", "--nreps", "1", "--refit", "--out", dir / "s.json"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Selection rate") != std::string::npos);
    const io::json s = io::json::parse(io::read_file(dir / "s.json"));
    CHECK(s["selection"][0]["selection_rate"] == 1.0);
    CHECK(s["replicates"][0]["change_points"] == res.change_points);

    r = run({"plot", "--result", dir / "r.json", "--kind", "granger", "--layout", "star", "--out", dir / "g.svg"});
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "g_seg2.svg"));
    CHECK(run({"plot", "--result", dir / "r.json", "--kind", "cp", "--out", dir / "c.svg"}).code == 2);
    CHECK(run({"plot", "--result", dir / "r.json", "--layout", "grid", "--out", dir / "c.svg"}).code == 2);
}

TEST_CASE("cli config file with flag override")
{
    TempDir dir;
    io::atomic_write(dir / "gen.cfg", "# toy\nT = 200\np = 3\nbreak-points = 100\nsignals = -0.5 0.5\nseed = 4\n");
    Run a = run({"simulate", "--config", dir / "gen.cfg", "--out", dir / "a.csv"});
    REQUIRE(a.code == 0);
    Run b = run({"simulate", "--T", "200", "--p", "3", "--break-points", "100", "--signals", "-0.5", "0.5", "--seed",
                 "4", "--out", dir / "b.csv"});
    REQUIRE(b.code == 0);
    CHECK(io::read_file(dir / "a.csv") == io::read_file(dir / "b.csv"));
    Run c = run({"simulate", "--config", dir / "gen.cfg", "--seed", "5", "--out", dir / "c.csv"});
    REQUIRE(c.code == 0);
    CHECK(io::read_file(dir / "a.csv") != io::read_file(dir / "c.csv"));
    CHECK(io::load_csv(dir / "c.csv").length() == 200);
}
