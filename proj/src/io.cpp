#include "varseg/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unistd.h>

namespace varseg::io {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view cell)
{
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TimeSeries parse_csv(std::string_view text)
{
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    int line_no = 0;
    bool first = true;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        std::vector<double> row;
        std::optional<std::size_t> bad;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = parse_number(cells[c]);
            if (!v) {
                if (!bad) bad = c;
                continue;
            }
            row.push_back(*v);
        }
        if (first) {
            first = false;
            width = cells.size();
            if (bad) continue;  // header
        }
        if (bad) {
            throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(*bad + 1) +
                             ": non-numeric cell '" + std::string(trim(cells[*bad])) + "'");
        }
        if (cells.size() != width) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                             " columns, found " + std::to_string(cells.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("no numeric rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) m(r, c) = rows[r][c];
    }
    return TimeSeries(std::move(m));
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path);
    return ss.str();
}

TimeSeries load_csv(const std::string& path)
{
    try {
        return parse_csv(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string format_csv(const TimeSeries& data)
{
    std::string out;
    const Matrix& v = data.values();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (c) out += ',';
            out += fmt17(v(r, c));
        }
        out += '\n';
    }
    return out;
}

void save_csv(const TimeSeries& data, const std::string& path) { atomic_write(path, format_csv(data)); }

void atomic_write(const std::string& path, std::string_view content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("write failed for " + path);
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path);
    }
}

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return ss.str();
}

std::string utc_now()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json to_json(const RunManifest& m)
{
    return json{{"command", m.command},
                {"config", m.config},
                {"input_digest", m.input_digest},
                {"seed", m.seed ? json(*m.seed) : json(nullptr)},
                {"started", m.started},
                {"finished", m.finished},
                {"version", m.version}};
}

RunManifest manifest_from_json(const json& j)
{
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.input_digest = j.at("input_digest").get<std::string>();
    if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.version = j.at("version").get<std::string>();
    return m;
}

std::string manifest_digest(const RunManifest& m) { return sha256_hex(to_json(m).dump()); }

json to_json(const Matrix& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j)
{
    if (!j.is_array()) throw ParseError("matrix must be an array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j[0].size() : 0;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ParseError("ragged matrix row " + std::to_string(r + 1));
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ParseError("non-numeric matrix entry");
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

namespace {

json matrices_json(const std::vector<Matrix>& ms)
{
    json a = json::array();
    for (const Matrix& m : ms) a.push_back(to_json(m));
    return a;
}

std::vector<Matrix> matrices_from(const json& j)
{
    std::vector<Matrix> out;
    for (const json& m : j) out.push_back(matrix_from_json(m));
    return out;
}

}  // namespace

json to_json(const DetectionResult& r)
{
    return json{{"schema_version", schema_version},
                {"change_points", r.change_points},
                {"lag", r.lag},
                {"sparse_mats", matrices_json(r.sparse_mats)},
                {"lowrank_mats", r.lowrank_mats ? matrices_json(*r.lowrank_mats) : json(nullptr)},
                {"elapsed_seconds", r.elapsed_seconds}};
}

DetectionResult result_from_json(const json& j)
{
    const auto problems = validate_result_json(j);
    if (!problems.empty()) throw ParseError("invalid result document: " + problems.front());
    DetectionResult r;
    r.change_points = j.at("change_points").get<std::vector<int>>();
    r.lag = j.at("lag").get<int>();
    r.sparse_mats = matrices_from(j.at("sparse_mats"));
    if (!j.at("lowrank_mats").is_null()) r.lowrank_mats = matrices_from(j.at("lowrank_mats"));
    r.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    return r;
}

std::vector<std::string> validate_result_json(const json& j)
{
    std::vector<std::string> p;
    if (!j.is_object()) return {"document is not an object"};
    auto need = [&](const char* key, auto pred, const char* what) {
        if (!j.contains(key)) {
            p.push_back(std::string("missing key ") + key);
        } else if (!pred(j.at(key))) {
            p.push_back(std::string(key) + " must be " + what);
        }
    };
    need("schema_version", [](const json& v) { return v.is_number_integer() && v.get<int>() == schema_version; },
         "1");
    need("change_points",
         [](const json& v) {
             if (!v.is_array()) return false;
             for (const json& x : v) {
                 if (!x.is_number_integer() || x.get<long>() < 1) return false;
             }
             return true;
         },
         "an array of positive integers");
    need("lag", [](const json& v) { return v.is_number_integer() && v.get<int>() >= 1; }, "a positive integer");
    auto mats = [](const json& v) {
        if (!v.is_array()) return false;
        for (const json& m : v) {
            if (!m.is_array()) return false;
            for (const json& row : m) {
                if (!row.is_array() || row.size() != m[0].size()) return false;
                for (const json& x : row) {
                    if (!x.is_number()) return false;
                }
            }
        }
        return true;
    };
    need("sparse_mats", mats, "an array of matrices");
    need("lowrank_mats", [&](const json& v) { return v.is_null() || mats(v); }, "null or an array of matrices");
    need("elapsed_seconds", [](const json& v) { return v.is_number() && v.get<double>() >= 0.0; },
         "a non-negative number");
    if (p.empty() && j["sparse_mats"].size() != j["change_points"].size() + 1) {
        p.push_back("sparse_mats must hold one matrix per segment");
    }
    return p;
}

std::string save_result(const DetectionResult& result, const RunManifest& manifest, const std::string& path)
{
    json doc = to_json(result);
    doc["manifest"] = to_json(manifest);
    atomic_write(path, doc.dump(2) + "\n");
    return manifest_digest(manifest);
}

DetectionResult load_result(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return result_from_json(j);
}

namespace {

const char* method_name(datagen::Method m)
{
    switch (m) {
    case datagen::Method::sparse: return "sparse";
    case datagen::Method::group_sparse: return "group_sparse";
    case datagen::Method::fixed_lowrank_sparse: return "fixed_lowrank_sparse";
    case datagen::Method::lowrank_sparse: return "lowrank_sparse";
    }
    return "sparse";
}

datagen::Method method_of(const std::string& s)
{
    if (s == "sparse") return datagen::Method::sparse;
    if (s == "group_sparse") return datagen::Method::group_sparse;
    if (s == "fixed_lowrank_sparse") return datagen::Method::fixed_lowrank_sparse;
    if (s == "lowrank_sparse") return datagen::Method::lowrank_sparse;
    throw ParseError("unknown method " + s);
}

const char* pattern_name(datagen::PatternKind k)
{
    switch (k) {
    case datagen::PatternKind::off_diagonal: return "off_diagonal";
    case datagen::PatternKind::diagonal: return "diagonal";
    case datagen::PatternKind::random: return "random";
    }
    return "off_diagonal";
}

datagen::PatternKind pattern_of(const std::string& s)
{
    if (s == "off_diagonal") return datagen::PatternKind::off_diagonal;
    if (s == "diagonal") return datagen::PatternKind::diagonal;
    if (s == "random") return datagen::PatternKind::random;
    throw ParseError("unknown pattern " + s);
}

json transitions_json(const std::vector<TransitionSet>& ts)
{
    json a = json::array();
    for (const TransitionSet& t : ts) a.push_back(matrices_json(t.lags));
    return a;
}

}  // namespace

json to_json(const datagen::GenerationSpec& s)
{
    json j{{"method", method_name(s.method)},
           {"T", s.T},
           {"p", s.p},
           {"q", s.q},
           {"lags_vector", s.lags_vector},
           {"break_points", s.break_points},
           {"pattern", pattern_name(s.pattern.kind)},
           {"density", s.pattern.density},
           {"signals", s.signals},
           {"group_type", s.group_type == GroupOrientation::column ? "column" : "row"},
           {"group_index", s.group_index},
           {"rank", s.rank},
           {"singular_vals", s.singular_vals},
           {"info_ratio", s.info_ratio},
           {"spectral_radius", s.spectral_radius},
           {"skip", s.skip},
           {"seed", s.seed},
           {"noise_scales", s.noise_scales}};
    j["transitions"] = s.transitions ? transitions_json(*s.transitions) : json(nullptr);
    return j;
}

datagen::GenerationSpec spec_from_json(const json& j)
{
    try {
        datagen::GenerationSpec s;
        s.method = method_of(j.at("method").get<std::string>());
        s.T = j.at("T").get<int>();
        s.p = j.at("p").get<int>();
        s.q = j.value("q", 1);
        s.lags_vector = j.value("lags_vector", std::vector<int>{});
        s.break_points = j.at("break_points").get<std::vector<int>>();
        s.pattern.kind = pattern_of(j.value("pattern", std::string("off_diagonal")));
        s.pattern.density = j.value("density", std::vector<double>{});
        s.signals = j.value("signals", std::vector<double>{});
        s.group_type = j.value("group_type", std::string("column")) == "row" ? GroupOrientation::row
                                                                              : GroupOrientation::column;
        s.group_index = j.value("group_index", std::vector<std::vector<int>>{});
        s.rank = j.value("rank", std::vector<int>{});
        s.singular_vals = j.value("singular_vals", std::vector<double>{});
        s.info_ratio = j.value("info_ratio", std::vector<double>{});
        s.spectral_radius = j.value("spectral_radius", 0.9);
        s.skip = j.value("skip", 50);
        s.seed = j.value("seed", std::uint64_t{1});
        s.noise_scales = j.value("noise_scales", std::vector<double>{1.0});
        if (j.contains("transitions") && !j["transitions"].is_null()) {
            std::vector<TransitionSet> ts;
            for (const json& seg : j["transitions"]) ts.emplace_back(matrices_from(seg));
            s.transitions = std::move(ts);
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("generation spec: ") + e.what());
    }
}

json ground_truth_json(const datagen::GenerationSpec& spec, const datagen::Simulation& sim)
{
    json j{{"schema_version", schema_version},
           {"spec", to_json(spec)},
           {"change_points", sim.model.break_points},
           {"transitions", transitions_json(sim.model.segments)},
           {"noise_scales", sim.model.noise_scales}};
    j["lowrank"] = sim.lowrank.empty() ? json(nullptr) : matrices_json(sim.lowrank);
    j["sparse"] = sim.sparse.empty() ? json(nullptr) : matrices_json(sim.sparse);
    return j;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json mean_std_json(const eval::MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

json to_json(const eval::SimulationSummary& s)
{
    json rows = json::array();
    for (const eval::CpRow& r : s.rows) {
        rows.push_back({{"truth", r.truth}, {"mean", r.mean}, {"std", r.std}, {"selection_rate", r.selection_rate}});
    }
    json reps = json::array();
    for (const eval::ReplicateRecord& r : s.replicates) {
        json rec{{"index", r.index},
                 {"seed", r.seed},
                 {"change_points", r.change_points},
                 {"hausdorff", finite_or_null(r.hausdorff)},
                 {"seconds", r.seconds},
                 {"error", r.error}};
        rec["support"] = r.support ? json{{"sen", r.support->sen},
                                          {"spc", r.support->spc},
                                          {"acc", r.support->acc},
                                          {"mcc", r.support->mcc}}
                                   : json(nullptr);
        reps.push_back(std::move(rec));
    }
    return json{{"schema_version", schema_version},
                {"T", s.T},
                {"L", s.L},
                {"threshold", s.threshold},
                {"truth", s.truth},
                {"selection", rows},
                {"hausdorff", {{"mean", s.hausdorff_mean}, {"std", s.hausdorff_std}, {"median", s.hausdorff_median}}},
                {"hausdorff_flagged", s.hausdorff_flagged},
                {"support",
                 {{"sen", mean_std_json(s.sen)},
                  {"spc", mean_std_json(s.spc)},
                  {"acc", mean_std_json(s.acc)},
                  {"mcc", mean_std_json(s.mcc)}}},
                {"failed", s.failed},
                {"mean_seconds", s.mean_seconds},
                {"replicates", reps}};
}

std::string summary_table(const eval::SimulationSummary& s)
{
    const std::string rule(69, '=');
    auto banner = [&](const std::string& title) {
        const std::string t = " " + title + " ";
        const std::size_t left = (rule.size() - t.size()) / 2;
        return std::string(left, '=') + t + std::string(rule.size() - left - t.size(), '=') + "\n";
    };
    char buf[160];
    std::string out = banner("Selection rate:");
    out += "    Truth   Mean    Std Selection rate\n";
    for (std::size_t j = 0; j < s.rows.size(); ++j) {
        const eval::CpRow& r = s.rows[j];
        std::snprintf(buf, sizeof buf, "%zu %7.5f %6.4f %6.4f %14.4g\n", j + 1, r.truth, r.mean, r.std,
                      r.selection_rate);
        out += buf;
    }
    out += banner("Hausdorff distance:");
    out += "    Mean    Std Median\n";
    std::snprintf(buf, sizeof buf, "1 %6.4g %6.4g %6.4g\n", s.hausdorff_mean, s.hausdorff_std, s.hausdorff_median);
    out += buf;
    out += banner("Statistical Measurement:");
    out += "        SEN    SPC    ACC    MCC\n";
    std::snprintf(buf, sizeof buf, "Mean %6.4f %6.4f %6.4f %6.4f\n", s.sen.mean, s.spc.mean, s.acc.mean, s.mcc.mean);
    out += buf;
    std::snprintf(buf, sizeof buf, "Std  %6.4f %6.4f %6.4f %6.4f\n", s.sen.std, s.spc.std, s.acc.std, s.mcc.std);
    out += buf;
    out += "Incorrect estimation replication:";
    if (s.failed.empty()) out += " NULL";
    for (int i : s.failed) out += " " + std::to_string(i + 1);
    out += "\n";
    out += banner("Computational Time:");
    std::snprintf(buf, sizeof buf, "Averaged running time: %.3f seconds\n", s.mean_seconds);
    out += buf;
    out += rule + "\n";
    return out;
}

}  // namespace varseg::io
