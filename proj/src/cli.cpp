#include "varseg/cli.hpp"

#include "varseg/evalsuite.hpp"
#include "varseg/io.hpp"
#include "varseg/lstsp.hpp"
#include "varseg/plot.hpp"
#include "varseg/tbss.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <set>
#include <sstream>
#include <variant>

namespace varseg::cli {

namespace {

using io::json;

struct GenFlags {
    std::string method = "sparse";
    int T = 0;
    int p = 0;
    int q = 1;
    std::vector<int> lags_vector;
    std::vector<int> break_points;
    std::string pattern = "off-diagonal";
    std::vector<double> density;
    std::vector<double> signals;
    std::string group_type = "column";
    std::string group_index;
    std::vector<int> rank;
    std::vector<double> singular_vals;
    std::vector<double> info_ratio;
    double spectral_radius = 0.9;
    int burn_in = 50;
    std::uint64_t seed = 1;
    std::vector<double> noise_scales{1.0};
    std::string spec_file;
};

struct DetectFlags {
    std::string algo = "tbss";
    std::string penalty;
    int q = 1;
    std::optional<int> block_size;
    std::vector<int> blocks;
    std::vector<double> lambda1;
    std::vector<double> lambda2;
    std::vector<int> an_grid;
    std::optional<double> omega;
    bool kmeans_omega = false;
    std::optional<double> eta;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::vector<double> mu;
    bool refit = false;
    std::optional<int> refit_radius;
    std::optional<double> refit_lambda;
    std::optional<double> refit_mu;
    std::uint64_t cv_seed = 1;
    std::string group_kind = "columnwise-separate";
    std::string group_index;
    std::vector<double> lambda;
    std::optional<double> screen_lambda;
    std::optional<double> screen_mu;
    double omega_constant = 0.1;
    std::optional<int> window;
    std::optional<int> step;
    int skip = 5;
    bool cv = false;
    int folds = 5;
};

std::vector<std::vector<int>> parse_groups(const std::string& text)
{
    std::vector<std::vector<int>> out;
    std::stringstream groups(text);
    std::string g;
    while (std::getline(groups, g, ';')) {
        std::vector<int> members;
        std::stringstream items(g);
        std::string item;
        while (std::getline(items, item, ',')) {
            try {
                std::size_t used = 0;
                members.push_back(std::stoi(item, &used));
                if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("bad group index entry '" + item + "'");
            }
        }
        if (!members.empty()) out.push_back(std::move(members));
    }
    return out;
}

void add_gen(CLI::App* sub, GenFlags& g)
{
    sub->add_option("--method", g.method, "sparse, group, fls or ls")->capture_default_str();
    sub->add_option("--T", g.T, "series length");
    sub->add_option("--p", g.p, "dimension");
    sub->add_option("--q", g.q, "lag order")->capture_default_str();
    sub->add_option("--lags-vector", g.lags_vector, "lag order per segment");
    sub->add_option("--break-points", g.break_points, "change points (1-based, first index of each new regime)");
    sub->add_option("--pattern", g.pattern, "off-diagonal, diagonal or random")->capture_default_str();
    sub->add_option("--density", g.density, "edge probabilities of the random pattern");
    sub->add_option("--signals", g.signals, "nonzero magnitudes per segment (or per segment and lag)");
    sub->add_option("--group-type", g.group_type, "column or row")->capture_default_str();
    sub->add_option("--group-index", g.group_index, "dense columns/rows, 1-based, e.g. 1,2,3;4,5");
    sub->add_option("--rank", g.rank, "low-rank component rank per segment");
    sub->add_option("--singular-vals", g.singular_vals, "singular values of the low-rank components");
    sub->add_option("--info-ratio", g.info_ratio, "information ratio per segment");
    sub->add_option("--spectral-radius", g.spectral_radius)->capture_default_str();
    sub->add_option("--burn-in", g.burn_in, "discarded initial observations")->capture_default_str();
    sub->add_option("--seed", g.seed)->capture_default_str();
    sub->add_option("--noise-scales", g.noise_scales, "noise standard deviation per segment")->capture_default_str();
}

datagen::Method gen_method(const std::string& m)
{
    if (m == "sparse") return datagen::Method::sparse;
    if (m == "group") return datagen::Method::group_sparse;
    if (m == "fls") return datagen::Method::fixed_lowrank_sparse;
    if (m == "ls") return datagen::Method::lowrank_sparse;
    throw ConfigError("unknown method '" + m + "' (sparse, group, fls, ls)");
}

datagen::GenerationSpec build_spec(const GenFlags& g)
{
    if (!g.spec_file.empty()) {
        json j;
        try {
            j = json::parse(io::read_file(g.spec_file));
        } catch (const json::exception& e) {
            throw ParseError(g.spec_file + ": " + e.what());
        }
        return io::spec_from_json(j.contains("spec") ? j["spec"] : j);
    }
    if (g.T < 1 || g.p < 1) throw ConfigError("--T and --p are required");
    datagen::GenerationSpec s;
    s.method = gen_method(g.method);
    s.T = g.T;
    s.p = g.p;
    s.q = g.q;
    s.lags_vector = g.lags_vector;
    s.break_points = g.break_points;
    s.break_points.push_back(g.T + 1);
    if (g.pattern == "off-diagonal") {
        s.pattern.kind = datagen::PatternKind::off_diagonal;
    } else if (g.pattern == "diagonal") {
        s.pattern.kind = datagen::PatternKind::diagonal;
    } else if (g.pattern == "random") {
        s.pattern.kind = datagen::PatternKind::random;
    } else {
        throw ConfigError("unknown pattern '" + g.pattern + "'");
    }
    s.pattern.density = g.density;
    s.signals = g.signals;
    if (g.group_type != "column" && g.group_type != "row") throw ConfigError("group type must be column or row");
    s.group_type = g.group_type == "row" ? GroupOrientation::row : GroupOrientation::column;
    s.group_index = parse_groups(g.group_index);
    s.rank = g.rank;
    s.singular_vals = g.singular_vals;
    s.info_ratio = g.info_ratio;
    s.spectral_radius = g.spectral_radius;
    s.skip = g.burn_in;
    s.seed = g.seed;
    s.noise_scales = g.noise_scales;
    s.validate();
    return s;
}

void add_detect(CLI::App* sub, DetectFlags& d, bool with_algo)
{
    if (with_algo) {
        sub->add_option("--algo", d.algo, "tbss or lstsp")->capture_default_str();
        sub->add_option("--penalty", d.penalty, "sparse, group, fls (tbss) or ls (lstsp)");
    }
    sub->add_option("--lag", d.q, "VAR lag q for tbss")->capture_default_str();
    sub->add_option("--block-size", d.block_size, "tbss block size b_n");
    sub->add_option("--blocks", d.blocks, "explicit tbss block end points");
    sub->add_option("--lambda1", d.lambda1, "tbss fused-difference weights (grid)");
    sub->add_option("--lambda2", d.lambda2, "tbss coefficient weights (grid)");
    sub->add_option("--an-grid", d.an_grid, "tbss local radius grid");
    sub->add_option("--omega", d.omega, "screening penalty omega");
    sub->add_flag("--kmeans-omega", d.kmeans_omega, "tbss: choose omega by two-means instead of BIC");
    sub->add_option("--eta", d.eta, "tbss local fit weight");
    sub->add_option("--tol", d.tol, "solver tolerance (tbss 1e-2, lstsp 1e-4)");
    sub->add_option("--max-iter", d.max_iter, "solver iterations (tbss 50, lstsp 100)");
    sub->add_option("--mu", d.mu, "nuclear weight (fls: one value; lstsp: one, or left and right)");
    sub->add_flag("--refit", d.refit, "tbss: refit segment models");
    sub->add_option("--refit-radius", d.refit_radius, "points trimmed around each change point in the refit");
    sub->add_option("--refit-lambda", d.refit_lambda, "refit sparsity weight");
    sub->add_option("--refit-mu", d.refit_mu, "lstsp refit nuclear weight");
    sub->add_option("--cv-seed", d.cv_seed, "tbss cross-validation seed")->capture_default_str();
    sub->add_option("--group-kind", d.group_kind,
                    "columnwise-separate, columnwise-simultaneous, rowwise-separate, rowwise-simultaneous, "
                    "hierarchical or index")
        ->capture_default_str();
    sub->add_option("--groups", d.group_index, "explicit groups for --group-kind index, 0-based flat indices, e.g. 0,1;2,3");
    sub->add_option("--lambda", d.lambda, "lstsp sparsity weight (one, or left and right)");
    sub->add_option("--screen-lambda", d.screen_lambda, "lstsp screening sparsity weight");
    sub->add_option("--screen-mu", d.screen_mu, "lstsp screening nuclear weight");
    sub->add_option("--omega-constant", d.omega_constant, "lstsp C in omega = C log n log p")
        ->capture_default_str();
    sub->add_option("--window", d.window, "lstsp window length h");
    sub->add_option("--step", d.step, "lstsp window step l");
    sub->add_option("--skip", d.skip, "lstsp boundary trim")->capture_default_str();
    sub->add_flag("--cv", d.cv, "lstsp: cross-validate window weights");
    sub->add_option("--folds", d.folds)->capture_default_str();
}

GroupKind group_kind(const std::string& k)
{
    if (k == "columnwise-separate") return GroupKind::columnwise_separate;
    if (k == "columnwise-simultaneous") return GroupKind::columnwise_simultaneous;
    if (k == "rowwise-separate") return GroupKind::rowwise_separate;
    if (k == "rowwise-simultaneous") return GroupKind::rowwise_simultaneous;
    if (k == "hierarchical") return GroupKind::hierarchical_lag;
    if (k == "index") return GroupKind::explicit_index;
    throw ConfigError("unknown group kind '" + k + "'");
}

tbss::TbssConfig build_tbss(const DetectFlags& d)
{
    tbss::TbssConfig c;
    const std::string pen = d.penalty.empty() ? "sparse" : d.penalty;
    if (pen == "sparse") {
        c.penalty = PenaltyKind::sparse;
    } else if (pen == "group") {
        c.penalty = PenaltyKind::group_sparse;
        Grouping g;
        g.kind = group_kind(d.group_kind);
        if (g.kind == GroupKind::explicit_index) g.groups = parse_groups(d.group_index);
        c.grouping = g;
    } else if (pen == "fls") {
        c.penalty = PenaltyKind::fixed_lowrank_sparse;
        if (d.mu.size() != 1) throw ConfigError("--penalty fls needs one --mu value");
        c.mu = d.mu[0];
    } else if (pen == "ls") {
        throw ConfigError("--penalty ls needs --algo lstsp");
    } else {
        throw ConfigError("unknown penalty '" + pen + "'");
    }
    c.q = d.q;
    c.block_size = d.block_size;
    if (!d.blocks.empty()) c.blocks = d.blocks;
    c.lambda1_grid = d.lambda1;
    c.lambda2_grid = d.lambda2;
    if (!d.an_grid.empty()) c.an_grid = d.an_grid;
    c.use_bic_for_omega = !d.kmeans_omega;
    c.omega = d.omega;
    c.eta = d.eta;
    if (d.tol) c.tol = *d.tol;
    if (d.max_iter) c.max_iter = *d.max_iter;
    c.refit = d.refit;
    c.refit_radius = d.refit_radius;
    c.refit_lambda = d.refit_lambda;
    c.cv_seed = d.cv_seed;
    c.validate();
    return c;
}

lstsp::LstspConfig build_lstsp(const DetectFlags& d)
{
    if (!d.penalty.empty() && d.penalty != "ls") throw ConfigError("--algo lstsp only supports --penalty ls");
    lstsp::LstspConfig c;
    if (!d.lambda.empty() || !d.mu.empty()) {
        if (d.lambda.empty() || d.mu.empty() || d.lambda.size() > 2 || d.mu.size() > 2) {
            throw ConfigError("lstsp needs --lambda and --mu together, one or two values each");
        }
        c.window_penalty = std::array<lstsp::Penalty, 2>{lstsp::Penalty{d.lambda.front(), d.mu.front()},
                                                         lstsp::Penalty{d.lambda.back(), d.mu.back()}};
    }
    if (d.screen_lambda || d.screen_mu) {
        if (!d.screen_lambda || !d.screen_mu) throw ConfigError("--screen-lambda and --screen-mu go together");
        c.screen_penalty = lstsp::Penalty{*d.screen_lambda, *d.screen_mu};
    }
    if (d.refit_lambda || d.refit_mu) {
        if (!d.refit_lambda || !d.refit_mu) throw ConfigError("--refit-lambda and --refit-mu go together for lstsp");
        c.refit_penalty = lstsp::Penalty{*d.refit_lambda, *d.refit_mu};
    }
    c.omega = d.omega;
    c.omega_constant = d.omega_constant;
    c.window = d.window;
    c.step = d.step;
    c.skip = d.skip;
    if (d.tol) c.solver.tol = *d.tol;
    if (d.max_iter) c.solver.max_iter = *d.max_iter;
    c.cv = d.cv;
    c.folds = d.folds;
    c.refit_radius = d.refit_radius;
    c.validate();
    return c;
}

using DetectorConfig = std::variant<tbss::TbssConfig, lstsp::LstspConfig>;

DetectorConfig build_detector(const DetectFlags& d)
{
    if (d.algo == "tbss") return build_tbss(d);
    if (d.algo == "lstsp") return build_lstsp(d);
    throw ConfigError("unknown algorithm '" + d.algo + "' (tbss, lstsp)");
}

DetectionResult run_detector(const DetectorConfig& c, const TimeSeries& data, std::ostream& err)
{
    if (const auto* t = std::get_if<tbss::TbssConfig>(&c)) {
        tbss::TbssOutput o = tbss::tbss_detect(data, *t);
        for (const std::string& w : o.diagnostics.warnings) err << "warning: " << w << "\n";
        return std::move(o.result);
    }
    return lstsp::lstsp_detect(data, std::get<lstsp::LstspConfig>(c)).result;
}

// Options actually in effect: explicit values and defaults.
json config_snapshot(const CLI::App* sub)
{
    json j = json::object();
    for (const CLI::Option* o : sub->get_options()) {
        const std::string name = o->get_single_name();
        if (name == "help" || name == "config") continue;
        if (o->count() > 0) {
            const auto& r = o->results();
            j[name] = r.size() == 1 ? json(r[0]) : json(r);
        } else if (const std::string d = o->get_default_str(); !d.empty()) {
            if (d.size() >= 2 && d.front() == '[' && d.back() == ']') {
                json items = json::array();
                std::stringstream ss(d.substr(1, d.size() - 2));
                for (std::string item; std::getline(ss, item, ',');) items.push_back(item);
                j[name] = items.size() == 1 ? items[0] : items;
            } else {
                j[name] = d;
            }
        }
    }
    return j;
}

// Expands `key = value` lines of a flat config file into flags, skipping
// keys that are also given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args)
{
    std::vector<std::string> out;
    std::string path;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config" && i + 1 < args.size()) {
            path = args[++i];
            continue;
        }
        if (a.rfind("--config=", 0) == 0) {
            path = a.substr(9);
            continue;
        }
        if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos
                                                                                             : a.find('=') - 2));
        out.push_back(a);
    }
    if (path.empty()) return out;
    std::vector<std::string> extra;
    std::istringstream in(io::read_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        std::string value;
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key.erase(eq);
        } else {
            std::string tok;
            if (ls >> tok && tok != "=") value = tok;
        }
        std::vector<std::string> values;
        if (!value.empty()) values.push_back(value);
        for (std::string tok; ls >> tok;) values.push_back(tok);
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": missing key");
        if (given.count(key)) continue;
        extra.push_back("--" + key);
        for (const std::string& v : values) {
            if (v == "true" && values.size() == 1) continue;  // flag
            extra.push_back(v);
        }
    }
    // Subcommand name first, then file flags, then command-line flags.
    if (out.empty()) return extra;
    std::vector<std::string> merged{out.front()};
    merged.insert(merged.end(), extra.begin(), extra.end());
    merged.insert(merged.end(), out.begin() + 1, out.end());
    return merged;
}

std::string write_json(const std::string& path, const json& doc)
{
    const std::string text = doc.dump(2) + "\n";
    io::atomic_write(path, text);
    return text;
}

io::RunManifest start_manifest(const std::string& command, const CLI::App* sub)
{
    io::RunManifest m;
    m.command = command;
    m.config = config_snapshot(sub);
    m.started = io::utc_now();
    return m;
}

void finish(io::RunManifest& m, std::ostream& out)
{
    m.finished = io::utc_now();
    out << "manifest sha256: " << io::manifest_digest(m) << "\n";
}

}  // namespace

int cli_main(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err)
{
    CLI::App app("Change point detection for piecewise stationary VAR models", "varseg");
    app.set_version_flag("--version", io::tool_version);
    app.require_subcommand(1);

    GenFlags sim_g;
    std::string sim_out, sim_truth;
    CLI::App* sim = app.add_subcommand("simulate", "generate a piecewise VAR series");
    add_gen(sim, sim_g);
    sim->add_option("--out", sim_out, "CSV output")->required();
    sim->add_option("--truth", sim_truth, "ground-truth JSON output");

    DetectFlags det_d;
    std::string det_in, det_out;
    CLI::App* det = app.add_subcommand("detect", "detect change points in a CSV series");
    add_detect(det, det_d, true);
    det->add_option("--input", det_in, "CSV input")->required();
    det->add_option("--out", det_out, "result JSON output")->required();

    GenFlags ev_g;
    DetectFlags ev_d;
    int nreps = 1, critical = 5;
    double ev_threshold = 0.1;
    std::string ev_out;
    CLI::App* ev = app.add_subcommand("evaluate", "replicated simulation study");
    add_gen(ev, ev_g);
    ev->add_option("--spec", ev_g.spec_file, "generation spec JSON (or a ground-truth file from simulate)");
    add_detect(ev, ev_d, true);
    ev->add_option("--nreps", nreps)->capture_default_str();
    ev->add_option("--L", critical, "success window constant")->capture_default_str();
    ev->add_option("--threshold", ev_threshold, "support threshold")->capture_default_str();
    ev->add_option("--out", ev_out, "summary JSON output");

    DetectFlags lag_d;
    std::string lag_in, lag_out;
    int max_lag = 4;
    CLI::App* lag = app.add_subcommand("select-lag", "choose the VAR lag by BIC");
    add_detect(lag, lag_d, false);
    lag->add_option("--input", lag_in, "CSV input")->required();
    lag->add_option("--max-lag", max_lag)->capture_default_str();
    lag->add_option("--out", lag_out, "JSON output with the BIC per lag");

    std::string pl_result, pl_in, pl_kind = "cp", pl_layout = "circle", pl_out, pl_color = "red";
    double pl_threshold = 0.1;
    std::uint64_t pl_seed = 1;
    CLI::App* pl = app.add_subcommand("plot", "render SVG figures of a result");
    pl->add_option("--result", pl_result, "result JSON")->required();
    pl->add_option("--input", pl_in, "CSV data (needed for cp)");
    pl->add_option("--kind", pl_kind, "cp, param, density or granger")->capture_default_str();
    pl->add_option("--threshold", pl_threshold)->capture_default_str();
    pl->add_option("--layout", pl_layout, "circle, star or nicely")->capture_default_str();
    pl->add_option("--seed", pl_seed, "seed of the nicely layout")->capture_default_str();
    pl->add_option("--color", pl_color, "change point line color")->capture_default_str();
    pl->add_option("--out", pl_out, "SVG output (granger: stem of the per-segment files)")->required();

    for (CLI::App* s : {sim, det, ev, lag, pl}) {
        s->add_option("--config", "flat key = value file; command-line flags take precedence");
    }

    if (raw.size() <= 1) {
        err << app.help();
        return 2;
    }

    try {
        std::vector<std::string> args(raw.begin() + 1, raw.end());
        args = expand_config(args);
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return 0;
        const CLI::App* used = &app;
        for (CLI::App* s : {sim, det, ev, lag, pl}) {
            if (raw[1] == s->get_name()) used = s;
        }
        err << used->help();
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*sim) {
            io::RunManifest m = start_manifest("simulate", sim);
            const datagen::GenerationSpec spec = build_spec(sim_g);
            m.seed = spec.seed;
            const datagen::Simulation s = datagen::simulate(spec);
            io::save_csv(s.series, sim_out);
            finish(m, out);
            if (!sim_truth.empty()) {
                json doc = io::ground_truth_json(spec, s);
                doc["manifest"] = io::to_json(m);
                write_json(sim_truth, doc);
            }
            return 0;
        }
        if (*det) {
            io::RunManifest m = start_manifest("detect", det);
            const DetectorConfig cfg = build_detector(det_d);
            const std::string bytes = io::read_file(det_in);
            m.input_digest = io::sha256_hex(bytes);
            if (det_d.algo == "tbss") m.seed = det_d.cv_seed;
            const TimeSeries data = io::parse_csv(bytes);
            const DetectionResult r = run_detector(cfg, data, err);
            m.finished = io::utc_now();
            io::save_result(r, m, det_out);
            out << "change points:";
            for (int t : r.change_points) out << " " << t;
            out << "\nmanifest sha256: " << io::manifest_digest(m) << "\n";
            return 0;
        }
        if (*ev) {
            io::RunManifest m = start_manifest("evaluate", ev);
            const datagen::GenerationSpec spec = build_spec(ev_g);
            m.seed = spec.seed;
            const DetectorConfig cfg = build_detector(ev_d);
            eval::ReplicationOptions opt;
            opt.L = critical;
            opt.threshold = ev_threshold;
            const eval::SimulationSummary s =
                std::holds_alternative<tbss::TbssConfig>(cfg)
                    ? eval::run_replications(nreps, spec, std::get<tbss::TbssConfig>(cfg), opt)
                    : eval::run_replications(nreps, spec, std::get<lstsp::LstspConfig>(cfg), opt);
            out << io::summary_table(s);
            m.finished = io::utc_now();
            if (!ev_out.empty()) {
                json doc = io::to_json(s);
                doc["spec"] = io::to_json(spec);
                doc["manifest"] = io::to_json(m);
                write_json(ev_out, doc);
            }
            out << "manifest sha256: " << io::manifest_digest(m) << "\n";
            return 0;
        }
        if (*lag) {
            io::RunManifest m = start_manifest("select-lag", lag);
            if (!lag_d.penalty.empty()) throw ConfigError("select-lag takes no --penalty");
            const tbss::TbssConfig cfg = build_tbss(lag_d);
            const std::string bytes = io::read_file(lag_in);
            m.input_digest = io::sha256_hex(bytes);
            m.seed = lag_d.cv_seed;
            const eval::LagSelection sel = eval::bic_lag_select(io::parse_csv(bytes), max_lag, cfg);
            for (const std::string& w : sel.warnings) err << "warning: " << w << "\n";
            out << sel.lag << "\n";
            m.finished = io::utc_now();
            if (!lag_out.empty()) {
                json bic = json::array();
                for (const auto& b : sel.bic) bic.push_back(b ? json(*b) : json(nullptr));
                write_json(lag_out, json{{"schema_version", io::schema_version},
                                         {"lag", sel.lag},
                                         {"bic", bic},
                                         {"change_points", sel.change_points},
                                         {"warnings", sel.warnings},
                                         {"manifest", io::to_json(m)}});
            }
            out << "manifest sha256: " << io::manifest_digest(m) << "\n";
            return 0;
        }
        if (*pl) {
            io::RunManifest m = start_manifest("plot", pl);
            plot::RenderOptions opt;
            opt.kind = plot::kind_of(pl_kind);
            opt.layout = plot::layout_of(pl_layout);
            opt.threshold = pl_threshold;
            opt.seed = pl_seed;
            opt.cp_color = pl_color;
            m.seed = pl_seed;
            const std::string result_bytes = io::read_file(pl_result);
            std::string digest_input = result_bytes;
            json doc;
            try {
                doc = json::parse(result_bytes);
            } catch (const json::exception& e) {
                throw ParseError(pl_result + ": " + e.what());
            }
            const DetectionResult r = io::result_from_json(doc);
            TimeSeries data;
            if (opt.kind == plot::Kind::cp) {
                if (pl_in.empty()) throw ConfigError("--kind cp needs --input");
                const std::string bytes = io::read_file(pl_in);
                digest_input += bytes;
                data = io::parse_csv(bytes);
            }
            m.input_digest = io::sha256_hex(digest_input);
            for (const std::string& f : plot::render_figures(r, data, opt, pl_out)) out << "wrote " << f << "\n";
            finish(m, out);
            return 0;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int cli_main(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace varseg::cli
