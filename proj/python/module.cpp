#include "varseg/cli.hpp"
#include "varseg/datagen.hpp"
#include "varseg/evalsuite.hpp"
#include "varseg/io.hpp"
#include "varseg/lstsp.hpp"
#include "varseg/tbss.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace varseg;

namespace {

PenaltyKind penalty_of(const std::string& name)
{
    if (name == "sparse") return PenaltyKind::sparse;
    if (name == "group") return PenaltyKind::group_sparse;
    if (name == "fls") return PenaltyKind::fixed_lowrank_sparse;
    throw ConfigError("tbss penalty must be sparse, group or fls, got '" + name + "'");
}

GroupKind group_kind_of(const std::string& name)
{
    if (name == "columnwise-separate") return GroupKind::columnwise_separate;
    if (name == "columnwise-simultaneous") return GroupKind::columnwise_simultaneous;
    if (name == "rowwise-separate") return GroupKind::rowwise_separate;
    if (name == "rowwise-simultaneous") return GroupKind::rowwise_simultaneous;
    if (name == "hierarchical") return GroupKind::hierarchical_lag;
    if (name == "index") return GroupKind::explicit_index;
    throw ConfigError("unknown group kind '" + name + "'");
}

DetectionResult run_tbss(const Matrix& data, int q, const std::string& penalty, std::optional<double> mu, bool refit,
                         std::optional<int> block_size, std::vector<double> lambda1, std::vector<double> lambda2,
                         const std::string& group_kind, std::vector<std::vector<int>> groups, std::uint64_t cv_seed)
{
    tbss::TbssConfig c;
    c.q = q;
    c.penalty = penalty_of(penalty);
    c.mu = mu;
    c.refit = refit;
    c.block_size = block_size;
    c.lambda1_grid = std::move(lambda1);
    c.lambda2_grid = std::move(lambda2);
    c.cv_seed = cv_seed;
    if (c.penalty == PenaltyKind::group_sparse) {
        Grouping g;
        g.kind = group_kind_of(group_kind);
        g.groups = std::move(groups);
        c.grouping = g;
    }
    py::gil_scoped_release nogil;
    return tbss::tbss_detect(TimeSeries(data), c).result;
}

DetectionResult run_lstsp(const Matrix& data, std::optional<double> lambda, std::optional<double> mu,
                          std::optional<int> window, std::optional<int> step, int skip, std::optional<double> omega)
{
    lstsp::LstspConfig c;
    if (lambda.has_value() != mu.has_value()) throw ConfigError("give lambda and mu together");
    if (lambda) {
        const lstsp::Penalty w{*lambda, *mu};
        c.window_penalty = std::array<lstsp::Penalty, 2>{w, w};
    }
    c.window = window;
    c.step = step;
    c.skip = skip;
    c.omega = omega;
    py::gil_scoped_release nogil;
    return lstsp::lstsp_detect(TimeSeries(data), c).result;
}

py::dict simulate(const std::string& spec_json)
{
    const auto spec = io::spec_from_json(nlohmann::json::parse(spec_json));
    datagen::Simulation sim;
    {
        py::gil_scoped_release nogil;
        sim = datagen::simulate(spec);
    }
    py::dict out;
    out["series"] = sim.series.values();
    out["noise"] = sim.noise;
    out["change_points"] = sim.model.break_points;
    std::vector<Matrix> stacked;
    for (const auto& seg : sim.model.segments) stacked.push_back(seg.stacked());
    out["transitions"] = stacked;
    out["lowrank"] = sim.lowrank;
    out["sparse"] = sim.sparse;
    return out;
}

py::tuple run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "varseg");
    std::ostringstream out, err;
    int rc;
    {
        py::gil_scoped_release nogil;
        rc = cli::cli_main(args, out, err);
    }
    return py::make_tuple(rc, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Change point detection for piecewise-stationary VAR models";

    static py::exception<Error> base(m, "VarsegError", PyExc_RuntimeError);
    static py::exception<ConfigError> config(m, "ConfigError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config, e.what());
        } catch (const Error& e) {
            py::set_error(base, e.what());
        }
    });

    py::class_<DetectionResult>(m, "DetectionResult")
        .def_readonly("change_points", &DetectionResult::change_points)
        .def_readonly("sparse_mats", &DetectionResult::sparse_mats)
        .def_readonly("lowrank_mats", &DetectionResult::lowrank_mats)
        .def_readonly("lag", &DetectionResult::lag)
        .def_readonly("elapsed_seconds", &DetectionResult::elapsed_seconds)
        .def("to_json", [](const DetectionResult& r) { return io::to_json(r).dump(); })
        .def("__repr__", [](const DetectionResult& r) {
            std::ostringstream s;
            s << "DetectionResult(change_points=[";
            for (std::size_t i = 0; i < r.change_points.size(); ++i) s << (i ? ", " : "") << r.change_points[i];
            s << "], lag=" << r.lag << ")";
            return s.str();
        });

    m.def("_simulate", &simulate, py::arg("spec_json"));
    m.def("tbss", &run_tbss, py::arg("data"), py::kw_only(), py::arg("q") = 1, py::arg("penalty") = "sparse",
          py::arg("mu") = py::none(), py::arg("refit") = false, py::arg("block_size") = py::none(),
          py::arg("lambda1") = std::vector<double>{}, py::arg("lambda2") = std::vector<double>{},
          py::arg("group_kind") = "columnwise-separate", py::arg("groups") = std::vector<std::vector<int>>{},
          py::arg("cv_seed") = 1,
          "TBSS detection on a T x p array; change points are 1-based first indices of each new regime.");
    m.def("lstsp", &run_lstsp, py::arg("data"), py::kw_only(), py::arg("lam") = py::none(), py::arg("mu") = py::none(),
          py::arg("window") = py::none(), py::arg("step") = py::none(), py::arg("skip") = 5,
          py::arg("omega") = py::none(), "LSTSP detection for low-rank plus sparse transitions.");
    m.def(
        "select_lag",
        [](const Matrix& data, int max_lag) {
            eval::LagSelection sel;
            {
                py::gil_scoped_release nogil;
                sel = eval::bic_lag_select(TimeSeries(data), max_lag, tbss::TbssConfig{});
            }
            py::dict out;
            out["lag"] = sel.lag;
            out["bic"] = sel.bic;
            out["change_points"] = sel.change_points;
            out["warnings"] = sel.warnings;
            return out;
        },
        py::arg("data"), py::arg("max_lag") = 4);
    m.def("hausdorff", &eval::hausdorff, py::arg("a"), py::arg("b"));
    m.def("selection_rate", &eval::selection_rate, py::arg("estimates"), py::arg("truth"), py::arg("T"),
          py::arg("L") = 5);
    m.def(
        "support_metrics",
        [](const std::vector<Matrix>& est, const std::vector<Matrix>& truth, double threshold) {
            const auto s = eval::support_metrics(est, truth, threshold);
            return py::dict(py::arg("sen") = s.sen, py::arg("spc") = s.spc, py::arg("acc") = s.acc,
                            py::arg("mcc") = s.mcc);
        },
        py::arg("estimates"), py::arg("truth"), py::arg("threshold") = 0.1);
    m.def("cli", &run_cli, py::arg("args"), "Runs the command line tool in-process; returns (code, stdout, stderr).");
    m.attr("__version__") = io::tool_version;
}
