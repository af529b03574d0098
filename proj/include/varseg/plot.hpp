#pragma once

#include "varseg/core.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace varseg::plot {

enum class Kind { cp, param, density, granger };
enum class Layout { circle, star, nicely };

Kind kind_of(const std::string& name);      ///< ConfigError on unknown names
Layout layout_of(const std::string& name);

/// Per-segment transition (sparse plus low-rank part), p x pq.
std::vector<Matrix> segment_transitions(const DetectionResult& result);

/// Fraction of entries with |value| > threshold, per segment.
std::vector<double> density_values(const DetectionResult& result, double threshold);

/// Directed edges (i, j), 0-based, meaning series i Granger-causes series j:
/// |Phi^(l)(j, i)| > threshold for some lag l.
std::vector<std::pair<int, int>> granger_edges(const Matrix& phi, double threshold);

/// Node positions in the unit square.
std::vector<std::pair<double, double>> layout_nodes(int p, const std::vector<std::pair<int, int>>& edges,
                                                    Layout layout, std::uint64_t seed);

std::string cp_svg(const TimeSeries& data, const std::vector<int>& change_points, const std::string& color = "red");
std::string param_svg(const DetectionResult& result);
std::string density_svg(const DetectionResult& result, double threshold);
std::string granger_svg(const Matrix& phi, double threshold, Layout layout, std::uint64_t seed);

struct RenderOptions {
    Kind kind = Kind::cp;
    double threshold = 0.1;
    Layout layout = Layout::circle;
    std::uint64_t seed = 1;
    std::string cp_color = "red";
};

/// Writes the figure(s) and returns the paths. granger writes one file per
/// segment, named <stem>_seg<j>.svg next to `path`.
std::vector<std::string> render_figures(const DetectionResult& result, const TimeSeries& data,
                                        const RenderOptions& options, const std::string& path);

}  // namespace varseg::plot
