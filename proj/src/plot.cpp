#include "varseg/plot.hpp"

#include "varseg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

namespace varseg::plot {

Kind kind_of(const std::string& name)
{
    if (name == "cp") return Kind::cp;
    if (name == "param") return Kind::param;
    if (name == "density") return Kind::density;
    if (name == "granger") return Kind::granger;
    throw ConfigError("unknown plot kind '" + name + "' (cp, param, density, granger)");
}

Layout layout_of(const std::string& name)
{
    if (name == "circle") return Layout::circle;
    if (name == "star") return Layout::star;
    if (name == "nicely") return Layout::nicely;
    throw ConfigError("unknown layout '" + name + "' (circle, star, nicely)");
}

std::vector<Matrix> segment_transitions(const DetectionResult& result)
{
    std::vector<Matrix> out = result.sparse_mats;
    if (result.lowrank_mats) {
        for (std::size_t j = 0; j < out.size() && j < result.lowrank_mats->size(); ++j) {
            out[j] += (*result.lowrank_mats)[j];
        }
    }
    return out;
}

std::vector<double> density_values(const DetectionResult& result, double threshold)
{
    if (!(threshold >= 0.0)) throw ConfigError("threshold must be non-negative");
    std::vector<double> out;
    for (const Matrix& m : segment_transitions(result)) {
        const double n = static_cast<double>(m.size());
        out.push_back(n == 0.0 ? 0.0 : static_cast<double>((m.array().abs() > threshold).count()) / n);
    }
    return out;
}

std::vector<std::pair<int, int>> granger_edges(const Matrix& phi, double threshold)
{
    const int p = static_cast<int>(phi.rows());
    if (p == 0 || phi.cols() % p != 0) throw ConfigError("transition matrix must be p x pq");
    const int q = static_cast<int>(phi.cols()) / p;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            bool on = false;
            for (int l = 0; l < q && !on; ++l) on = std::abs(phi(j, l * p + i)) > threshold;
            if (on) edges.emplace_back(i, j);
        }
    }
    return edges;
}

namespace {

using Point = std::pair<double, double>;

std::vector<Point> ring(int p, const std::vector<int>& members, double radius)
{
    std::vector<Point> pos(p, {0.5, 0.5});
    const double n = static_cast<double>(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / n - std::numbers::pi / 2.0;
        pos[members[k]] = {0.5 + radius * std::cos(a), 0.5 + radius * std::sin(a)};
    }
    return pos;
}

// Fruchterman-Reingold on the undirected skeleton.
std::vector<Point> force_directed(int p, const std::vector<std::pair<int, int>>& edges, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> pos(p);
    for (auto& x : pos) x = {u(rng), u(rng)};
    if (p < 2) return std::vector<Point>(p, {0.5, 0.5});
    const double k = std::sqrt(1.0 / p);
    double temp = 0.1;
    for (int it = 0; it < 300; ++it) {
        std::vector<Point> disp(p, {0.0, 0.0});
        for (int a = 0; a < p; ++a) {
            for (int b = a + 1; b < p; ++b) {
                const double dx = pos[a].first - pos[b].first, dy = pos[a].second - pos[b].second;
                const double d = std::max(std::hypot(dx, dy), 1e-6);
                const double f = k * k / d;
                disp[a].first += dx / d * f;
                disp[a].second += dy / d * f;
                disp[b].first -= dx / d * f;
                disp[b].second -= dy / d * f;
            }
        }
        for (const auto& [a, b] : edges) {
            if (a == b) continue;
            const double dx = pos[a].first - pos[b].first, dy = pos[a].second - pos[b].second;
            const double d = std::max(std::hypot(dx, dy), 1e-6);
            const double f = d * d / k;
            disp[a].first -= dx / d * f;
            disp[a].second -= dy / d * f;
            disp[b].first += dx / d * f;
            disp[b].second += dy / d * f;
        }
        for (int a = 0; a < p; ++a) {
            const double d = std::max(std::hypot(disp[a].first, disp[a].second), 1e-12);
            const double step = std::min(d, temp);
            pos[a].first += disp[a].first / d * step;
            pos[a].second += disp[a].second / d * step;
        }
        temp *= 0.985;
    }
    double x0 = pos[0].first, x1 = x0, y0 = pos[0].second, y1 = y0;
    for (const auto& [x, y] : pos) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
    const double span = std::max({x1 - x0, y1 - y0, 1e-9});
    for (auto& [x, y] : pos) {
        x = 0.1 + 0.8 * (x - x0) / span;
        y = 0.1 + 0.8 * (y - y0) / span;
    }
    return pos;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string header(double w, double h)
{
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) +
           "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12)
{
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
                         "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79"};

// Blue for negative, white at zero, red for positive.
std::string diverging(double v, double scale)
{
    const double t = scale > 0.0 ? std::clamp(v / scale, -1.0, 1.0) : 0.0;
    const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(t))));
    char buf[8];
    if (t >= 0.0) {
        std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
    } else {
        std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
    }
    return buf;
}

}  // namespace

std::vector<std::pair<double, double>> layout_nodes(int p, const std::vector<std::pair<int, int>>& edges,
                                                    Layout layout, std::uint64_t seed)
{
    if (p < 1) return {};
    std::vector<int> all(p);
    for (int i = 0; i < p; ++i) all[i] = i;
    switch (layout) {
    case Layout::circle: return ring(p, all, 0.4);
    case Layout::star: {
        std::vector<int> degree(p, 0);
        for (const auto& [a, b] : edges) {
            ++degree[a];
            if (a != b) ++degree[b];
        }
        const int hub = static_cast<int>(std::max_element(degree.begin(), degree.end()) - degree.begin());
        std::vector<int> rest;
        for (int i = 0; i < p; ++i) {
            if (i != hub) rest.push_back(i);
        }
        auto pos = ring(p, rest, 0.4);
        pos[hub] = {0.5, 0.5};
        return pos;
    }
    case Layout::nicely: return force_directed(p, edges, seed);
    }
    return ring(p, all, 0.4);
}

std::string cp_svg(const TimeSeries& data, const std::vector<int>& change_points, const std::string& color)
{
    const double w = 900, h = 420, left = 50, right = 20, top = 20, bottom = 40;
    const int T = data.length();
    const Matrix& v = data.values();
    double lo = v.size() ? v.minCoeff() : 0.0, hi = v.size() ? v.maxCoeff() : 1.0;
    if (hi <= lo) hi = lo + 1.0;
    auto sx = [&](double t) { return left + (w - left - right) * (T > 1 ? (t - 1.0) / (T - 1.0) : 0.5); };
    auto sy = [&](double y) { return top + (h - top - bottom) * (hi - y) / (hi - lo); };
    std::string s = header(w, h);
    s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(w - left - right) + "\" height=\"" +
         num(h - top - bottom) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int c = 0; c < data.dim(); ++c) {
        s += "<polyline fill=\"none\" stroke-width=\"0.6\" stroke=\"" + std::string(palette[c % 10]) + "\" points=\"";
        for (int r = 0; r < T; ++r) {
            if (r) s += ' ';
            s += num(sx(r + 1)) + "," + num(sy(v(r, c)));
        }
        s += "\"/>\n";
    }
    for (int t : change_points) {
        s += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(sx(t)) + "\" y2=\"" +
             num(h - bottom) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    }
    s += text(left + (w - left - right) / 2, h - 10, "Time");
    s += text(left, h - bottom + 15, "1");
    s += text(w - right, h - bottom + 15, std::to_string(T));
    s += "</svg>\n";
    return s;
}

std::string param_svg(const DetectionResult& result)
{
    const std::vector<Matrix> mats = segment_transitions(result);
    if (mats.empty()) throw ConfigError("result has no segment matrices");
    const double rows = static_cast<double>(mats[0].rows()), cols = static_cast<double>(mats[0].cols());
    const double cell = std::max(2.0, std::min(12.0, 240.0 / std::max(rows, cols)));
    const double gap = 20, top = 30;
    const double bw = cell * cols, bh = cell * rows;
    const double w = gap + static_cast<double>(mats.size()) * (bw + gap), h = top + bh + gap;
    double scale = 0.0;
    for (const Matrix& m : mats) scale = std::max(scale, max_abs(m));
    std::string s = header(w, h);
    for (std::size_t j = 0; j < mats.size(); ++j) {
        const double x0 = gap + static_cast<double>(j) * (bw + gap);
        s += text(x0 + bw / 2, top - 10, "segment " + std::to_string(j + 1));
        const Matrix& m = mats[j];
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                s += "<rect x=\"" + num(x0 + cell * c) + "\" y=\"" + num(top + cell * r) + "\" width=\"" +
                     num(cell) + "\" height=\"" + num(cell) + "\" fill=\"" + diverging(m(r, c), scale) + "\"/>\n";
            }
        }
        s += "<rect x=\"" + num(x0) + "\" y=\"" + num(top) + "\" width=\"" + num(bw) + "\" height=\"" + num(bh) +
             "\" fill=\"none\" stroke=\"black\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string density_svg(const DetectionResult& result, double threshold)
{
    const std::vector<double> d = density_values(result, threshold);
    const double bar = 60, gap = 30, top = 30, plot_h = 260, bottom = 40;
    const double w = gap + static_cast<double>(d.size()) * (bar + gap), h = top + plot_h + bottom;
    std::string s = header(w, h);
    for (std::size_t j = 0; j < d.size(); ++j) {
        const double x = gap + static_cast<double>(j) * (bar + gap);
        const double bh = plot_h * d[j];
        s += "<rect x=\"" + num(x) + "\" y=\"" + num(top + plot_h - bh) + "\" width=\"" + num(bar) + "\" height=\"" +
             num(bh) + "\" fill=\"#4c72b0\"/>\n";
        char label[32];
        std::snprintf(label, sizeof label, "%.4f", d[j]);
        s += text(x + bar / 2, top + plot_h - bh - 5, label);
        s += text(x + bar / 2, top + plot_h + 18, "segment " + std::to_string(j + 1));
    }
    s += "<line x1=\"" + num(gap / 2) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" + num(w - gap / 2) + "\" y2=\"" +
         num(top + plot_h) + "\" stroke=\"black\"/>\n";
    s += "</svg>\n";
    return s;
}

std::string granger_svg(const Matrix& phi, double threshold, Layout layout, std::uint64_t seed)
{
    if (!(threshold >= 0.0)) throw ConfigError("threshold must be non-negative");
    const int p = static_cast<int>(phi.rows());
    const auto edges = granger_edges(phi, threshold);
    const auto pos = layout_nodes(p, edges, layout, seed);
    const double size = 480, radius = 12;
    std::string s = header(size, size);
    s += "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" "
         "markerHeight=\"6\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#555555\"/></marker></defs>\n";
    for (const auto& [a, b] : edges) {
        const double ax = pos[a].first * size, ay = pos[a].second * size;
        const double bx = pos[b].first * size, by = pos[b].second * size;
        if (a == b) {
            s += "<circle cx=\"" + num(ax) + "\" cy=\"" + num(ay - radius - 6) + "\" r=\"7\" fill=\"none\" "
                 "stroke=\"#555555\" class=\"edge\"/>\n";
            continue;
        }
        const double d = std::max(std::hypot(bx - ax, by - ay), 1e-9);
        const double ux = (bx - ax) / d, uy = (by - ay) / d;
        s += "<line class=\"edge\" x1=\"" + num(ax + ux * radius) + "\" y1=\"" + num(ay + uy * radius) + "\" x2=\"" +
             num(bx - ux * radius) + "\" y2=\"" + num(by - uy * radius) +
             "\" stroke=\"#555555\" marker-end=\"url(#arrow)\"/>\n";
    }
    for (int i = 0; i < p; ++i) {
        const double x = pos[i].first * size, y = pos[i].second * size;
        s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"" + num(radius) +
             "\" fill=\"#f0c05a\" stroke=\"black\"/>\n";
        s += text(x, y + 4, std::to_string(i + 1), "middle", 10);
    }
    s += "</svg>\n";
    return s;
}

std::vector<std::string> render_figures(const DetectionResult& result, const TimeSeries& data,
                                        const RenderOptions& options, const std::string& path)
{
    if (!(options.threshold >= 0.0)) throw ConfigError("threshold must be non-negative");
    switch (options.kind) {
    case Kind::cp: io::atomic_write(path, cp_svg(data, result.change_points, options.cp_color)); return {path};
    case Kind::param: io::atomic_write(path, param_svg(result)); return {path};
    case Kind::density: io::atomic_write(path, density_svg(result, options.threshold)); return {path};
    case Kind::granger: {
        const std::filesystem::path base(path);
        const auto mats = segment_transitions(result);
        std::vector<std::string> out;
        for (std::size_t j = 0; j < mats.size(); ++j) {
            const std::filesystem::path file =
                base.parent_path() / (base.stem().string() + "_seg" + std::to_string(j + 1) + ".svg");
            io::atomic_write(file.string(), granger_svg(mats[j], options.threshold, options.layout, options.seed));
            out.push_back(file.string());
        }
        return out;
    }
    }
    return {};
}

}  // namespace varseg::plot
