#include "lossland/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lossland {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string esc(const std::string &s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string ramp_color(double t) {
    // blue (low) to red (high)
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(40 + t * (220 - 40)));
    const int g = static_cast<int>(std::lround(60 + (1.0 - std::fabs(t - 0.5) * 2.0) * 120));
    const int b = static_cast<int>(std::lround(220 - t * (220 - 40)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

struct Frame {
    double x0, y0, w, h;          // plot area in SVG pixels
    double xmin, xmax, ymin, ymax;  // data range

    double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

std::string svg_open(const PlotStyle &style) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width
      << "\" height=\"" << style.height << "\" viewBox=\"0 0 " << style.width << " "
      << style.height << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" fill=\"#ffffff\"/>\n";
    if (!style.title.empty()) {
        s << "<text x=\"" << style.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
             "font-family=\"sans-serif\" font-size=\"14\">"
          << esc(style.title) << "</text>\n";
    }
    return s.str();
}

std::string axes(const Frame &f, const PlotStyle &style) {
    std::ostringstream s;
    s << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.w)
      << "\" height=\"" << num(f.h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    if (!style.x_label.empty()) {
        s << "<text x=\"" << num(f.x0 + f.w / 2) << "\" y=\"" << num(f.y0 + f.h + 36)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
          << esc(style.x_label) << "</text>\n";
    }
    if (!style.y_label.empty()) {
        s << "<text x=\"14\" y=\"" << num(f.y0 + f.h / 2)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
             "transform=\"rotate(-90 14 "
          << num(f.y0 + f.h / 2) << ")\">" << esc(style.y_label) << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double t = k / 4.0;
        const double xv = f.xmin + t * (f.xmax - f.xmin);
        const double yv = f.ymin + t * (f.ymax - f.ymin);
        s << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.y0 + f.h + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
          << num(xv) << "</text>\n";
        s << "<text x=\"" << num(f.x0 - 6) << "\" y=\"" << num(f.py(yv) + 3)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(yv)
          << "</text>\n";
    }
    return s.str();
}

Frame make_frame(const PlotStyle &style, double xmin, double xmax, double ymin, double ymax) {
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    return {static_cast<double>(style.margin), static_cast<double>(style.margin),
            static_cast<double>(style.width - 2 * style.margin),
            static_cast<double>(style.height - 2 * style.margin),
            xmin, xmax, ymin, ymax};
}

void finite_range(const SurfaceGrid &grid, double &lo, double &hi, int &finite_cells) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    finite_cells = 0;
    for (double v : grid.losses) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++finite_cells;
    }
}

}  // namespace

LineFit least_squares_fit(const std::vector<double> &xs, const std::vector<double> &ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("least_squares_fit: need matching lists of at least 2 points");
    }
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) {
        throw std::invalid_argument("least_squares_fit: zero spread in x");
    }
    LineFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

std::string surface_heatmap_svg(const SurfaceGrid &grid, const PlotStyle &style) {
    if (grid.alphas.empty() || grid.betas.empty() || grid.losses.empty()) {
        throw std::invalid_argument("surface_heatmap_svg: empty grid");
    }
    double lo, hi;
    int finite_cells;
    finite_range(grid, lo, hi, finite_cells);
    if (finite_cells == 0) {
        throw std::invalid_argument("surface_heatmap_svg: no finite cells");
    }
    const double span = hi > lo ? hi - lo : 1.0;

    Frame f = make_frame(style, grid.alphas.front(), grid.alphas.back(),
                         grid.betas.front(), grid.betas.back());
    const double cw = f.w / static_cast<double>(grid.alphas.size());
    const double ch = f.h / static_cast<double>(grid.betas.size());

    std::ostringstream s;
    s << svg_open(style);
    for (size_t ai = 0; ai < grid.alphas.size(); ++ai) {
        for (size_t bi = 0; bi < grid.betas.size(); ++bi) {
            const double v = grid.at(ai, bi);
            const std::string color =
                std::isfinite(v) ? ramp_color((v - lo) / span) : "#b0b0b0";
            const double x = f.x0 + static_cast<double>(ai) * cw;
            const double y = f.y0 + f.h - static_cast<double>(bi + 1) * ch;
            s << "<rect class=\"cell\" x=\"" << num(x) << "\" y=\"" << num(y)
              << "\" width=\"" << num(cw) << "\" height=\"" << num(ch) << "\" fill=\""
              << color << "\"/>\n";
        }
    }
    s << axes(f, style);
    s << "</svg>\n";
    return s.str();
}

std::string surface_contour_svg(const SurfaceGrid &grid, int levels, const PlotStyle &style) {
    if (grid.alphas.size() < 2 || grid.betas.size() < 2) {
        throw std::invalid_argument("surface_contour_svg: need at least a 2x2 grid");
    }
    if (levels < 1) throw std::invalid_argument("surface_contour_svg: levels must be >= 1");
    double lo, hi;
    int finite_cells;
    finite_range(grid, lo, hi, finite_cells);
    if (finite_cells == 0) {
        throw std::invalid_argument("surface_contour_svg: no finite cells");
    }

    Frame f = make_frame(style, grid.alphas.front(), grid.alphas.back(),
                         grid.betas.front(), grid.betas.back());
    std::ostringstream s;
    s << svg_open(style);

    // marching squares over each 2x2 cell, linear interpolation on edges
    auto interp = [](double a, double b, double va, double vb, double level) {
        return a + (level - va) / (vb - va) * (b - a);
    };
    for (int l = 1; l <= levels; ++l) {
        const double level = lo + (hi - lo) * static_cast<double>(l) / (levels + 1);
        std::ostringstream path;
        for (size_t ai = 0; ai + 1 < grid.alphas.size(); ++ai) {
            for (size_t bi = 0; bi + 1 < grid.betas.size(); ++bi) {
                const double v00 = grid.at(ai, bi), v10 = grid.at(ai + 1, bi);
                const double v01 = grid.at(ai, bi + 1), v11 = grid.at(ai + 1, bi + 1);
                if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) ||
                    !std::isfinite(v11)) {
                    continue;
                }
                const double a0 = grid.alphas[ai], a1 = grid.alphas[ai + 1];
                const double b0 = grid.betas[bi], b1 = grid.betas[bi + 1];
                // crossing points on the four cell edges, in (alpha, beta)
                std::vector<std::pair<double, double>> pts;
                if ((v00 < level) != (v10 < level))
                    pts.emplace_back(interp(a0, a1, v00, v10, level), b0);
                if ((v01 < level) != (v11 < level))
                    pts.emplace_back(interp(a0, a1, v01, v11, level), b1);
                if ((v00 < level) != (v01 < level))
                    pts.emplace_back(a0, interp(b0, b1, v00, v01, level));
                if ((v10 < level) != (v11 < level))
                    pts.emplace_back(a1, interp(b0, b1, v10, v11, level));
                for (size_t i = 0; i + 1 < pts.size(); i += 2) {
                    path << "M" << num(f.px(pts[i].first)) << " " << num(f.py(pts[i].second))
                         << "L" << num(f.px(pts[i + 1].first)) << " "
                         << num(f.py(pts[i + 1].second));
                }
            }
        }
        const std::string d = path.str();
        if (!d.empty()) {
            s << "<path class=\"contour\" d=\"" << d << "\" fill=\"none\" stroke=\""
              << ramp_color(static_cast<double>(l) / (levels + 1))
              << "\" stroke-width=\"1.2\"/>\n";
        }
    }
    s << axes(f, style);
    s << "</svg>\n";
    return s.str();
}

std::string scatter_svg(const std::vector<ScatterSeries> &series, const PlotStyle &style) {
    size_t total = 0;
    for (const auto &sr : series) {
        if (sr.xs.size() != sr.ys.size()) {
            throw std::invalid_argument("scatter_svg: x/y length mismatch in series " + sr.label);
        }
        total += sr.xs.size();
    }
    if (total == 0) throw std::invalid_argument("scatter_svg: no data points");

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto &sr : series) {
        for (size_t i = 0; i < sr.xs.size(); ++i) {
            xmin = std::min(xmin, sr.xs[i]);
            xmax = std::max(xmax, sr.xs[i]);
            ymin = std::min(ymin, sr.ys[i]);
            ymax = std::max(ymax, sr.ys[i]);
        }
    }
    const double xpad = (xmax - xmin) * 0.05 + 1e-9;
    const double ypad = (ymax - ymin) * 0.05 + 1e-9;
    Frame f = make_frame(style, xmin - xpad, xmax + xpad, ymin - ypad, ymax + ypad);

    std::ostringstream meta;
    std::ostringstream s;
    s << svg_open(style);
    int li = 0;
    for (const auto &sr : series) {
        for (size_t i = 0; i < sr.xs.size(); ++i) {
            s << "<circle class=\"pt\" cx=\"" << num(f.px(sr.xs[i])) << "\" cy=\""
              << num(f.py(sr.ys[i])) << "\" r=\"3\" fill=\"" << sr.color << "\"/>\n";
        }
        if (sr.xs.size() >= 2) {
            try {
                const LineFit fit = least_squares_fit(sr.xs, sr.ys);
                const double y0 = fit.slope * f.xmin + fit.intercept;
                const double y1 = fit.slope * f.xmax + fit.intercept;
                s << "<line class=\"fit\" x1=\"" << num(f.px(f.xmin)) << "\" y1=\""
                  << num(f.py(y0)) << "\" x2=\"" << num(f.px(f.xmax)) << "\" y2=\""
                  << num(f.py(y1)) << "\" stroke=\"" << sr.color
                  << "\" stroke-dasharray=\"5 3\"/>\n";
                meta << "<fit series=\"" << esc(sr.label) << "\" slope=\"" << num(fit.slope)
                     << "\" intercept=\"" << num(fit.intercept) << "\"/>";
            } catch (const std::invalid_argument &) {
                // degenerate x spread: points only, no line
            }
        }
        if (!sr.label.empty()) {
            s << "<text x=\"" << num(f.x0 + f.w - 6) << "\" y=\"" << num(f.y0 + 14 + 14 * li)
              << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
              << sr.color << "\">" << esc(sr.label) << "</text>\n";
            ++li;
        }
    }
    s << "<metadata>" << meta.str() << "</metadata>\n";
    s << axes(f, style);
    s << "</svg>\n";
    return s.str();
}

std::string grouped_bars_svg(const std::vector<std::string> &series_labels,
                             const std::vector<BarGroup> &groups, const PlotStyle &style) {
    if (groups.empty() || series_labels.empty()) {
        throw std::invalid_argument("grouped_bars_svg: no data");
    }
    for (const auto &g : groups) {
        if (g.values.size() != series_labels.size()) {
            throw std::invalid_argument("grouped_bars_svg: series count mismatch in group " +
                                        g.label);
        }
        if (!g.errors.empty() && g.errors.size() != g.values.size()) {
            throw std::invalid_argument("grouped_bars_svg: error-bar count mismatch in group " +
                                        g.label);
        }
    }
    double ymax = 0.0, ymin = 0.0;
    for (const auto &g : groups) {
        for (size_t i = 0; i < g.values.size(); ++i) {
            const double e = g.errors.empty() ? 0.0 : g.errors[i];
            ymax = std::max(ymax, g.values[i] + e);
            ymin = std::min(ymin, g.values[i] - e);
        }
    }
    Frame f = make_frame(style, 0.0, static_cast<double>(groups.size()), ymin,
                         ymax + (ymax - ymin) * 0.08 + 1e-9);

    static const std::vector<std::string> palette = {"#1f6fb2", "#d95f02", "#1b9e77",
                                                     "#7570b3", "#e7298a"};
    const double group_w = f.w / static_cast<double>(groups.size());
    const double bar_w = group_w * 0.8 / static_cast<double>(series_labels.size());

    std::ostringstream s;
    s << svg_open(style);
    const double base_y = f.py(std::max(0.0, f.ymin));
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const BarGroup &g = groups[gi];
        const double gx = f.x0 + static_cast<double>(gi) * group_w + group_w * 0.1;
        for (size_t si = 0; si < g.values.size(); ++si) {
            const double x = gx + static_cast<double>(si) * bar_w;
            const double top = f.py(g.values[si]);
            s << "<rect class=\"bar\" x=\"" << num(x) << "\" y=\"" << num(std::min(top, base_y))
              << "\" width=\"" << num(bar_w * 0.9) << "\" height=\""
              << num(std::fabs(base_y - top)) << "\" fill=\"" << palette[si % palette.size()]
              << "\"/>\n";
            if (!g.errors.empty() && g.errors[si] > 0.0) {
                const double cx = x + bar_w * 0.45;
                const double y1 = f.py(g.values[si] + g.errors[si]);
                const double y2 = f.py(g.values[si] - g.errors[si]);
                s << "<line class=\"err\" x1=\"" << num(cx) << "\" y1=\"" << num(y1)
                  << "\" x2=\"" << num(cx) << "\" y2=\"" << num(y2)
                  << "\" stroke=\"#222222\"/>\n";
                s << "<line class=\"err\" x1=\"" << num(cx - 3) << "\" y1=\"" << num(y1)
                  << "\" x2=\"" << num(cx + 3) << "\" y2=\"" << num(y1)
                  << "\" stroke=\"#222222\"/>\n";
                s << "<line class=\"err\" x1=\"" << num(cx - 3) << "\" y1=\"" << num(y2)
                  << "\" x2=\"" << num(cx + 3) << "\" y2=\"" << num(y2)
                  << "\" stroke=\"#222222\"/>\n";
            }
        }
        s << "<text x=\"" << num(gx + group_w * 0.4) << "\" y=\"" << num(f.y0 + f.h + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
          << esc(g.label) << "</text>\n";
    }
    for (size_t si = 0; si < series_labels.size(); ++si) {
        s << "<text x=\"" << num(f.x0 + f.w - 6)
          << "\" y=\"" << num(f.y0 + 14 + 14 * static_cast<double>(si))
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
          << palette[si % palette.size()] << "\">" << esc(series_labels[si]) << "</text>\n";
    }
    s << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.w)
      << "\" height=\"" << num(f.h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    s << "</svg>\n";
    return s.str();
}

void write_svg(const std::string &svg, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << svg;
}

}  // namespace lossland
