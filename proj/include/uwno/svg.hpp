#pragma once

// Self-contained SVG emitters for line plots and heatmaps. Output bytes are a
// pure function of the input: fixed canvas, fixed palettes, fixed %.6g number
// formatting.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uwno/errors.hpp"

namespace uwno {

namespace detail {

inline std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % 8];
}

// Piecewise-linear sequential colormap (dark blue -> cyan -> yellow).
inline std::string heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    static const double stops[5][3] = {{13, 8, 135},
                                       {84, 39, 143},
                                       {33, 113, 181},
                                       {65, 182, 196},
                                       {255, 237, 160}};
    const double pos = t * 4.0;
    const int k = std::min(3, (int)pos);
    const double f = pos - k;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                  (int)std::lround(stops[k][0] + f * (stops[k + 1][0] - stops[k][0])),
                  (int)std::lround(stops[k][1] + f * (stops[k + 1][1] - stops[k][1])),
                  (int)std::lround(stops[k][2] + f * (stops[k + 1][2] - stops[k][2])));
    return buf;
}

}  // namespace detail

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
};

/// Polyline chart; axes are linear with 5% margins.
inline std::string svg_line_plot(const std::vector<SvgSeries>& series,
                                 const std::string& title = "") {
    if (series.empty()) throw ValueError("svg_line_plot: no series");
    const double W = 760, H = 480, L = 64, R = 16, T = 36, B = 44;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            throw ValueError("svg_line_plot: series '" + s.label + "' is empty or ragged");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double mx = 0.05 * (xmax - xmin), my = 0.05 * (ymax - ymin);
    xmin -= mx; xmax += mx; ymin -= my; ymax += my;
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    if (!title.empty())
        os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
           << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        os << "<text x=\"" << detail::fmt6(px(xv)) << "\" y=\"" << H - B + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << detail::fmt6(xv) << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << detail::fmt6(py(yv) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
           << detail::fmt6(yv) << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        os << "<polyline fill=\"none\" stroke=\"" << detail::series_color(si)
           << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            os << detail::fmt6(px(s.x[i])) << "," << detail::fmt6(py(s.y[i])) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 8 << "\" y=\"" << T + 16 + 16 * (double)si
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
           << detail::series_color(si) << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

/// Heatmap of an ny x nx grid of values (row-major, row 0 at the bottom).
inline std::string svg_heatmap(const std::vector<double>& values, std::size_t nx,
                               std::size_t ny, const std::string& title = "") {
    if (values.size() != nx * ny || nx == 0 || ny == 0)
        throw ValueError("svg_heatmap: expected nx*ny values");
    double vmin = 1e300, vmax = -1e300;
    for (double v : values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (vmax == vmin) vmax = vmin + 1;
    const double cell = std::max(2.0, std::floor(640.0 / std::max(nx, ny)));
    const double W = cell * nx + 32, H = cell * ny + (title.empty() ? 32 : 56);
    const double x0 = 16, y0 = title.empty() ? 16 : 40;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    if (!title.empty())
        os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
           << title << "</text>\n";
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const double t = (values[j * nx + i] - vmin) / (vmax - vmin);
            os << "<rect x=\"" << detail::fmt6(x0 + cell * (double)i) << "\" y=\""
               << detail::fmt6(y0 + cell * (double)(ny - 1 - j)) << "\" width=\""
               << detail::fmt6(cell) << "\" height=\"" << detail::fmt6(cell) << "\" fill=\""
               << detail::heat_color(t) << "\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace uwno
