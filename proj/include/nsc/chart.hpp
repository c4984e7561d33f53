#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"

namespace nsc {

// ========================= Tiny SVG line charts =============================
//
// Dependency-free plotting for run artifacts: each chart is a single SVG
// file with axes, tick labels, an optional legend, and one polyline per
// series.  Good enough to eyeball trajectories and loss curves without
// leaving the terminal's working directory.

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline const char* series_color(size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

inline std::string tick_label(double v) {
    std::ostringstream ss;
    if (v == 0.0) return "0";
    const double av = std::abs(v);
    if (av >= 1e4 || av < 1e-2) {
        ss.precision(1);
        ss << std::scientific << v;
    } else {
        ss.precision(4);
        ss << v;
    }
    return ss.str();
}

/// Round a raw span to a pleasant tick spacing (1/2/5 ladder).
inline double nice_step(double span, int target_ticks) {
    if (span <= 0.0) return 1.0;
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double step;
    if (frac <= 1.0) step = 1.0;
    else if (frac <= 2.0) step = 2.0;
    else if (frac <= 5.0) step = 5.0;
    else step = 10.0;
    return step * mag;
}

} // namespace detail

/// Render one chart to an SVG string.
inline std::string render_line_chart(const std::string& title, const std::string& xlabel,
                                     const std::string& ylabel,
                                     const std::vector<Series>& series) {
    const double width = 720, height = 440;
    const double ml = 72, mr = 18, mt = 40, mb = 52; // margins
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const Series& s : series) {
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (!any) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                any = true;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
    }
    if (!any) { xmin = ymin = 0; xmax = ymax = 1; }
    if (xmax - xmin < 1e-12) { xmax += 0.5; xmin -= 0.5; }
    if (ymax - ymin < 1e-12) { ymax += 0.5; ymin -= 0.5; }
    // a little vertical breathing room
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='24' text-anchor='middle' "
        << "font-family='sans-serif' font-size='16'>" << title << "</text>\n";

    // gridlines + ticks
    const double xstep = detail::nice_step(xmax - xmin, 6);
    const double ystep = detail::nice_step(ymax - ymin, 6);
    svg << "<g font-family='sans-serif' font-size='11' fill='#444'>\n";
    for (double v = std::ceil(xmin / xstep) * xstep; v <= xmax + 1e-9 * xstep; v += xstep) {
        const double X = px(v);
        svg << "<line x1='" << X << "' y1='" << mt << "' x2='" << X << "' y2='" << mt + ph
            << "' stroke='#e5e5e5'/>\n";
        svg << "<text x='" << X << "' y='" << mt + ph + 16 << "' text-anchor='middle'>"
            << detail::tick_label(v) << "</text>\n";
    }
    for (double v = std::ceil(ymin / ystep) * ystep; v <= ymax + 1e-9 * ystep; v += ystep) {
        const double Y = py(v);
        svg << "<line x1='" << ml << "' y1='" << Y << "' x2='" << ml + pw << "' y2='" << Y
            << "' stroke='#e5e5e5'/>\n";
        svg << "<text x='" << ml - 6 << "' y='" << Y + 4 << "' text-anchor='end'>"
            << detail::tick_label(v) << "</text>\n";
    }
    svg << "</g>\n";

    // axes
    svg << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
        << "' fill='none' stroke='#333'/>\n";
    svg << "<text x='" << ml + pw / 2 << "' y='" << height - 12
        << "' text-anchor='middle' font-family='sans-serif' font-size='13'>" << xlabel
        << "</text>\n";
    svg << "<text x='16' y='" << mt + ph / 2
        << "' text-anchor='middle' font-family='sans-serif' font-size='13' transform='rotate(-90 16 "
        << mt + ph / 2 << ")'>" << ylabel << "</text>\n";

    // series
    for (size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        svg << "<polyline fill='none' stroke='" << detail::series_color(si)
            << "' stroke-width='1.5' points='";
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        svg << "'/>\n";
    }

    // legend
    if (series.size() > 1 || (series.size() == 1 && !series[0].label.empty())) {
        double ly = mt + 10;
        for (size_t si = 0; si < series.size(); ++si) {
            svg << "<line x1='" << ml + pw - 130 << "' y1='" << ly << "' x2='" << ml + pw - 106
                << "' y2='" << ly << "' stroke='" << detail::series_color(si)
                << "' stroke-width='2'/>\n";
            svg << "<text x='" << ml + pw - 100 << "' y='" << ly + 4
                << "' font-family='sans-serif' font-size='12'>" << series[si].label
                << "</text>\n";
            ly += 18;
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void write_line_chart_file(const std::string& path, const std::string& title,
                                  const std::string& xlabel, const std::string& ylabel,
                                  const std::vector<Series>& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << render_line_chart(title, xlabel, ylabel, series);
}

} // namespace nsc
