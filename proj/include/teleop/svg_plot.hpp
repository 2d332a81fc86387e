#ifndef TELEOP_SVG_PLOT_HPP
#define TELEOP_SVG_PLOT_HPP

/** @file
 * Minimal SVG line plots: vertically stacked panels sharing a width, linear
 * or logarithmic x axis, legend per panel.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "teleop/error.hpp"

namespace teleop::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f4e9c";
    bool dashed = false;
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<Series> series;
};

struct Figure {
    std::string title;
    double width = 720.0;
    double panel_height = 260.0;
    std::vector<Panel> panels;
};

inline const char* participant_color = "#1f4e9c";
inline const char* environment_color = "#c0392b";

/// Roughly `target` evenly spaced ticks at 1, 2 or 5 times a power of ten.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    std::vector<double> ticks;
    if (!std::isfinite(lo) || !std::isfinite(hi)) return ticks;
    if (hi < lo) std::swap(lo, hi);
    if (hi == lo) return {lo};
    const double raw = (hi - lo) / std::max(target, 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    const double first = std::ceil(lo / step - 1e-9) * step;
    for (double t = first; t <= hi + step * 1e-9; t += step)
        ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
    return ticks;
}

/// Decades covering [lo, hi]; both must be positive.
inline std::vector<double> decade_ticks(double lo, double hi) {
    std::vector<double> ticks;
    if (!(lo > 0.0) || !(hi > 0.0)) return ticks;
    for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
        const double t = std::pow(10.0, e);
        if (t >= lo * (1 - 1e-9) && t <= hi * (1 + 1e-9)) ticks.push_back(t);
    }
    return ticks;
}

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

}  // namespace detail

inline std::string render(const Figure& fig) {
    constexpr double left = 70.0, right = 20.0, top = 36.0, bottom = 46.0, title_h = 28.0;
    const double total_h = title_h + fig.panel_height * static_cast<double>(fig.panels.size());
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(fig.width) << "\" height=\""
       << detail::num(total_h) << "\" viewBox=\"0 0 " << detail::num(fig.width) << ' ' << detail::num(total_h)
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << detail::num(fig.width / 2) << "\" y=\"19\" text-anchor=\"middle\" font-size=\"14\">"
       << detail::escape(fig.title) << "</text>\n";

    for (std::size_t p = 0; p < fig.panels.size(); ++p) {
        const Panel& panel = fig.panels[p];
        const double y0 = title_h + fig.panel_height * static_cast<double>(p);
        const double px0 = left, px1 = fig.width - right;
        const double py0 = y0 + top, py1 = y0 + fig.panel_height - bottom;

        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& s : panel.series) {
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                if (panel.log_x && !(s.x[i] > 0.0)) continue;
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
        if (!std::isfinite(xmin)) {
            xmin = panel.log_x ? 1.0 : 0.0;
            xmax = panel.log_x ? 10.0 : 1.0;
            ymin = 0.0;
            ymax = 1.0;
        }
        if (xmax == xmin) xmax = panel.log_x ? xmin * 10.0 : xmin + 1.0;
        if (ymax == ymin) {
            ymin -= 0.5 * std::max(std::abs(ymin), 1.0);
            ymax += 0.5 * std::max(std::abs(ymax), 1.0);
        }
        const double pad = 0.05 * (ymax - ymin);
        ymin -= pad;
        ymax += pad;
        const std::vector<double> yt = nice_ticks(ymin, ymax);
        const auto fx = [&](double x) {
            const double u = panel.log_x ? (std::log10(x) - std::log10(xmin)) / (std::log10(xmax) - std::log10(xmin))
                                         : (x - xmin) / (xmax - xmin);
            return px0 + u * (px1 - px0);
        };
        const auto fy = [&](double y) { return py1 - (y - ymin) / (ymax - ymin) * (py1 - py0); };

        os << "<g>\n";
        os << "<text x=\"" << detail::num((px0 + px1) / 2) << "\" y=\"" << detail::num(y0 + 22)
           << "\" text-anchor=\"middle\" font-size=\"12\">" << detail::escape(panel.title) << "</text>\n";
        os << "<rect x=\"" << detail::num(px0) << "\" y=\"" << detail::num(py0) << "\" width=\""
           << detail::num(px1 - px0) << "\" height=\"" << detail::num(py1 - py0)
           << "\" fill=\"none\" stroke=\"#444\"/>\n";

        const std::vector<double> xt = panel.log_x ? decade_ticks(xmin, xmax) : nice_ticks(xmin, xmax);
        for (double t : xt) {
            const double x = fx(t);
            os << "<line x1=\"" << detail::num(x) << "\" y1=\"" << detail::num(py0) << "\" x2=\"" << detail::num(x)
               << "\" y2=\"" << detail::num(py1) << "\" stroke=\"#ddd\"/>\n";
            os << "<text x=\"" << detail::num(x) << "\" y=\"" << detail::num(py1 + 14)
               << "\" text-anchor=\"middle\">" << detail::tick_label(t) << "</text>\n";
        }
        for (double t : yt) {
            const double y = fy(t);
            os << "<line x1=\"" << detail::num(px0) << "\" y1=\"" << detail::num(y) << "\" x2=\"" << detail::num(px1)
               << "\" y2=\"" << detail::num(y) << "\" stroke=\"#ddd\"/>\n";
            os << "<text x=\"" << detail::num(px0 - 6) << "\" y=\"" << detail::num(y + 4)
               << "\" text-anchor=\"end\">" << detail::tick_label(t) << "</text>\n";
        }
        os << "<text x=\"" << detail::num((px0 + px1) / 2) << "\" y=\"" << detail::num(py1 + 32)
           << "\" text-anchor=\"middle\">" << detail::escape(panel.x_label) << "</text>\n";
        os << "<text x=\"16\" y=\"" << detail::num((py0 + py1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
           << detail::num((py0 + py1) / 2) << ")\">" << detail::escape(panel.y_label) << "</text>\n";

        for (std::size_t k = 0; k < panel.series.size(); ++k) {
            const Series& s = panel.series[k];
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
            if (s.dashed) os << " stroke-dasharray=\"6 4\"";
            os << " points=\"";
            bool first = true;
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                if (panel.log_x && !(s.x[i] > 0.0)) continue;
                if (!first) os << ' ';
                os << detail::num(fx(s.x[i])) << ',' << detail::num(fy(s.y[i]));
                first = false;
            }
            os << "\"/>\n";

            const double ly = py0 + 14 + 16 * static_cast<double>(k);
            const double lx = px1 - 150;
            os << "<line x1=\"" << detail::num(lx) << "\" y1=\"" << detail::num(ly - 4) << "\" x2=\"" << detail::num(lx + 24)
               << "\" y2=\"" << detail::num(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
            if (s.dashed) os << " stroke-dasharray=\"6 4\"";
            os << "/>\n";
            os << "<text x=\"" << detail::num(lx + 30) << "\" y=\"" << detail::num(ly) << "\">" << detail::escape(s.label)
               << "</text>\n";
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void save(const Figure& fig, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << render(fig);
    if (!out) throw Error("failed writing " + path);
}

}  // namespace teleop::svg

#endif  // TELEOP_SVG_PLOT_HPP
