#pragma once

// Minimal deterministic SVG line plots for report rendering.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace psim::svg {

struct Series {
    std::string label;
    std::vector<double> ys;
};

inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<Series>& series) {
    const int W = 860, H = 420, ml = 70, mr = 160, mt = 40, mb = 50;
    const int pw = W - ml - mr, ph = H - mt - mb;
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

    double ymin = 0.0, ymax = 1.0;
    size_t nmax = 1;
    bool first = true;
    for (const auto& s : series)
        for (double v : s.ys) {
            if (!std::isfinite(v)) continue;
            if (first) {
                ymin = ymax = v;
                first = false;
            } else {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
        }
    for (const auto& s : series) nmax = std::max(nmax, s.ys.size());
    if (ymax == ymin) ymax = ymin + 1.0;

    auto px = [&](size_t i) {
        return ml + pw * static_cast<double>(i) / static_cast<double>(std::max<size_t>(1, nmax - 1));
    };
    auto py = [&](double v) { return mt + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    f << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
    f << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
    // axes
    f << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + ph
      << "' stroke='black'/>\n";
    f << "<line x1='" << ml << "' y1='" << mt + ph << "' x2='" << ml + pw << "' y2='" << mt + ph
      << "' stroke='black'/>\n";
    f << "<text x='" << ml + pw / 2 << "' y='" << H - 12 << "' text-anchor='middle' font-size='12'>"
      << x_label << "</text>\n";
    f << "<text x='18' y='" << mt + ph / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 18 " << mt + ph / 2 << ")'>"
      << y_label << "</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        double v = ymin + (ymax - ymin) * tick / 4.0;
        double y = py(v);
        f << "<line x1='" << ml - 4 << "' y1='" << y << "' x2='" << ml << "' y2='" << y
          << "' stroke='black'/>\n";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", v);
        f << "<text x='" << ml - 8 << "' y='" << y + 4 << "' text-anchor='end' font-size='11'>"
          << buf << "</text>\n";
        size_t xi = nmax * tick / 4;
        if (xi >= nmax) xi = nmax - 1;
        f << "<text x='" << px(xi) << "' y='" << mt + ph + 16
          << "' text-anchor='middle' font-size='11'>" << xi << "</text>\n";
    }
    int ci = 0;
    for (const auto& s : series) {
        const char* color = kColors[ci % 8];
        f << "<polyline fill='none' stroke='" << color << "' stroke-width='1.4' points='";
        for (size_t i = 0; i < s.ys.size(); ++i) {
            if (!std::isfinite(s.ys[i])) continue;
            f << px(i) << "," << py(s.ys[i]) << " ";
        }
        f << "'/>\n";
        f << "<line x1='" << ml + pw + 10 << "' y1='" << mt + 14 + 18 * ci << "' x2='"
          << ml + pw + 30 << "' y2='" << mt + 14 + 18 * ci << "' stroke='" << color
          << "' stroke-width='2'/>\n";
        f << "<text x='" << ml + pw + 35 << "' y='" << mt + 18 + 18 * ci << "' font-size='11'>"
          << s.label << "</text>\n";
        ++ci;
    }
    f << "</svg>\n";
}

}  // namespace psim::svg
