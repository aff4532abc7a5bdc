#include "relactrl/svg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relactrl {

void write_score_bar_chart(const std::string& path, const std::string& title,
                           const std::vector<int64_t>& layers,
                           const std::vector<double>& scores,
                           const std::set<int64_t>& highlighted) {
    if (layers.size() != scores.size() || layers.empty()) {
        throw std::invalid_argument("svg chart: layers and scores must be nonempty and equal");
    }
    const int width = 840, height = 320;
    const int left = 50, right = 20, top = 34, bottom = 40;
    const int plot_w = width - left - right;
    const int plot_h = height - top - bottom;
    const double max_score = std::max(1e-12, *std::max_element(scores.begin(), scores.end()));
    const double slot = double(plot_w) / double(layers.size());
    const double bar_w = std::max(2.0, slot * 0.72);

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";
    // axes
    s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = tick / 4.0;
        const double y = top + plot_h - frac * plot_h;
        s << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\""
          << y << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
          << frac * max_score << "</text>\n";
    }
    for (size_t i = 0; i < layers.size(); ++i) {
        const double h = plot_h * (scores[i] / max_score);
        const double x = left + slot * double(i) + (slot - bar_w) / 2.0;
        const double y = top + plot_h - h;
        const bool hot = highlighted.count(layers[i]) > 0;
        s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\""
          << h << "\" fill=\"" << (hot ? "#d9534f" : "#7aa6c2") << "\"/>\n";
        s << "<text x=\"" << x + bar_w / 2.0 << "\" y=\"" << top + plot_h + 14
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">"
          << layers[i] << "</text>\n";
    }
    s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">layer index"
      << "</text>\n";
    s << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write svg file: " + path);
    out << s.str();
}

}  // namespace relactrl
