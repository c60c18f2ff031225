#include "steerlab/util/svg.hpp"

#include <algorithm>
#include <cstdio>

#include "steerlab/util/common.hpp"

namespace steerlab {

namespace {

std::string cell_color(double normalized) {
    if (normalized < 0.0) {
        return "#cccccc";
    }
    // red (0) -> white (0.5) -> blue (1)
    const double v = std::clamp(normalized, 0.0, 1.0);
    int r, g, b;
    if (v < 0.5) {
        const double t = v / 0.5;
        r = 220;
        g = static_cast<int>(80 + t * 165);
        b = static_cast<int>(80 + t * 165);
    } else {
        const double t = (v - 0.5) / 0.5;
        r = static_cast<int>(245 - t * 185);
        g = static_cast<int>(245 - t * 125);
        b = static_cast<int>(245 - t * 25);
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string svg_heatmap(const std::string& title, const std::vector<std::string>& col_labels,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::vector<double>>& normalized,
                        const std::vector<std::vector<double>>& raw) {
    const int cell_w = 86, cell_h = 42, left = 90, top = 60;
    const int width = left + cell_w * static_cast<int>(col_labels.size()) + 20;
    const int height = top + cell_h * static_cast<int>(row_labels.size()) + 20;
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"monospace\">\n";
    out += "<text x=\"10\" y=\"24\" font-size=\"15\">" + escape(title) + "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
        out += "<text x=\"" + std::to_string(left + static_cast<int>(c) * cell_w + cell_w / 2) +
               "\" y=\"" + std::to_string(top - 8) +
               "\" font-size=\"12\" text-anchor=\"middle\">" + escape(col_labels[c]) +
               "</text>\n";
    }
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        const int y = top + static_cast<int>(r) * cell_h;
        out += "<text x=\"" + std::to_string(left - 8) + "\" y=\"" +
               std::to_string(y + cell_h / 2 + 4) +
               "\" font-size=\"12\" text-anchor=\"end\">" + escape(row_labels[r]) + "</text>\n";
        for (std::size_t c = 0; c < col_labels.size(); ++c) {
            const int x = left + static_cast<int>(c) * cell_w;
            const double nv = normalized[r][c];
            const double rv = raw[r][c];
            out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell_w - 2) + "\" height=\"" +
                   std::to_string(cell_h - 2) + "\" fill=\"" + cell_color(nv) +
                   "\" stroke=\"#666666\"/>\n";
            const std::string label = rv < 0.0 ? "n/a" : format_double(rv, 3);
            out += "<text x=\"" + std::to_string(x + cell_w / 2 - 1) + "\" y=\"" +
                   std::to_string(y + cell_h / 2 + 4) +
                   "\" font-size=\"12\" text-anchor=\"middle\">" + label + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::size_t>& counts) {
    const int bar_w = 64, gap = 18, left = 50, top = 54, chart_h = 180;
    std::size_t max_count = 1;
    for (std::size_t c : counts) {
        max_count = std::max(max_count, c);
    }
    const int width = left + static_cast<int>(labels.size()) * (bar_w + gap) + 20;
    const int height = top + chart_h + 50;
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"monospace\">\n";
    out += "<text x=\"10\" y=\"24\" font-size=\"15\">" + escape(title) + "</text>\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int x = left + static_cast<int>(i) * (bar_w + gap);
        const int h = static_cast<int>(static_cast<double>(counts[i]) /
                                       static_cast<double>(max_count) * chart_h);
        const int y = top + chart_h - h;
        out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
               std::to_string(bar_w) + "\" height=\"" + std::to_string(h) +
               "\" fill=\"#4878b0\"/>\n";
        out += "<text x=\"" + std::to_string(x + bar_w / 2) + "\" y=\"" + std::to_string(y - 6) +
               "\" font-size=\"12\" text-anchor=\"middle\">" + std::to_string(counts[i]) +
               "</text>\n";
        out += "<text x=\"" + std::to_string(x + bar_w / 2) + "\" y=\"" +
               std::to_string(top + chart_h + 18) +
               "\" font-size=\"12\" text-anchor=\"middle\">" + escape(labels[i]) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace steerlab
