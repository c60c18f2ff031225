#pragma once

#include <string>
#include <vector>

namespace steerlab {

// Heatmap with one cell per (row, col). normalized drives the color
// (blue = 1, red = 0, grey = missing/-1); raw is printed in the cell.
std::string svg_heatmap(const std::string& title, const std::vector<std::string>& col_labels,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::vector<double>>& normalized,
                        const std::vector<std::vector<double>>& raw);

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::size_t>& counts);

}  // namespace steerlab
