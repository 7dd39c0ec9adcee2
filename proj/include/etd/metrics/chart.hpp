#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "etd/metrics/csv.hpp"

namespace etd::metrics {

struct ChartOptions {
  std::string column = "win_metric";
  std::string title;
  int width = 720;
  int height = 420;
};

// Standalone SVG: one polyline per agent_id of `column` against update, with
// ascending tick labels on both axes and a legend. Throws InputError on an
// empty row list or unknown column, IoError when the file cannot be written.
std::string render_chart_svg(const std::vector<MetricsRow>& rows, const ChartOptions& options);
void render_chart(const std::vector<MetricsRow>& rows, const std::filesystem::path& out_path,
                  const ChartOptions& options);

// Evenly spaced round tick values covering [lo, hi], ascending.
std::vector<double> nice_ticks(double lo, double hi, int target_count = 5);

}  // namespace etd::metrics
