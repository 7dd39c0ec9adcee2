#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace etd::metrics {

inline constexpr const char* kMetricsHeader =
    "update,agent_id,return,win_metric,skip_rate,flop_reduction,mean_entropy,mean_dv,policy_loss,"
    "value_loss,wall_clock_s";

struct MetricsRow {
  long update = 0;
  int agent_id = 0;
  double ret = 0.0;
  double win_metric = 0.0;
  double skip_rate = 0.0;
  double flop_reduction = 0.0;
  double mean_entropy = 0.0;
  double mean_dv = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double wall_clock_s = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

// Doubles use the shortest representation that parses back to the same bits.
std::string format_row(const MetricsRow& row);
MetricsRow parse_row(const std::string& line);

enum class WriteMode { kAppend, kOverwrite };

// kOverwrite replaces the file with header + rows. kAppend writes the header
// only when the file is new or empty, then appends. Throws IoError with the
// path on failure.
void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                   WriteMode mode = WriteMode::kAppend);
// Throws IoError on a missing file or a header mismatch, InputError on a
// malformed row.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

// Index of a column name in the header, -1 when unknown.
int column_index(const std::string& name);
double column_value(const MetricsRow& row, int column);

}  // namespace etd::metrics
