#include "etd/metrics/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "etd/errors.hpp"

namespace etd::metrics {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

template <typename T>
T parse_field(const std::string& field, const std::string& line) {
  T out{};
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  if (ec != std::errc() || ptr != end) throw InputError("malformed metrics row: " + line);
  return out;
}

const char* const kColumns[] = {"update",       "agent_id", "return",      "win_metric",
                                "skip_rate",    "flop_reduction", "mean_entropy", "mean_dv",
                                "policy_loss",  "value_loss", "wall_clock_s"};

}  // namespace

std::string format_row(const MetricsRow& r) {
  std::string s = std::to_string(r.update) + "," + std::to_string(r.agent_id);
  for (double v : {r.ret, r.win_metric, r.skip_rate, r.flop_reduction, r.mean_entropy, r.mean_dv, r.policy_loss,
                   r.value_loss, r.wall_clock_s})
    s += "," + fmt(v);
  return s;
}

MetricsRow parse_row(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (fields.size() != 11) throw InputError("malformed metrics row: " + line);
  MetricsRow r;
  r.update = parse_field<long>(fields[0], line);
  r.agent_id = parse_field<int>(fields[1], line);
  double* targets[] = {&r.ret, &r.win_metric, &r.skip_rate, &r.flop_reduction, &r.mean_entropy,
                       &r.mean_dv, &r.policy_loss, &r.value_loss, &r.wall_clock_s};
  for (std::size_t k = 0; k < 9; ++k) *targets[k] = parse_field<double>(fields[k + 2], line);
  return r;
}

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows, WriteMode mode) {
  bool header = mode == WriteMode::kOverwrite;
  if (mode == WriteMode::kAppend) {
    std::error_code ec;
    header = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  }
  std::ofstream out(path, mode == WriteMode::kOverwrite ? std::ios::trunc : std::ios::app);
  if (!out) throw IoError("cannot open metrics file for writing: " + path.string());
  if (header) out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read metrics file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw IoError("unexpected metrics header in " + path.string());
  std::vector<MetricsRow> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_row(line));
  return rows;
}

int column_index(const std::string& name) {
  for (int i = 0; i < 11; ++i)
    if (name == kColumns[i]) return i;
  return -1;
}

double column_value(const MetricsRow& r, int column) {
  switch (column) {
    case 0: return static_cast<double>(r.update);
    case 1: return r.agent_id;
    case 2: return r.ret;
    case 3: return r.win_metric;
    case 4: return r.skip_rate;
    case 5: return r.flop_reduction;
    case 6: return r.mean_entropy;
    case 7: return r.mean_dv;
    case 8: return r.policy_loss;
    case 9: return r.value_loss;
    case 10: return r.wall_clock_s;
    default: throw InputError("unknown metrics column " + std::to_string(column));
  }
}

}  // namespace etd::metrics
