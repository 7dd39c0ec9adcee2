#include "etd/metrics/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "etd/errors.hpp"

namespace etd::metrics {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target_count) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.5;
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / std::max(1, target_count);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  const double first = std::floor(lo / step), last = std::ceil(hi / step - 1e-9);
  for (double k = first; k <= last && ticks.size() <= 50; k += 1.0) {
    const double t = k * step;
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

std::string render_chart_svg(const std::vector<MetricsRow>& rows, const ChartOptions& o) {
  if (rows.empty()) throw InputError("render_chart: no rows");
  const int column = column_index(o.column);
  if (column < 0) throw InputError("render_chart: unknown column '" + o.column + "'");

  std::map<int, std::vector<std::pair<double, double>>> series;
  for (const auto& r : rows) series[r.agent_id].emplace_back(static_cast<double>(r.update), column_value(r, column));
  double x_lo = rows.front().update, x_hi = x_lo, y_lo = column_value(rows.front(), column), y_hi = y_lo;
  for (const auto& [id, pts] : series)
    for (const auto& [x, y] : pts) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      if (std::isfinite(y)) {
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
    }
  const auto xt = nice_ticks(x_lo, x_hi);
  const auto yt = nice_ticks(y_lo, y_hi);
  const double x0 = xt.front(), x1 = xt.back(), y0 = yt.front(), y1 = yt.back();

  const double left = 70, right = 140, top = 40, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(o.width) + "\" height=\"" +
         std::to_string(o.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string title = o.title.empty() ? o.column + " vs update" : o.title;
  svg += "<text x=\"" + num(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
         "</text>\n";
  svg += "<g class=\"x-axis\">\n";
  for (double t : xt) {
    svg += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
           num(top + ph) + "\" stroke=\"#eee\"/>";
    svg += "<text x=\"" + num(px(t)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" + num(t) +
           "</text>\n";
  }
  svg += "</g>\n<g class=\"y-axis\">\n";
  for (double t : yt) {
    svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" +
           num(py(t)) + "\" stroke=\"#eee\"/>";
    svg += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" + num(t) +
           "</text>\n";
  }
  svg += "</g>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(o.height - 10.0) +
         "\" text-anchor=\"middle\">update</text>\n";
  svg += "<text transform=\"translate(16 " + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(o.column) + "</text>\n";

  int k = 0;
  svg += "<g class=\"legend\">\n";
  for (const auto& [id, pts] : series) {
    const char* color = kPalette[k % 7];
    std::string points;
    for (const auto& [x, y] : pts)
      if (std::isfinite(y)) points += num(px(x)) + "," + num(py(y)) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
           "\"/>\n";
    const double ly = top + 10 + 18.0 * k;
    svg += "<line x1=\"" + num(left + pw + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(left + pw + 32) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>";
    svg += "<text x=\"" + num(left + pw + 38) + "\" y=\"" + num(ly + 4) + "\">agent " + std::to_string(id) +
           "</text>\n";
    ++k;
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void render_chart(const std::vector<MetricsRow>& rows, const std::filesystem::path& out_path,
                  const ChartOptions& options) {
  const std::string svg = render_chart_svg(rows, options);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot write chart: " + out_path.string());
  out << svg;
  if (!out) throw IoError("write failed: " + out_path.string());
}

}  // namespace etd::metrics
