#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "etd/envs/environment.hpp"
#include "etd/errors.hpp"
#include "etd/metrics/chart.hpp"
#include "etd/metrics/csv.hpp"
#include "etd/metrics/drift.hpp"
#include "etd/metrics/flops.hpp"

using namespace etd;
using namespace etd::metrics;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "etd_test_metrics";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MetricsRow random_row(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  MetricsRow r;
  r.update = static_cast<long>(rng() % 10000);
  r.agent_id = static_cast<int>(rng() % 5) - 1;
  r.ret = u(rng);
  r.win_metric = u(rng) * 1e-9;
  r.skip_rate = 1.0 / 3.0;
  r.flop_reduction = 2.0 / 3.0;
  r.mean_entropy = u(rng) * 1e7;
  r.mean_dv = std::numeric_limits<double>::denorm_min();
  r.policy_loss = -0.0;
  r.value_loss = u(rng);
  r.wall_clock_s = 0.1;
  return r;
}

}  // namespace

TEST_CASE("FLOP model examples") {
  CHECK(nn::dense_flops(64, 64) == 8192);
  CHECK(nn::gru_flops(64, 128) == 147456);
  const std::uint64_t base = actor_inference_flops(18, 6);
  CHECK(base == 2 * 18 * 64 + 8192 + 8192 + 147456 + 2 * 128 * 6);
  CHECK(actor_inference_flops(36, 6) - base == 2 * 18 * 64);
  CHECK(critic_inference_flops(63) == 2 * 63 * 64 + 8192 + 8192 + 147456 + 2 * 128 * 2);
  CHECK(critic_inference_flops(63, {}, 2) == 2 * (2 * 63 * 64 + 8192 + 8192 + 147456) + 2 * 128 * 2);
}

TEST_CASE("skip_rate examples and errors") {
  CHECK(skip_rate(0, 50) == 0.0);
  CHECK(skip_rate(32, 48) == 2.0 / 3.0);
  CHECK_THROWS_AS(skip_rate(5, 4), InputError);
  CHECK_THROWS_AS(skip_rate(0, 0), InputError);
  CHECK_THROWS_AS(skip_rate(-1, 4), InputError);
}

TEST_CASE("flop_reduction identities") {
  const std::vector<std::uint64_t> cost{1000, 1000, 2500};
  const std::vector<long> frames{60, 60, 60};
  CHECK(flop_reduction(frames, frames, cost) == 0.0);
  for (long n = 2; n <= 5; ++n) {
    const std::vector<long> executed(3, 60 / n);
    CHECK(flop_reduction(executed, frames, cost) == static_cast<double>(n - 1) / static_cast<double>(n));
  }
  // Mixed rates: weighted by per-inference cost.
  const std::vector<long> executed{30, 60, 15};
  const double expected = (1000.0 * 30 + 0.0 + 2500.0 * 45) / (60.0 * 4500.0);
  CHECK(flop_reduction(executed, frames, cost) == doctest::Approx(expected).epsilon(1e-15));
  const std::vector<double> rates{0.5, 0.0, 0.75};
  CHECK(flop_reduction(rates, cost) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(flop_reduction(std::vector<double>{0, 0, 0}, cost) == 0.0);
}

TEST_CASE("flop_reduction is zero iff every skip rate is zero") {
  std::mt19937_64 rng(1);
  const std::vector<std::uint64_t> cost{700, 900};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<long> frames{1 + static_cast<long>(rng() % 100), 1 + static_cast<long>(rng() % 100)};
    const std::vector<long> executed{1 + static_cast<long>(rng() % frames[0]), 1 + static_cast<long>(rng() % frames[1])};
    const bool all_awake = executed == frames;
    const double red = flop_reduction(executed, frames, cost);
    CHECK((red == 0.0) == all_awake);
    CHECK(red >= 0.0);
    CHECK(red <= 1.0);
  }
}

TEST_CASE("CSV: header, one row, round trip") {
  std::mt19937_64 rng(2);
  const fs::path p = scratch("one.csv");
  const MetricsRow row = random_row(rng);
  write_metrics(p, {row});
  const std::string text = slurp(p);
  CHECK(text.substr(0, text.find('\n')) == kMetricsHeader);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  const auto back = read_metrics(p);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == row);
  CHECK(std::signbit(back[0].policy_loss));
}

TEST_CASE("CSV: random rows survive a bit-exact round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    MetricsRow r = random_row(rng);
    r.ret = u(rng) * std::pow(10.0, static_cast<double>(static_cast<int>(rng() % 40) - 20));
    CHECK(parse_row(format_row(r)) == r);
  }
  CHECK_THROWS_AS(parse_row("1,2,3"), InputError);
  CHECK_THROWS_AS(parse_row("1,0,x,0,0,0,0,0,0,0,0"), InputError);
}

TEST_CASE("CSV: append versus overwrite") {
  std::mt19937_64 rng(4);
  const fs::path p = scratch("modes.csv");
  const std::vector<MetricsRow> rows{random_row(rng), random_row(rng)};
  write_metrics(p, rows, WriteMode::kOverwrite);
  const std::string first = slurp(p);
  write_metrics(p, rows, WriteMode::kOverwrite);
  CHECK(slurp(p) == first);
  write_metrics(p, rows, WriteMode::kAppend);
  CHECK(read_metrics(p).size() == 4);
  std::ofstream(scratch("bad.csv")) << "not,a,header\n";
  CHECK_THROWS_AS(read_metrics(scratch("bad.csv").string() + ".none"), IoError);
  std::ofstream(fs::temp_directory_path() / "etd_test_metrics" / "bad2.csv") << "not,a,header\n";
  CHECK_THROWS_AS(read_metrics(fs::temp_directory_path() / "etd_test_metrics" / "bad2.csv"), IoError);
  CHECK_THROWS_AS(write_metrics(fs::path("/proc/definitely/not/here.csv"), rows), IoError);
}

TEST_CASE("column lookup") {
  CHECK(column_index("update") == 0);
  CHECK(column_index("return") == 2);
  CHECK(column_index("wall_clock_s") == 10);
  CHECK(column_index("nope") == -1);
  MetricsRow r;
  r.skip_rate = 0.25;
  CHECK(column_value(r, column_index("skip_rate")) == 0.25);
}

TEST_CASE("nice_ticks are ascending, round and cover the range") {
  for (auto [lo, hi] : {std::pair{0.0, 1.0}, std::pair{-3.7, 12.2}, std::pair{5.0, 5.0}, std::pair{1e-4, 3e-4}}) {
    const auto ticks = nice_ticks(lo, hi);
    REQUIRE(ticks.size() >= 2);
    CHECK(ticks.front() <= lo);
    CHECK(ticks.back() >= hi);
    for (std::size_t i = 1; i < ticks.size(); ++i) CHECK(ticks[i] > ticks[i - 1]);
  }
}

TEST_CASE("chart: SVG with per-agent series, axes and legend") {
  std::vector<MetricsRow> rows;
  for (long u = 1; u <= 10; ++u)
    for (int a = -1; a < 2; ++a) {
      MetricsRow r;
      r.update = u;
      r.agent_id = a;
      r.win_metric = 0.1 * static_cast<double>(u) + 0.05 * a;
      rows.push_back(r);
    }
  const std::string svg = render_chart_svg(rows, ChartOptions{});
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = svg.find(needle); pos != std::string::npos; pos = svg.find(needle, pos + 1)) ++n;
    return n;
  };
  CHECK(count("<polyline") == 3);
  CHECK(svg.find("x-axis") != std::string::npos);
  CHECK(svg.find("y-axis") != std::string::npos);
  CHECK(svg.find("legend") != std::string::npos);
  const fs::path p = scratch("chart.svg");
  render_chart(rows, p, ChartOptions{"skip_rate", "skip", 400, 300});
  CHECK(fs::file_size(p) > 100);
  CHECK_THROWS_AS(render_chart_svg({}, ChartOptions{}), InputError);
  CHECK_THROWS_AS(render_chart_svg(rows, ChartOptions{"bogus", "", 720, 420}), InputError);
}

TEST_CASE("drift diagnostic: static states give zero drift") {
  rollout::EpisodeBuffer buf;
  buf.n_agents = 1;
  buf.length = 6;
  buf.states = nn::Matrix::Constant(3, 7, 0.4);
  buf.frames.resize(1);
  for (int t = 0; t < 6; ++t) {
    rollout::FrameRecord r;
    r.frame = t;
    r.awake = t % 3 == 0;
    r.delta_t = 3;
    buf.frames[0].push_back(r);
  }
  const auto stats = sleep_drift_diagnostic(std::span<const rollout::EpisodeBuffer>(&buf, 1));
  REQUIRE(stats.count(3) == 1);
  CHECK(stats.at(3).count == 2);
  CHECK(stats.at(3).mean == 0.0);
  CHECK(stats.at(3).max == 0.0);
}

TEST_CASE("drift diagnostic: measured drift grows with the window on particle tag") {
  envs::EnvConfig cfg;
  cfg.name = "particle_tag";
  cfg.particle_tag.max_frames = 40;
  std::vector<std::unique_ptr<envs::Environment>> environments;
  environments.push_back(envs::make_environment(cfg));
  std::mt19937_64 rng(5);
  rollout::RolloutNets nets;
  const nn::NetShape shape{16, 1, 8};
  for (int r = 0; r < 2; ++r)
    nets.actors.push_back(nn::make_actor(environments[0]->obs_dim(), 5, shape, rng));
  nets.critic = nn::make_critic(environments[0]->state_dim() + 4, shape, 1, rng);
  rollout::CollectOptions o;
  o.frames_budget = 400;
  o.run_critic = false;
  o.mode = gating::GateMode::kAlwaysAwake;
  const auto awake = rollout::collect(environments, nets, o);
  o.mode = gating::GateMode::kFixedSkip;
  o.max_sleep = 4;
  const auto skip = rollout::collect(environments, nets, o);
  const auto s1 = sleep_drift_diagnostic(awake.episodes);
  const auto s4 = sleep_drift_diagnostic(skip.episodes);
  REQUIRE(s1.count(1) == 1);
  REQUIRE(s4.count(4) == 1);
  CHECK(s4.at(4).mean >= s1.at(1).mean);
  CHECK(s4.at(4).max >= s4.at(4).mean);
}
