#include "etd/cli/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "etd/errors.hpp"
#include "etd/metrics/chart.hpp"
#include "etd/metrics/csv.hpp"
#include "etd/trainer/trainer.hpp"

namespace etd::cli {

namespace fs = std::filesystem;

namespace {

// --<key> for every config key; values land in `overrides` in flag order.
void add_config_flags(CLI::App& app, train::KeyValues& overrides) {
  const auto& keys = train::config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const std::string name = keys[i].name;
    app.add_option_function<std::string>(
           "--" + name, [&overrides, name](const std::string& v) { overrides[name] = v; }, keys[i].help)
        ->type_name("VALUE");
  }
}

fs::path default_root() {
  if (const char* env = std::getenv("ETD_RUN_DIR"); env != nullptr && *env != '\0') return env;
  return "runs";
}

train::TrainConfig build_config(const std::string& config_spec, const train::KeyValues& overrides) {
  train::KeyValues values;
  if (!config_spec.empty()) values = train::load_config(config_spec);
  for (const auto& [k, v] : overrides) values[k] = v;
  return train::TrainConfig::from_values(values);
}

std::string config_stem(const std::string& spec) {
  if (spec.empty()) return "run";
  return fs::path(spec).stem().string();
}

void print_eval(std::ostream& out, const train::EvalResult& ev, const envs::Environment& env) {
  for (const auto& r : ev.rows) {
    out << "agent " << r.agent_id << " (" << env.role_name(env.role_of(r.agent_id)) << ")"
        << " return " << train::format_double(r.ret) << " skip_rate " << train::format_double(r.skip_rate)
        << " mean_entropy " << train::format_double(r.mean_entropy) << "\n";
  }
  out << "win_metric " << train::format_double(ev.win_metric) << " flop_reduction "
      << train::format_double(ev.flop_reduction) << "\n";
}

struct Cell {
  std::string name;
  train::KeyValues values;
};

// Cartesian product of `key=v1,v2` sweeps.
std::vector<Cell> expand_sweeps(const std::vector<std::string>& sweeps) {
  std::vector<Cell> cells{{"", {}}};
  for (const auto& sweep : sweeps) {
    const auto eq = sweep.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == sweep.size())
      throw ConfigError("--sweep expects key=v1,v2,..., got '" + sweep + "'");
    std::string key = sweep.substr(0, eq);
    const std::string label = key;
    if (key == "max_sleep") key = "gate.max_sleep";
    const bool anneal_alias = key == "anneal";
    if (anneal_alias) key = "gate.anneal";
    std::vector<std::string> values;
    std::stringstream ss(sweep.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ','))
      if (!v.empty()) values.push_back(v);
    if (values.empty()) throw ConfigError("--sweep " + sweep + " lists no values");
    std::vector<Cell> next;
    for (const auto& cell : cells) {
      for (const auto& value : values) {
        std::string stored = value;
        if (anneal_alias) {
          if (value == "static") stored = "false";
          else if (value == "annealed") stored = "true";
        }
        Cell c = cell;
        c.values[key] = stored;
        c.name += (c.name.empty() ? "" : "_") + label + "-" + value;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ETD-MAPPO: event-triggered multi-agent PPO with SMDP credit assignment", "etd"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a configuration and write metrics and checkpoints");
  std::string train_config;
  std::string train_out;
  std::string train_resume;
  bool train_overwrite = false;
  bool train_quiet = false;
  int train_stop_after = 0;
  train::KeyValues train_overrides;
  train_cmd->add_option("--config", train_config, "Config file or preset (lbf_etd, lbf_fixed_skip, lbf_vanilla, tag_etd)");
  train_cmd->add_option("--out", train_out, "Run directory (default: $ETD_RUN_DIR or ./runs, plus <config>-seed<n>)");
  train_cmd->add_option("--resume", train_resume, "Continue from a checkpoint written by train");
  train_cmd->add_flag("--overwrite", train_overwrite, "Replace an existing run in --out");
  train_cmd->add_flag("--quiet", train_quiet, "No per-update progress on stderr");
  train_cmd->add_option("--stop-after", train_stop_after, "Pause after this many updates; continue with --resume")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option_function<std::string>(
      "--seed", [&](const std::string& v) { train_overrides["train.seed"] = v; }, "Alias of --train.seed");
  add_config_flags(*train_cmd, train_overrides);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Run deployment episodes from a checkpoint");
  std::string eval_ckpt;
  std::optional<int> eval_episodes;
  std::string eval_gate;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--episodes", eval_episodes, "Episodes (default: eval.episodes of the run)");
  eval_cmd->add_option("--gate-mode", eval_gate, "Override eval.gate_mode");
  std::string eval_greedy;
  eval_cmd->add_option("--greedy", eval_greedy, "Override eval.greedy (true or false)");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Train one run per sweep cell");
  std::string ablate_env;
  std::string ablate_config;
  std::string ablate_out;
  std::vector<std::string> sweeps;
  int jobs = 1;
  bool ablate_overwrite = false;
  train::KeyValues ablate_overrides;
  ablate_cmd->add_option("--env", ablate_env, "grid_forage or particle_tag (selects lbf_etd or tag_etd)");
  ablate_cmd->add_option("--config", ablate_config, "Base config file or preset");
  ablate_cmd->add_option("--out", ablate_out, "Root directory for the cells");
  ablate_cmd->add_option("--sweep", sweeps,
                         "key=v1,v2,... (repeatable, crossed). Aliases: max_sleep, anneal=static,annealed. "
                         "Default: max_sleep=2,3,4,5 and anneal=static,annealed");
  ablate_cmd->add_option("--jobs", jobs, "Cells trained concurrently")->check(CLI::PositiveNumber);
  ablate_cmd->add_flag("--overwrite", ablate_overwrite, "Replace existing cells");
  ablate_cmd->add_option_function<std::string>(
      "--seed", [&](const std::string& v) { ablate_overrides["train.seed"] = v; }, "Alias of --train.seed");
  add_config_flags(*ablate_cmd, ablate_overrides);

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Render one metrics column as an SVG chart");
  std::string plot_csv;
  std::string plot_out;
  metrics::ChartOptions chart;
  plot_cmd->add_option("--metrics", plot_csv, "metrics.csv or eval.csv")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--column", chart.column, "Column to plot")->capture_default_str();
  plot_cmd->add_option("--out", plot_out, "Output .svg (default: next to the CSV)");
  plot_cmd->add_option("--title", chart.title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (train_cmd->parsed()) {
      const auto config = build_config(train_config, train_overrides);
      const fs::path dir = train_out.empty()
                               ? default_root() / (config_stem(train_config) + "-seed" + std::to_string(config.seed))
                               : fs::path(train_out);
      train::TrainOptions opts;
      opts.out_dir = dir;
      opts.overwrite = train_overwrite;
      if (!train_resume.empty()) opts.resume = train_resume;
      opts.log = train_quiet ? nullptr : &err;
      opts.stop_after = train_stop_after;
      const auto summary = train::train(config, opts);
      if (summary.paused) {
        out << "paused after " << summary.updates_run << " updates\n"
            << "wrote " << summary.paths.last_ckpt.string() << "\n";
        return 0;
      }
      auto env = envs::make_environment(config.env);
      print_eval(out, summary.final_eval, *env);
      for (const auto& p : {summary.paths.config, summary.paths.metrics, summary.paths.eval, summary.paths.last_ckpt,
                            summary.paths.best_ckpt, summary.paths.final_ckpt})
        if (!fs::exists(p)) throw IoError("missing artifact " + p.string());
      out << "wrote " << summary.paths.metrics.string() << "\n"
          << "wrote " << summary.paths.eval.string() << "\n"
          << "wrote " << summary.paths.final_ckpt.string() << "\n"
          << "wrote " << summary.paths.best_ckpt.string() << "\n"
          << "wrote " << summary.paths.last_ckpt.string() << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto ckpt = nn::read_checkpoint(eval_ckpt);
      auto config = train::checkpoint_config(ckpt);
      if (!eval_gate.empty()) config.set("eval.gate_mode", eval_gate);
      if (!eval_greedy.empty()) config.set("eval.greedy", eval_greedy);
      const auto state = train::restore_state(train::checkpoint_config(ckpt), ckpt);
      const int episodes = eval_episodes.value_or(config.eval_episodes);
      const auto ev = train::evaluate(config, state.nets, state.update, episodes);
      auto env = envs::make_environment(config.env);
      out << "checkpoint " << eval_ckpt << " update " << state.update << " episodes " << episodes << " gate "
          << gating::to_string(config.eval_gate_mode) << "\n";
      print_eval(out, ev, *env);
      return 0;
    }

    if (ablate_cmd->parsed()) {
      std::string base_spec = ablate_config;
      if (base_spec.empty()) {
        if (ablate_env.empty() || ablate_env == "particle_tag") base_spec = "tag_etd";
        else if (ablate_env == "grid_forage") base_spec = "lbf_etd";
        else throw ConfigError("--env must be grid_forage or particle_tag");
      }
      train::KeyValues base = train::load_config(base_spec);
      if (!ablate_env.empty()) base["env.name"] = ablate_env;
      for (const auto& [k, v] : ablate_overrides) base[k] = v;
      if (sweeps.empty()) sweeps = {"max_sleep=2,3,4,5", "anneal=static,annealed"};
      const auto cells = expand_sweeps(sweeps);
      const fs::path root = ablate_out.empty() ? default_root() / ("ablate-" + config_stem(base_spec)) : fs::path(ablate_out);

      std::vector<train::TrainConfig> configs;
      for (const auto& cell : cells) {
        train::KeyValues values = base;
        for (const auto& [k, v] : cell.values) values[k] = v;
        configs.push_back(train::TrainConfig::from_values(values));
      }
      std::mutex io;
      std::atomic<std::size_t> next{0};
      std::vector<std::string> failures(cells.size());
      std::vector<train::EvalResult> results(cells.size());
      auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
          try {
            train::TrainOptions opts;
            opts.out_dir = root / cells[i].name;
            opts.overwrite = ablate_overwrite;
            results[i] = train::train(configs[i], opts).final_eval;
            std::lock_guard lock(io);
            err << "finished " << cells[i].name << "\n";
          } catch (const std::exception& e) {
            failures[i] = e.what();
          }
        }
      };
      std::vector<std::thread> pool;
      for (int j = 1; j < std::min<int>(jobs, static_cast<int>(cells.size())); ++j) pool.emplace_back(worker);
      worker();
      for (auto& t : pool) t.join();

      bool ok = true;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!failures[i].empty()) {
          ok = false;
          err << "error: cell " << cells[i].name << ": " << failures[i] << "\n";
          continue;
        }
        double mean_ret = 0.0;
        for (const auto& r : results[i].rows) mean_ret += r.ret / static_cast<double>(results[i].rows.size());
        out << (root / cells[i].name).string() << " win_metric " << train::format_double(results[i].win_metric)
            << " mean_return " << train::format_double(mean_ret) << " flop_reduction "
            << train::format_double(results[i].flop_reduction) << "\n";
      }
      return ok ? 0 : 1;
    }

    if (plot_cmd->parsed()) {
      const auto rows = metrics::read_metrics(plot_csv);
      const fs::path target =
          plot_out.empty() ? fs::path(plot_csv).parent_path() / (fs::path(plot_csv).stem().string() + "_" + chart.column + ".svg")
                           : fs::path(plot_out);
      metrics::render_chart(rows, target, chart);
      out << "wrote " << target.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace etd::cli
