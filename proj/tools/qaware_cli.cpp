// Command-line front end: run, train, bench, toy and ops subcommands.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qaware/config.hpp"
#include "qaware/dqn.hpp"
#include "qaware/harness.hpp"
#include "qaware/toy.hpp"

namespace fs = std::filesystem;
using namespace qaware;

namespace {

struct CommonOptions {
  std::string scenario = "periodic";
  std::string config;
  std::uint64_t seed = 1;
  int episodes = 0;  // 0 keeps the scenario / config value
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--scenario", o.scenario, "Built-in scenario")
      ->check(CLI::IsMember(scenario_names()))
      ->capture_default_str();
  cmd->add_option("--config", o.config, "JSON configuration file (overrides --scenario)");
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_option("--episodes", o.episodes, "Number of episodes");
  cmd->add_option("--out-dir", o.out_dir, "Output directory (default $QAWARE_OUT_DIR or ./out)");
}

fs::path output_dir(const std::string& requested) {
  fs::path dir = requested;
  if (dir.empty()) {
    const char* env = std::getenv("QAWARE_OUT_DIR");
    dir = env && *env ? env : "out";
  }
  fs::create_directories(dir);
  return dir;
}

config::LoadedConfig load(const CommonOptions& o) {
  config::LoadedConfig cfg = o.config.empty()
                                 ? config::LoadedConfig{build_scenario(o.scenario), std::nullopt, std::nullopt, {}}
                                 : config::load_config(o.config);
  cfg.scenario.seed = o.seed;
  if (o.episodes > 0) cfg.scenario.episodes = o.episodes;
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

void print_ops_note(std::ostream& os, int state_dim, int clients, int sensors, std::int64_t k, std::int64_t batch) {
  const auto arch = dqn::architecture(state_dim, clients, sensors);
  const std::vector<std::int64_t> sizes(arch.begin(), arch.end());
  const auto cf = dqn::count_operations(sizes, k);
  const auto cb = dqn::count_train(sizes, k, batch);
  os << "layer sizes:";
  for (auto s : sizes) os << ' ' << s;
  os << "\nforward operations C_f = " << cf << "\ntraining-step operations C_b = B * C_f = " << cb << " (B = " << batch
     << ")\n";
  if (state_dim == 20 && clients == 2 && sensors == 20 && k == 1)
    os << "note: the reference figure quoted for this network is C_f = " << dqn::kReportedForwardOps
       << " (C_b = " << dqn::kReportedForwardOps * batch
       << "); summing out * (2 in + k) over the layer sizes above gives " << cf
       << ". The formula value is the one reported here.\n";
}

TrainingResult train_and_report(const Scenario& scenario, dqn::TrainConfig tc, bool verbose) {
  return train_dqn(scenario, tc, [&](const TrainingEpisode& e) {
    if (verbose && (e.episode % 10 == 9 || e.episode == 0))
      std::cerr << "episode " << e.episode + 1 << "/" << tc.episodes << "  temperature " << e.temperature
                << "  overall cost " << e.overall_cost << "  loss " << e.mean_loss << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-aware sensor scheduling simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string run_policy = "maf";
  std::string run_checkpoint;
  auto* run = app.add_subcommand("run", "Simulate episodes with one policy and write CSV logs");
  add_common(run, run_opts);
  run->add_option("--policy", run_policy, "Scheduling policy")
      ->check(CLI::IsMember(policy_names()))
      ->capture_default_str();
  run->add_option("--checkpoint", run_checkpoint, "DQN checkpoint (policy dqn); trains one when omitted");

  CommonOptions train_opts;
  bool train_quiet = false;
  auto* train = app.add_subcommand("train", "Train the DQN scheduler and write a checkpoint");
  add_common(train, train_opts);
  train->add_flag("--quiet", train_quiet, "No progress output");

  CommonOptions bench_opts;
  std::string bench_checkpoint;
  auto* bench = app.add_subcommand("bench", "Run every benchmark policy on one scenario");
  add_common(bench, bench_opts);
  bench->add_option("--checkpoint", bench_checkpoint, "Also evaluate this DQN checkpoint");

  double p1 = 0.1, p2 = 0.2, gamma = 0.9;
  int delta_max = 20;
  std::string toy_query = "max";
  std::string toy_out;
  auto* toy_cmd = app.add_subcommand("toy", "Solve the two-chain example by policy iteration");
  toy_cmd->add_option("--p1", p1, "Flip probability of chain 1")->capture_default_str();
  toy_cmd->add_option("--p2", p2, "Flip probability of chain 2")->capture_default_str();
  toy_cmd->add_option("--query", toy_query, "Query type")
      ->check(CLI::IsMember({"max", "cnt"}))
      ->capture_default_str();
  toy_cmd->add_option("--delta-max", delta_max, "Age cap")->capture_default_str();
  toy_cmd->add_option("--gamma", gamma, "Discount factor")->capture_default_str();
  toy_cmd->add_option("--out-dir", toy_out, "Output directory");

  int ops_m = 20, ops_c = 2, ops_n = 20;
  std::int64_t ops_k = 1, ops_b = 128;
  auto* ops = app.add_subcommand("ops", "Operation counts of the DQN forward pass and training step");
  ops->add_option("--state-dim", ops_m, "M")->capture_default_str();
  ops->add_option("--clients", ops_c, "C")->capture_default_str();
  ops->add_option("--sensors", ops_n, "N")->capture_default_str();
  ops->add_option("--k", ops_k, "Operations per activation")->capture_default_str();
  ops->add_option("--batch", ops_b, "Batch size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      auto cfg = load(run_opts);
      const std::string policy_name = run_policy != "maf" || !cfg.policy ? run_policy : *cfg.policy;
      const fs::path dir = output_dir(run_opts.out_dir);
      std::unique_ptr<Policy> policy;
      if (policy_name == "dqn") {
        const std::string ckpt = !run_checkpoint.empty() ? run_checkpoint : cfg.checkpoint.value_or("");
        if (!ckpt.empty()) {
          policy = std::make_unique<DqnPolicy>(dqn::load_checkpoint(ckpt), cfg.scenario);
        } else {
          cfg.train.seed = run_opts.seed;
          policy = std::make_unique<DqnPolicy>(train_and_report(cfg.scenario, cfg.train, true).network, cfg.scenario);
        }
      } else {
        policy = make_benchmark_policy(policy_name, cfg.scenario);
      }
      const auto logs = run_episodes(cfg.scenario, *policy);
      const Metrics m = aggregate(logs, cfg.scenario.clients);
      {
        auto os = open_out(dir / ("episodes_" + policy_name + ".csv"));
        write_episode_csv(os, logs);
      }
      {
        auto os = open_out(dir / ("queries_" + policy_name + ".csv"));
        write_query_csv(os, logs, cfg.scenario.clients);
      }
      {
        auto os = open_out(dir / ("aggregate_" + policy_name + ".csv"));
        write_aggregate_header(os, static_cast<std::size_t>(cfg.scenario.model.sensor_count()));
        write_aggregate_rows(os, policy_name, cfg.scenario.name, m);
      }
      std::cout << policy_name << " on " << cfg.scenario.name << ", " << logs.size() << " episodes\n";
      for (const auto& q : m.queries) std::cout << "  " << q.kind << " mean MSE " << q.mse_mean << '\n';
      std::cout << "  overall cost " << m.overall_cost_mean << "\n  wrote " << dir.string() << '\n';
    } else if (*train) {
      auto cfg = load(train_opts);
      cfg.train.seed = train_opts.seed;
      if (train_opts.episodes > 0) cfg.train.episodes = train_opts.episodes;
      const fs::path dir = output_dir(train_opts.out_dir);
      const auto result = train_and_report(cfg.scenario, cfg.train, !train_quiet);
      const fs::path ckpt = dir / ("dqn_" + cfg.scenario.name + "_seed" + std::to_string(cfg.train.seed) + ".bin");
      dqn::save_checkpoint(ckpt.string(), result.network, {cfg.train.hash(), cfg.train.seed});
      {
        auto os = open_out(dir / ("training_curve_seed" + std::to_string(cfg.train.seed) + ".csv"));
        write_training_curve(os, result.curve);
      }
      std::cout << "checkpoint " << ckpt.string() << '\n';
      print_ops_note(std::cout, static_cast<int>(cfg.scenario.model.state_dim()),
                     static_cast<int>(cfg.scenario.clients.size()), static_cast<int>(cfg.scenario.model.sensor_count()),
                     1, cfg.train.batch);
    } else if (*bench) {
      auto cfg = load(bench_opts);
      const fs::path dir = output_dir(bench_opts.out_dir);
      std::vector<std::string> names{"maf"};
      for (auto& n : greedy_policies_for(cfg.scenario)) names.push_back(n);
      auto os = open_out(dir / "bench_summary.csv");
      write_aggregate_header(os, static_cast<std::size_t>(cfg.scenario.model.sensor_count()));
      auto report = [&](const std::string& name, const Policy& policy) {
        const Metrics m = aggregate(run_episodes(cfg.scenario, policy), cfg.scenario.clients);
        write_aggregate_rows(os, name, cfg.scenario.name, m);
        std::cout << name << ": overall cost " << m.overall_cost_mean << '\n';
      };
      for (const auto& n : names) report(n, *make_benchmark_policy(n, cfg.scenario));
      if (!bench_checkpoint.empty())
        report("dqn", DqnPolicy(dqn::load_checkpoint(bench_checkpoint), cfg.scenario));
      std::cout << "wrote " << (dir / "bench_summary.csv").string() << '\n';
    } else if (*toy_cmd) {
      toy::ToyModel model{{p1, p2}, delta_max, gamma};
      const auto query = toy_query == "max" ? toy::ToyQuery::max : toy::ToyQuery::count;
      const auto mdp = toy::build_mdp(model, query);
      const auto sol = toy::policy_iteration(mdp);
      const fs::path dir = output_dir(toy_out);
      const fs::path path = dir / ("toy_policy_" + toy_query + ".csv");
      auto os = open_out(path);
      toy::write_policy_csv(os, mdp, sol);
      std::cout << "policy iteration converged in " << sol.rounds << " rounds; wrote " << path.string() << '\n';
    } else if (*ops) {
      print_ops_note(std::cout, ops_m, ops_c, ops_n, ops_k, ops_b);
    }
  } catch (const std::exception& e) {
    std::cerr << "qaware: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
