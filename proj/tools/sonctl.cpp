// sonctl: run scenarios, sweeps, and the exhaustive oracles.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "son/son.hpp"

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '"', '\'');
  return s;
}

int fail(const std::string& code, const std::string& message) {
  std::cerr << "error code=" << code << " message=\"" << one_line(message) << "\"\n";
  return code == "Usage" ? 2 : 1;
}

int cmd_run(const std::string& spec_path, std::optional<std::uint64_t> seed, std::optional<std::string> out) {
  const auto spec = son::load_scenario(spec_path);
  const std::uint64_t s = seed.value_or(spec.seeds.front());
  const std::filesystem::path dir = out.value_or(spec.output.dir);
  const auto report = son::run_and_emit(spec, s, dir);
  std::cout << "seed = " << s << '\n' << "out = " << dir.string() << '\n' << son::format_report(report)
            << "wall_time_s = " << son::format_number(report.wall_time_s) << '\n';
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& seeds, std::optional<std::string> out, unsigned jobs) {
  const auto spec = son::load_scenario(spec_path);
  const auto list = son::parse_seed_range(seeds);
  const std::filesystem::path root = out.value_or(spec.output.dir);
  std::vector<son::RunReport> reports(list.size());
  std::vector<std::string> errors(list.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < list.size(); i = next++) {
      try {
        reports[i] = son::run_and_emit(spec, list[i], root / ("seed-" + std::to_string(list[i])));
      } catch (const son::Error& e) {
        errors[i] = e.code() + ": " + e.what();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::min<std::size_t>(jobs, list.size()); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < list.size(); ++i)
    if (!errors[i].empty()) return fail("SweepFailure", "seed " + std::to_string(list[i]) + ": " + errors[i]);

  std::ostringstream csv;
  csv << "seed,mean_throughput_mbps,demand_satisfaction,total_conflicts,final_conflicts,disruptions,"
         "optimizer_invocations,kb_hit_rate\n";
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& r = reports[i];
    csv << list[i] << ',' << son::format_number(r.mean_throughput) << ',' << son::format_number(r.satisfaction) << ','
        << r.total_conflicts << ',' << r.final_conflicts << ',' << r.disruptions << ',' << r.optimizer_invocations << ','
        << son::format_number(r.kb_hit_rate) << '\n';
  }
  son::write_file(root / "sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_oracle_channels(const std::string& spec_path) {
  const auto spec = son::load_scenario(spec_path);
  const auto& topo = spec.env.topology;
  const auto best = son::brute_force_channels(topo);
  const auto greedy = son::greedy_coloring(topo);
  std::cout << "optimum_conflicts = " << son::format_number(best.value) << '\n' << "optimum_assignment =";
  for (int c : best.channel_of) std::cout << ' ' << c;
  std::cout << '\n' << "greedy_coloring_conflicts = " << son::count_conflicts(topo, greedy) << '\n'
            << "greedy_coloring_assignment =";
  for (int c : greedy) std::cout << ' ' << c;
  std::cout << '\n';
  return 0;
}

int cmd_oracle_mdp(const std::string& path, double tol) {
  const auto mdp = son::parse_mdp(son::read_file(path));
  const auto vi = son::value_iteration(mdp, tol);
  son::QTable q(mdp.states, mdp.actions);
  for (std::size_t s = 0; s < mdp.states; ++s)
    for (std::size_t a = 0; a < mdp.actions; ++a) q.set(s, a, vi.q[s][a]);
  std::cout << son::dump_qtable(q) << "policy =";
  for (auto a : vi.policy) std::cout << " a_" << (a + 1);
  std::cout << '\n' << "sweeps = " << vi.sweeps << '\n';
  return 0;
}

int cmd_dump_kb(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(son::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw son::Error("SnapshotFormat", e.what());
  }
  const auto kb = son::import_snapshot(doc);
  std::cout << "schema = " << son::kKbSchema << '\n'
            << "capacity = " << kb.capacity() << '\n'
            << "eviction = " << son::to_string(kb.eviction()) << '\n'
            << "cases = " << kb.size() << '\n'
            << "id\tpercept\taction\tL\thits\tlast_used\tcreated\n";
  for (const auto& c : kb.cases()) {
    std::cout << static_cast<std::uint64_t>(c.id) << "\t[";
    for (std::size_t i = 0; i < c.percept.values.size(); ++i)
      std::cout << (i ? " " : "") << son::format_number(c.percept.values[i]);
    std::cout << "]\t" << son::to_string(c.action) << '\t' << son::format_number(c.coefficient) << '\t' << c.hits
              << '\t' << c.last_used << '\t' << c.created << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-driven self-organizing network agents"};
  app.require_subcommand(1);

  std::string spec_path, seeds_text, mdp_path, snapshot_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned jobs = 0;
  double tol = 1e-10;

  auto* run = app.add_subcommand("run", "Run one scenario seed and write trace, metrics and report");
  run->add_option("spec", spec_path, "Scenario file")->required();
  run->add_option("--seed", seed, "Run seed (default: first seed in the scenario)");
  run->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run a seed range as independent runs");
  sweep->add_option("spec", spec_path, "Scenario file")->required();
  sweep->add_option("--seeds", seeds_text, "Inclusive range a..b")->required();
  sweep->add_option("--out", out, "Output root; one seed-<n> directory per run");
  sweep->add_option("--jobs", jobs, "Concurrent runs (default: hardware threads)");

  auto* oracle = app.add_subcommand("oracle", "Exhaustive reference solutions");
  oracle->require_subcommand(1);
  auto* channels = oracle->add_subcommand("channels", "Brute-force minimum-conflict channel assignment");
  channels->add_option("spec", spec_path, "Scenario file")->required();
  auto* mdp = oracle->add_subcommand("mdp", "Value iteration on an explicit MDP");
  mdp->add_option("mdp", mdp_path, "MDP file")->required();
  mdp->add_option("--tol", tol, "Max-norm stopping tolerance");

  auto* dump = app.add_subcommand("dump-kb", "Print a KB snapshot");
  dump->add_option("snapshot", snapshot_path, "Snapshot file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("Usage", e.what());
  }

  try {
    if (*run) return cmd_run(spec_path, seed, out);
    if (*sweep) return cmd_sweep(spec_path, seeds_text, out, jobs);
    if (*channels) return cmd_oracle_channels(spec_path);
    if (*mdp) return cmd_oracle_mdp(mdp_path, tol);
    if (*dump) return cmd_dump_kb(snapshot_path);
  } catch (const son::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("Internal", e.what());
  }
  return fail("Usage", "no subcommand");
}
