// Command-line front end: run | list | verify | recipe.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "poa/poa.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitVerify = 3;

void print_summary(const poa::ExperimentResult& r) {
  for (const auto& cell : r.cells) {
    std::printf("[%s] T=%lld %s\n", cell.sweep.c_str(), cell.T, cell.algorithm.c_str());
    for (const auto& row : cell.report.rows) {
      if (cell.has_estimates) {
        std::printf("  %-64s err=%-12.6g ref=%-12.6g ratio=%.6g%s\n", row.instance_id.c_str(), row.estimate.point,
                    row.reference.value, row.ratio, row.straddles_one ? "  (CI straddles 1)" : "");
      } else {
        std::printf("  %-64s (too few trials for an estimate)\n", row.instance_id.c_str());
      }
    }
    if (cell.has_estimates) std::printf("  PoA estimate: %.6g\n", cell.report.poa_estimate);
  }
  for (const auto& s : r.skewed) {
    std::printf("skewed p=%-5g T=%-3lld I=%.6g bound=%.6g MAP=%.6g (>= %.6g)\n", s.p, s.T, s.I_exact, s.bound, s.map_error,
                s.p / 2);
  }
  for (const auto& s : r.search) {
    std::printf("search n=%lld T=%lld %-10s error=%.4f +- %.4f  I~%.4f  capacity bound=%.4f  Fano floor=%.4f\n", s.result.n,
                s.result.T, std::string(poa::to_string(s.result.policy)).c_str(), s.result.error, s.result.error_ci_half,
                s.result.information, s.capacity_bound, s.fano_floor);
  }
  for (const auto& f : r.files) std::printf("wrote %s\n", f.c_str());
}

int report_verify(const poa::VerifyOutcome& v) {
  std::fputs(v.log.c_str(), stdout);
  if (v.ok()) return 0;
  std::fprintf(stderr, "verification failed: %s\n", v.failures.front().c_str());
  return kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Price-of-adaptivity simulation laboratory"};
  app.require_subcommand(1);

  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long long> trials;
  std::string config_path, recipe;

  auto* run = app.add_subcommand("run", "Run an experiment from a config file or a built-in recipe");
  auto* cfg_opt = run->add_option("--config", config_path, "Experiment config (JSON)");
  run->add_option("--recipe", recipe, "Built-in recipe name")->excludes(cfg_opt);
  run->add_option("--workers", workers, "Worker threads (overrides POA_WORKERS and the config)");
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--trials", trials, "Override the trial count");

  std::string list_kind;
  auto* list = app.add_subcommand("list", "List registered instances, algorithms or recipes");
  list->add_option("kind", list_kind, "instances | algorithms | recipes")
      ->required()
      ->check(CLI::IsMember({"instances", "algorithms", "recipes"}));

  std::string suite;
  bool as_json = false;
  auto* verify = app.add_subcommand("verify", "Run an invariant suite");
  verify->add_option("suite", suite, "invariants | hypotest | scaling")
      ->required()
      ->check(CLI::IsMember({"invariants", "hypotest", "scaling"}));
  verify->add_flag("--json", as_json, "Emit the hypothesis-test table as JSON");
  verify->add_option("--workers", workers, "Worker threads");

  auto* verify_h = app.add_subcommand("verify-hypotest", "Alias for 'verify hypotest'");
  verify_h->add_flag("--json", as_json, "Emit the table as JSON");

  std::string recipe_name;
  auto* show = app.add_subcommand("recipe", "Print a built-in recipe as a config file");
  show->add_option("name", recipe_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) {
      if (config_path.empty() == recipe.empty()) throw poa::ConfigError("run: give exactly one of --config or --recipe");
      poa::ExperimentConfig c = recipe.empty() ? poa::load_config(config_path) : poa::parse_config(poa::builtin_recipe(recipe));
      poa::apply_overrides(c, {workers, seed, out, trials});
      print_summary(poa::run_experiment(c));
      return 0;
    }
    if (*list) {
      if (list_kind == "instances") {
        for (const auto& f : poa::instance_factories()) std::printf("%-22s %s\n", f.name.c_str(), f.parameters.c_str());
      } else if (list_kind == "algorithms") {
        for (const auto& a : poa::builtin_algorithms()) std::printf("%-22s %s\n", a.name.c_str(), a.parameters.c_str());
        for (const auto& p : poa::registered_plugins()) std::printf("%-22s (plug-in)\n", p.c_str());
      } else {
        for (const auto& [name, what] : poa::recipe_list()) std::printf("%-16s %s\n", name.c_str(), what.c_str());
      }
      return 0;
    }
    if (*show) {
      std::cout << poa::builtin_recipe(recipe_name).dump(2) << "\n";
      return 0;
    }
    if (*verify_h) suite = "hypotest";
    if (*verify || *verify_h) {
      if (suite == "invariants") return report_verify(poa::verify_invariants());
      if (suite == "scaling") return report_verify(poa::verify_scaling(workers.value_or(1)));
      std::vector<poa::EntropyReport> reports;
      poa::VerifyOutcome v = poa::verify_hypotest(&reports);
      if (as_json) {
        poa::json j = poa::json::array();
        for (const auto& r : reports) j.push_back(poa::entropy_json(r));
        std::cout << j.dump(2) << "\n";
        v.log.clear();
      }
      return report_verify(v);
    }
  } catch (const poa::InfeasibleRequest& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInfeasible;
  }
  return 0;
}
