#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "steinrec/error.hpp"
#include "steinrec/harness.hpp"
#include "steinrec/serialize.hpp"
#include "steinrec/zero_bias.hpp"

namespace {

using namespace steinrec;

int exit_code(Errc c) {
  switch (c) {
    case Errc::config:
    case Errc::parse:
    case Errc::invalid_model:
    case Errc::out_of_range:
    case Errc::unsupported:
    case Errc::empty_input:
    case Errc::negative_weight:
    case Errc::non_finite:
    case Errc::zero_weight:
    case Errc::size_mismatch:
      return 2;
    case Errc::cap_exceeded:
      return 3;
    case Errc::degenerate:
    case Errc::nonzero_mean:
    case Errc::infeasible:
      return 4;
    default:
      return 1;
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed, overrides the configuration");
  app->add_option("--out", c.out, "output directory, overrides the configuration");
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

int run_pipeline(const Common& c, std::optional<Method> forced) {
  ExperimentConfig cfg = load(c);
  if (forced) {
    if (*forced == Method::exact && (cfg.x->dependent_perturbation() || cfg.y->dependent_perturbation()))
      throw Error(Errc::config, "dependent perturbations cannot be propagated exactly");
    cfg.method = *forced;
  }
  const ExperimentResult res = run_experiment(cfg);
  emit_report(res, cfg.out_dir);
  std::cout << report_text(res);
  std::cerr << "wrote " << (cfg.out_dir / "curve.csv").string() << " and " << (cfg.out_dir / "report.txt").string()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normal-approximation rates for two-effect linear recursions"};
  app.require_subcommand(1);

  Common validate_opts, exact_opts, simulate_opts, experiment_opts, bounds_opts, zb_opts;
  auto* validate = app.add_subcommand("validate", "check a configuration and exit");
  add_common(validate, validate_opts);
  auto* exact = app.add_subcommand("exact", "decay curve from exact propagation");
  add_common(exact, exact_opts);
  auto* simulate = app.add_subcommand("simulate", "decay curve from Monte Carlo pools");
  add_common(simulate, simulate_opts);
  auto* experiment = app.add_subcommand("experiment", "full pipeline with the configured method");
  add_common(experiment, experiment_opts);
  auto* bounds = app.add_subcommand("bounds", "envelope constants and rate report only");
  add_common(bounds, bounds_opts);
  auto* zb = app.add_subcommand("zerobias", "dump the zero-bias law of a standardized model level");
  add_common(zb, zb_opts);
  int level = 0;
  std::string effect = "x";
  zb->add_option("--level", level, "recursion level n")->check(CLI::NonNegativeNumber);
  zb->add_option("--effect", effect, "x or y")->check(CLI::IsMember({"x", "y"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      const ExperimentConfig cfg = load(validate_opts);
      std::cout << "ok: horizon " << cfg.horizon << ", method " << to_string(cfg.method) << ", k " << cfg.x->k()
                << ", l " << cfg.y->k() << '\n';
      return 0;
    }
    if (*exact) return run_pipeline(exact_opts, Method::exact);
    if (*simulate) return run_pipeline(simulate_opts, Method::pool);
    if (*experiment) return run_pipeline(experiment_opts, std::nullopt);
    if (*bounds) {
      const ExperimentConfig cfg = load(bounds_opts);
      const ExperimentResult res = run_bounds(cfg);
      const std::string text = to_key_value(res.report) + to_key_value(res.cx, "x_") + to_key_value(res.cy, "y_");
      std::cout << text;
      if (bounds_opts.out) {
        std::filesystem::create_directories(*bounds_opts.out);
        std::ofstream(std::filesystem::path(*bounds_opts.out) / "bounds.txt") << text;
      }
      return 0;
    }
    if (*zb) {
      const ExperimentConfig cfg = load(zb_opts);
      const RecursionModel& m = effect == "x" ? *cfg.x : *cfg.y;
      const DiscreteDistribution law = standardize(propagate_exact(m, level, cfg.atom_cap));
      const std::string record = to_record(Law{zero_bias(law)});
      if (zb_opts.out) {
        std::filesystem::create_directories(*zb_opts.out);
        const auto path = std::filesystem::path(*zb_opts.out) / ("zerobias_" + effect + "_" + std::to_string(level) + ".txt");
        std::ofstream out(path);
        if (!out) throw Error(Errc::io, "cannot write " + path.string());
        out << record;
      } else {
        std::cout << record;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
