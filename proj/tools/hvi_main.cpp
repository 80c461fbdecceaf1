#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "hybridvi/commands.hpp"
#include "hybridvi/config.hpp"

namespace {

// Flags override the corresponding config keys.
struct Overrides {
  std::string output_dir;
  long seed = -1;
  int steps = -1;
  int sweeps = -1;
  int subsample = -1;
  long mcmc_sweeps = -1;
  std::string family;
  int k = -1;

  void apply(nlohmann::json* j) const {
    if (!output_dir.empty()) (*j)["output_dir"] = output_dir;
    if (seed >= 0) (*j)["seed"] = seed;
    if (steps >= 0) (*j)["fit"]["n_steps"] = steps;
    if (sweeps >= 0) (*j)["fit"]["n_sweeps"] = sweeps;
    if (subsample >= 0) (*j)["fit"]["subsample_size"] = subsample;
    if (mcmc_sweeps >= 0) (*j)["mcmc"]["n_sweeps"] = mcmc_sweeps;
    if (!family.empty()) (*j)["va"]["family"] = family;
    if (k >= 0) (*j)["va"]["k"] = k;
  }
};

void add_common(CLI::App* sub, std::string* config_path, Overrides* ov) {
  sub->add_option("-c,--config", *config_path, "Path to the run config (JSON)")->required();
  sub->add_option("-o,--out", ov->output_dir, "Override output_dir");
  sub->add_option("--seed", ov->seed, "Override seed");
  sub->add_option("--steps", ov->steps, "Override fit.n_steps");
  sub->add_option("--sweeps", ov->sweeps, "Override fit.n_sweeps");
  sub->add_option("--subsample", ov->subsample, "Override fit.subsample_size");
  sub->add_option("--mcmc-sweeps", ov->mcmc_sweeps, "Override mcmc.n_sweeps");
  sub->add_option("--family", ov->family, "Override va.family");
  sub->add_option("--k", ov->k, "Override va.k");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybridvi: variational inference with exact latent conditionals"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset plus its truth file");
  auto* fit = app.add_subcommand("fit", "Calibrate a variational approximation");
  auto* mcmc = app.add_subcommand("mcmc", "Run the MCMC oracle");
  auto* compare = app.add_subcommand("compare", "Compare a fit against a chain");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of model gradients");
  for (auto* sub : {sim, fit, mcmc, compare, gradcheck}) {
    add_common(sub, &config_path, &ov);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    auto raw = hybridvi::RunConfig::load(config_path).raw;
    ov.apply(&raw);
    const auto cfg = hybridvi::RunConfig::from_json(raw);
    if (sim->parsed()) return hybridvi::cmd_simulate(cfg);
    if (fit->parsed()) return hybridvi::cmd_fit(cfg);
    if (mcmc->parsed()) return hybridvi::cmd_mcmc(cfg);
    if (compare->parsed()) return hybridvi::cmd_compare(cfg);
    if (gradcheck->parsed()) return hybridvi::cmd_gradcheck(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
