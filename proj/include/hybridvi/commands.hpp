#pragma once

#include <memory>
#include <string>

#include "hybridvi/config.hpp"
#include "hybridvi/va.hpp"

namespace hybridvi {

// CLI entry points. Each reads the validated RunConfig, writes its artifacts
// under cfg.output_dir and returns a process exit code. All randomness flows
// from cfg.seed.
int cmd_simulate(const RunConfig& cfg);
int cmd_fit(const RunConfig& cfg);
int cmd_mcmc(const RunConfig& cfg);
int cmd_compare(const RunConfig& cfg);
int cmd_gradcheck(const RunConfig& cfg);

// Lambda serialization: flat numeric array plus a JSON sidecar carrying the
// family, dimensions and layout version.
void save_va(const std::string& dir, const VaFamily& va);
std::unique_ptr<VaFamily> load_va(const std::string& dir);

}  // namespace hybridvi
