#include "hybridvi/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace hybridvi {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"", {"model", "seed", "output_dir", "data", "simulate", "va", "fit", "mcmc", "tobit",
            "tvpvar", "toy", "compare", "gradcheck"}},
      {"data",
       {"path", "x_cols", "w_cols", "focal_cols", "cross_cols", "series_cols", "lags"}},
      {"simulate",
       {"N", "T", "p", "r", "k_alpha", "beta", "xi", "c", "kappa", "l", "w_idx", "hbar", "rho",
        "sigma_e", "coef_rw_sd", "l_rw_sd", "init_coef_scale", "m", "n_units", "sz", "sy",
        "mu0", "sigma0_offdiag"}},
      {"va", {"family", "k", "k_theta", "k_block", "d0"}},
      {"fit",
       {"n_steps", "n_sweeps", "subsample_size", "trace_every", "adadelta_rho", "adadelta_eps",
        "grad_clip", "plateau_stop", "plateau_window", "plateau_rel_tol", "posterior_draws"}},
      {"mcmc",
       {"n_sweeps", "burn_frac", "thin_to", "group_size", "adapt_interval", "scale_init",
        "accept_lo", "accept_hi", "scale_factor"}},
      {"tobit", {"k_alpha", "sigma_beta2", "sigma_l2"}},
      {"tvpvar", {"equations"}},
      {"toy", {}},
      {"compare", {"fit_dir", "mcmc_dir"}},
      {"gradcheck", {"n_points", "tolerance"}},
  };
  return s;
}

void check_keys(const nlohmann::json& j, const std::string& section) {
  const auto& known = schema();
  const auto it = known.find(section);
  if (it == known.end()) {
    throw std::invalid_argument("config: unknown section '" + section + "'");
  }
  for (const auto& [key, value] : j.items()) {
    if (!it->second.count(key)) {
      throw std::invalid_argument("config: unknown key '" +
                                  (section.empty() ? key : section + "." + key) + "'");
    }
    if (section.empty() && value.is_object()) check_keys(value, key);
  }
}

}  // namespace

void validate_config(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: root must be an object");
  check_keys(j, "");
  if (!j.contains("model") || !j["model"].is_string()) {
    throw std::invalid_argument("config: 'model' (string) is required");
  }
  const std::string model = j["model"];
  if (model != "tobit" && model != "tvpvar" && model != "toy") {
    throw std::invalid_argument("config: model must be tobit, tvpvar or toy");
  }
  if (!j.contains("seed") || !j["seed"].is_number_integer()) {
    throw std::invalid_argument("config: 'seed' (integer) is required");
  }
  if (!j.contains("output_dir") || !j["output_dir"].is_string()) {
    throw std::invalid_argument("config: 'output_dir' (string) is required");
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  validate_config(j);
  RunConfig cfg;
  cfg.model = j["model"];
  cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.output_dir = j["output_dir"];
  cfg.raw = j;
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

const nlohmann::json& RunConfig::section(const std::string& name) const {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!raw.contains(name)) return empty;
  return raw.at(name);
}

double RunConfig::get_or(const std::string& sec, const std::string& key, double fallback) const {
  const auto& s = section(sec);
  return s.contains(key) ? s.at(key).get<double>() : fallback;
}

int RunConfig::get_int_or(const std::string& sec, const std::string& key, int fallback) const {
  const auto& s = section(sec);
  return s.contains(key) ? s.at(key).get<int>() : fallback;
}

bool RunConfig::get_bool_or(const std::string& sec, const std::string& key, bool fallback) const {
  const auto& s = section(sec);
  return s.contains(key) ? s.at(key).get<bool>() : fallback;
}

std::string RunConfig::get_str_or(const std::string& sec, const std::string& key,
                                  const std::string& fallback) const {
  const auto& s = section(sec);
  return s.contains(key) ? s.at(key).get<std::string>() : fallback;
}

}  // namespace hybridvi
