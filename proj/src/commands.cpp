#include "hybridvi/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "hybridvi/csv.hpp"
#include "hybridvi/diagnostics.hpp"
#include "hybridvi/engine.hpp"
#include "hybridvi/stats.hpp"
#include "hybridvi/tobit.hpp"
#include "hybridvi/toy.hpp"
#include "hybridvi/tvpvar.hpp"

namespace hybridvi {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

VectorXd json_vector(const json& j) {
  VectorXd out(j.size());
  for (size_t i = 0; i < j.size(); ++i) out[i] = j[i].get<double>();
  return out;
}

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_json(const MatrixXd& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

MatrixXd json_matrix(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) out(i, c) = j[i][c].get<double>();
  }
  return out;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

// ---------------------------------------------------------------------------
// Parameter naming

std::vector<std::string> tobit_param_names(int p, int r, int ka) {
  std::vector<std::string> names;
  for (int i = 0; i < p; ++i) names.push_back("beta" + std::to_string(i));
  for (int i = 0; i < r; ++i) names.push_back("xi" + std::to_string(i));
  names.push_back("c");
  for (int i = 0; i < ka; ++i) names.push_back("kappa" + std::to_string(i));
  for (int j = 0; j < ka; ++j) {
    for (int i = j + 1; i < r; ++i) {
      names.push_back("l" + std::to_string(i) + "_" + std::to_string(j));
    }
  }
  return names;
}

std::vector<std::string> tvp_param_names(int J) {
  std::vector<std::string> names;
  for (int j = 0; j < J; ++j) names.push_back("tau" + std::to_string(j));
  for (int j = 0; j < J; ++j) names.push_back("chi_log" + std::to_string(j));
  names.push_back("xi_log");
  for (int j = 0; j < J; ++j) names.push_back("nu_log" + std::to_string(j));
  names.push_back("kappa_log");
  names.push_back("hbar");
  names.push_back("rho_probit");
  names.push_back("sigma2_log");
  return names;
}

// ---------------------------------------------------------------------------
// Data assembly

struct TobitSetup {
  TobitData data;
  int k_alpha = 1;
  TobitPrior prior;
  std::vector<int> focal, cross;  // indices into w columns
  bool simulated = false;
  TobitSimTruth truth;
};

TobitParams tobit_params_from_json(const json& sim, int p, int r, int ka) {
  TobitParams params;
  params.beta = sim.contains("beta") ? json_vector(sim["beta"]) : [&] {
    VectorXd b = VectorXd::Zero(p);
    b[0] = -0.3;
    for (int j = 1; j < p; ++j) b[j] = (j % 2 == 0) ? 0.8 : -0.6;
    return b;
  }();
  params.xi = sim.contains("xi") ? json_vector(sim["xi"])
                                 : VectorXd::Constant(r, std::log(0.5));
  params.c = sim.value("c", std::log(1.0 / 0.9));
  params.kappa = sim.contains("kappa") ? json_vector(sim["kappa"])
                                       : VectorXd::Constant(ka, std::log(0.7));
  params.l = sim.contains("l") ? json_vector(sim["l"])
                               : VectorXd::Constant(TobitParams::n_lower(r, ka), 0.4);
  if (params.beta.size() != p || params.xi.size() != r || params.kappa.size() != ka ||
      params.l.size() != TobitParams::n_lower(r, ka)) {
    throw std::invalid_argument("simulate: true parameter arrays have wrong lengths");
  }
  return params;
}

std::vector<int> name_indices(const std::vector<std::string>& pool,
                              const std::vector<std::string>& wanted, const char* what) {
  std::vector<int> out;
  for (const auto& name : wanted) {
    const auto it = std::find(pool.begin(), pool.end(), name);
    if (it == pool.end()) {
      throw std::invalid_argument(std::string("config: ") + what + " column '" + name +
                                  "' not found");
    }
    out.push_back(static_cast<int>(it - pool.begin()));
  }
  return out;
}

std::vector<std::string> json_names(const json& j) {
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(v.get<std::string>());
  return out;
}

TobitData read_tobit_csv(const std::string& path, const json& data_cfg,
                         std::vector<std::string>* x_names_out) {
  const auto table = read_csv(path);
  const int id_col = table.col("individual_id");
  const int week_col = table.col("week");
  const int y_col = table.col("y");
  if (id_col < 0 || week_col < 0 || y_col < 0) {
    throw std::invalid_argument("tobit data: need individual_id, week, y columns");
  }
  std::vector<std::string> x_names;
  if (data_cfg.contains("x_cols")) {
    x_names = json_names(data_cfg["x_cols"]);
  } else {
    for (const auto& h : table.header) {
      if (h != "individual_id" && h != "week" && h != "y") x_names.push_back(h);
    }
  }
  std::vector<int> x_cols;
  for (const auto& n : x_names) {
    const int c = table.col(n);
    if (c < 0) throw std::invalid_argument("tobit data: missing covariate column " + n);
    x_cols.push_back(c);
  }
  if (!data_cfg.contains("w_cols")) {
    throw std::invalid_argument("tobit data: w_cols (random-effect columns) required");
  }
  const auto w_names = json_names(data_cfg["w_cols"]);

  // Balanced panel grouped by first appearance, rows ordered by week.
  std::vector<std::string> id_order;
  std::map<std::string, std::vector<std::pair<double, size_t>>> by_id;
  for (size_t rix = 0; rix < table.rows.size(); ++rix) {
    const std::string id = table.rows[rix][id_col];
    if (!by_id.count(id)) id_order.push_back(id);
    by_id[id].push_back({table.num(rix, week_col), rix});
  }
  const int N = static_cast<int>(id_order.size());
  const int T = static_cast<int>(by_id[id_order[0]].size());
  for (const auto& id : id_order) {
    if (static_cast<int>(by_id[id].size()) != T) {
      throw std::invalid_argument("tobit data: unbalanced panel for individual " + id);
    }
    std::sort(by_id[id].begin(), by_id[id].end());
  }

  TobitData data;
  data.N = N;
  data.T = T;
  data.p = static_cast<int>(x_cols.size());
  data.X.resize(static_cast<long>(N) * T, data.p);
  data.y.resize(N, T);
  data.censored.assign(static_cast<size_t>(N) * T, false);
  for (int i = 0; i < N; ++i) {
    const auto& rows = by_id[id_order[i]];
    for (int t = 0; t < T; ++t) {
      const size_t rix = rows[t].second;
      for (int j = 0; j < data.p; ++j) data.X(data.cell(i, t), j) = table.num(rix, x_cols[j]);
      data.y(i, t) = table.num(rix, y_col);
      data.censored[data.cell(i, t)] = data.y(i, t) == 0.0;
    }
  }
  data.r = static_cast<int>(w_names.size());
  for (const auto& idx : name_indices(x_names, w_names, "w_cols")) data.w_idx.push_back(idx);
  data.validate();
  if (x_names_out) *x_names_out = x_names;
  return data;
}

TobitSetup make_tobit_setup(const RunConfig& cfg, Rng& rng) {
  TobitSetup setup;
  setup.k_alpha = cfg.get_int_or("tobit", "k_alpha", 1);
  setup.prior.sigma_beta2 = cfg.get_or("tobit", "sigma_beta2", 100.0);
  setup.prior.sigma_l2 = cfg.get_or("tobit", "sigma_l2", 100.0);

  std::vector<std::string> x_names;
  if (cfg.has("data") && cfg.section("data").contains("path")) {
    setup.data = read_tobit_csv(cfg.section("data")["path"], cfg.section("data"), &x_names);
  } else if (cfg.has("simulate")) {
    const auto& sim = cfg.section("simulate");
    const int N = sim.at("N"), T = sim.at("T"), p = sim.at("p"), r = sim.at("r");
    const int ka = sim.value("k_alpha", setup.k_alpha);
    setup.k_alpha = ka;
    std::vector<int> w_idx(r);
    std::iota(w_idx.begin(), w_idx.end(), 0);
    if (sim.contains("w_idx")) {
      w_idx.clear();
      for (const auto& v : sim["w_idx"]) w_idx.push_back(v.get<int>());
    }
    const auto params = tobit_params_from_json(sim, p, r, ka);
    setup.data = simulate_tobit(N, T, p, r, params, w_idx, rng, &setup.truth);
    setup.simulated = true;
    for (int j = 0; j < p; ++j) x_names.push_back("x" + std::to_string(j));
  } else {
    throw std::invalid_argument("tobit: need data.path or a simulate section");
  }

  // Focal / cross blocks (indices within the w columns).
  std::vector<std::string> w_names;
  for (int idx : setup.data.w_idx) w_names.push_back(x_names[idx]);
  if (cfg.has("data") && cfg.section("data").contains("focal_cols")) {
    setup.focal = name_indices(w_names, json_names(cfg.section("data")["focal_cols"]), "focal");
  }
  if (cfg.has("data") && cfg.section("data").contains("cross_cols")) {
    setup.cross = name_indices(w_names, json_names(cfg.section("data")["cross_cols"]), "cross");
  }
  if (setup.focal.empty()) setup.focal = {0};
  if (setup.cross.empty()) setup.cross = {setup.data.r - 1};
  return setup;
}

TVPVARData read_tvpvar_csv(const std::string& path, const json& data_cfg) {
  const auto table = read_csv(path);
  std::vector<std::string> series;
  if (data_cfg.contains("series_cols")) {
    series = json_names(data_cfg["series_cols"]);
  } else {
    for (const auto& h : table.header) {
      if (h != "date") series.push_back(h);
    }
  }
  TVPVARData data;
  data.N = static_cast<int>(series.size());
  data.T = static_cast<int>(table.rows.size());
  data.p = data_cfg.value("lags", 1);
  data.y.resize(data.T, data.N);
  for (int j = 0; j < data.N; ++j) {
    const int c = table.col(series[j]);
    if (c < 0) throw std::invalid_argument("tvpvar data: missing series column " + series[j]);
    for (int t = 0; t < data.T; ++t) data.y(t, j) = table.num(t, c);
  }
  data.validate();
  return data;
}

TVPVARData make_tvpvar_data(const RunConfig& cfg, Rng& rng, TvpSimTruth* truth,
                            bool* simulated) {
  if (simulated) *simulated = false;
  if (cfg.has("data") && cfg.section("data").contains("path")) {
    return read_tvpvar_csv(cfg.section("data")["path"], cfg.section("data"));
  }
  if (cfg.has("simulate")) {
    const auto& sim = cfg.section("simulate");
    const int N = sim.at("N"), T = sim.at("T"), p = sim.value("p", 1);
    TvpSimHyper hyper;
    hyper.hbar = sim.contains("hbar") ? json_vector(sim["hbar"]) : VectorXd::Constant(N, -1.0);
    hyper.rho = sim.contains("rho") ? json_vector(sim["rho"]) : VectorXd::Constant(N, 0.97);
    hyper.sigma_e =
        sim.contains("sigma_e") ? json_vector(sim["sigma_e"]) : VectorXd::Constant(N, 0.45);
    hyper.coef_rw_sd = sim.value("coef_rw_sd", 0.01);
    hyper.l_rw_sd = sim.value("l_rw_sd", 0.01);
    hyper.init_coef_scale = sim.value("init_coef_scale", 0.25);
    if (simulated) *simulated = true;
    return simulate_tvpvar(N, T, p, hyper, rng, truth);
  }
  throw std::invalid_argument("tvpvar: need data.path or a simulate section");
}

ConjugateToyModel make_toy_model(const RunConfig& cfg, Rng& rng) {
  const auto& sim = cfg.section("simulate");
  const int m = sim.value("m", 2);
  const int n_units = sim.value("n_units", 8);
  const double sz = sim.value("sz", 0.8);
  const double sy = sim.value("sy", 0.6);
  const double off = sim.value("sigma0_offdiag", 0.4);
  VectorXd mu0 = sim.contains("mu0") ? json_vector(sim["mu0"]) : VectorXd::Zero(m);
  MatrixXd sigma0 = MatrixXd::Identity(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j) sigma0(i, j) = off;
    }
  }
  return ConjugateToyModel::simulate(mu0, sigma0, sz, sy, n_units, rng);
}

FitConfig fit_config_from(const RunConfig& cfg) {
  FitConfig fc;
  fc.n_steps = cfg.get_int_or("fit", "n_steps", 10000);
  fc.n_sweeps = cfg.get_int_or("fit", "n_sweeps", 5);
  const int sub = cfg.get_int_or("fit", "subsample_size", 0);
  if (sub > 0) fc.subsample_size = sub;
  fc.seed = cfg.seed;
  fc.trace_every = cfg.get_int_or("fit", "trace_every", 100);
  fc.adadelta_rho = cfg.get_or("fit", "adadelta_rho", 0.95);
  fc.adadelta_eps = cfg.get_or("fit", "adadelta_eps", 1e-6);
  fc.grad_clip = cfg.get_or("fit", "grad_clip", 1e4);
  fc.plateau_stop = cfg.get_bool_or("fit", "plateau_stop", false);
  fc.plateau_window = cfg.get_int_or("fit", "plateau_window", 500);
  fc.plateau_rel_tol = cfg.get_or("fit", "plateau_rel_tol", 1e-4);
  return fc;
}

// ---------------------------------------------------------------------------
// Bundles shared by fit / mcmc / compare

void write_trace(const std::string& dir, const FitTrace& trace) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : trace.rows) {
    rows.push_back({std::to_string(r.step), format_double(r.grad_norm),
                    format_double(r.diagnostic), format_double(r.elapsed_ms)});
  }
  write_csv(dir + "/trace.csv", {"step", "grad_norm", "diagnostic", "elapsed_ms"}, rows);

  std::vector<std::vector<std::string>> snap;
  for (size_t i = 0; i < trace.lambda_snapshots.size(); ++i) {
    std::vector<std::string> row{std::to_string(trace.snapshot_steps[i])};
    for (int j = 0; j < trace.lambda_snapshots[i].size(); ++j) {
      row.push_back(format_double(trace.lambda_snapshots[i][j]));
    }
    snap.push_back(std::move(row));
  }
  std::vector<std::string> header{"step"};
  const int width = trace.lambda_snapshots.empty() ? 0
                    : static_cast<int>(trace.lambda_snapshots[0].size());
  for (int j = 0; j < width; ++j) header.push_back("lambda" + std::to_string(j));
  write_csv(dir + "/lambda_snapshots.csv", header, snap);
}

void write_summary(const std::string& dir, const MatrixXd& theta_draws,
                   const std::vector<std::string>& names) {
  std::vector<std::vector<std::string>> rows;
  const long n = theta_draws.rows();
  for (int j = 0; j < theta_draws.cols(); ++j) {
    std::vector<double> col(n);
    for (long s = 0; s < n; ++s) col[s] = theta_draws(s, j);
    std::sort(col.begin(), col.end());
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var /= std::max<long>(1, n - 1);
    auto q = [&](double p) {
      const double pos = p * (n - 1);
      const long lo = static_cast<long>(pos);
      const long hi = std::min(lo + 1, n - 1);
      const double w = pos - lo;
      return (1 - w) * col[lo] + w * col[hi];
    };
    rows.push_back({names[j], format_double(mean), format_double(std::sqrt(var)),
                    format_double(q(0.05)), format_double(q(0.5)), format_double(q(0.95))});
  }
  write_csv(dir + "/posterior_summary.csv", {"param", "mean", "sd", "q05", "q50", "q95"}, rows);
}

void write_theta_draws(const std::string& dir, const MatrixXd& draws,
                       const std::vector<std::string>& names) {
  write_matrix_csv(dir + "/theta_draws.csv", draws, names);
  write_vector_csv(dir + "/theta_point.csv", draws.colwise().mean().transpose());
}

void write_alpha_means(const std::string& dir, const MatrixXd& alpha) {
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < alpha.rows(); ++i) {
    for (int j = 0; j < alpha.cols(); ++j) {
      rows.push_back({std::to_string(i), std::to_string(j), format_double(alpha(i, j))});
    }
  }
  write_csv(dir + "/alpha_means.csv", {"individual", "coef", "value"}, rows);
}

MatrixXd read_alpha_means(const std::string& dir) {
  const auto table = read_csv(dir + "/alpha_means.csv");
  int N = 0, r = 0;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    N = std::max(N, static_cast<int>(table.num(i, 0)) + 1);
    r = std::max(r, static_cast<int>(table.num(i, 1)) + 1);
  }
  MatrixXd out(N, r);
  for (size_t i = 0; i < table.rows.size(); ++i) {
    out(static_cast<int>(table.num(i, 0)), static_cast<int>(table.num(i, 1))) = table.num(i, 2);
  }
  return out;
}

// V_alpha posterior summaries in the variance/correlation layout used for
// reporting: diagonal entries are variances, off-diagonals correlations.
void write_v_alpha_summary(const std::string& dir, const MatrixXd& theta_draws, int p, int r,
                           int ka) {
  std::vector<std::vector<std::string>> rows;
  const long n = theta_draws.rows();
  for (int a = 0; a < r; ++a) {
    for (int b = 0; b <= a; ++b) {
      std::vector<double> vals(n);
      for (long s = 0; s < n; ++s) {
        const auto params = TobitParams::unpack(theta_draws.row(s).transpose(), p, r, ka);
        const MatrixXd v = assemble_v_alpha(params).dense();
        vals[s] = (a == b) ? v(a, a) : v(a, b) / std::sqrt(v(a, a) * v(b, b));
      }
      std::sort(vals.begin(), vals.end());
      const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
      auto q = [&](double p_) {
        const double pos = p_ * (n - 1);
        const long lo = static_cast<long>(pos);
        const long hi = std::min(lo + 1, n - 1);
        const double w = pos - lo;
        return (1 - w) * vals[lo] + w * vals[hi];
      };
      rows.push_back({std::to_string(a), std::to_string(b), format_double(mean),
                      format_double(q(0.025)), format_double(q(0.975))});
    }
  }
  write_csv(dir + "/v_alpha_summary.csv", {"row", "col", "mean", "q025", "q975"}, rows);
}

std::vector<MatrixXd> v_alpha_draws(const MatrixXd& theta_draws, int p, int r, int ka,
                                    int max_draws = 2000) {
  std::vector<MatrixXd> out;
  const long n = theta_draws.rows();
  const long stride = std::max<long>(1, n / max_draws);
  for (long s = 0; s < n; s += stride) {
    const auto params = TobitParams::unpack(theta_draws.row(s).transpose(), p, r, ka);
    out.push_back(assemble_v_alpha(params).dense());
  }
  return out;
}

void write_vol_path(const std::string& dir, const VectorXd& vol) {
  std::vector<std::vector<std::string>> rows;
  for (int t = 0; t < vol.size(); ++t) {
    rows.push_back({std::to_string(t), format_double(vol[t])});
  }
  write_csv(dir + "/vol_path.csv", {"t", "value"}, rows);
}

}  // namespace

// ---------------------------------------------------------------------------
// VA serialization

void save_va(const std::string& dir, const VaFamily& va) {
  write_vector_csv(dir + "/lambda.csv", va.pack());
  const auto meta = va.meta();
  json j{{"family", meta.family},
         {"m", meta.m},
         {"k", meta.k},
         {"layout_version", meta.layout_version},
         {"vech_order", "column_major_lower_trapezoid"}};
  if (const auto* aug = dynamic_cast<const AugmentedGaussianVA*>(&va)) {
    json blocks = json::array();
    for (const auto& sp : aug->specs()) {
      blocks.push_back({{"name", sp.name}, {"dim", sp.dim}, {"k", sp.k}});
    }
    j["blocks"] = blocks;
  }
  write_json(dir + "/lambda_meta.json", j);
}

std::unique_ptr<VaFamily> load_va(const std::string& dir) {
  const json meta = read_json(dir + "/lambda_meta.json");
  const VectorXd lambda = read_vector_csv(dir + "/lambda.csv");
  const std::string family = meta.at("family");
  const int m = meta.at("m"), k = meta.at("k");
  if (family == "gaussian_factor") {
    return std::make_unique<GaussianFactorVA>(GaussianFactorVA::unpack(lambda, m, k));
  }
  if (family == "gaussian_copula_yj") {
    return std::make_unique<GaussianCopulaVA>(GaussianCopulaVA::unpack(lambda, m, k));
  }
  if (family == "augmented_gaussian") {
    std::vector<AugmentedGaussianVA::BlockSpec> specs;
    for (const auto& b : meta.at("blocks")) {
      specs.push_back({b.at("name"), b.at("dim"), b.at("k")});
    }
    auto va = std::make_unique<AugmentedGaussianVA>(specs);
    // The packed layout for the augmented family equals its step vector.
    va->set_step_vector(lambda);
    return va;
  }
  throw std::invalid_argument("load_va: unknown family " + family);
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  Rng rng(cfg.seed);
  json metrics;

  if (cfg.model == "tobit") {
    TobitSetup setup = make_tobit_setup(cfg, rng);
    if (!setup.simulated) throw std::invalid_argument("simulate: config lacks simulate section");
    const auto& data = setup.data;
    std::vector<std::string> header{"individual_id", "week", "y"};
    for (int j = 0; j < data.p; ++j) header.push_back("x" + std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < data.N; ++i) {
      for (int t = 0; t < data.T; ++t) {
        std::vector<std::string> row{std::to_string(i), std::to_string(t),
                                     format_double(data.y(i, t))};
        for (int j = 0; j < data.p; ++j) {
          row.push_back(format_double(data.X(data.cell(i, t), j)));
        }
        rows.push_back(std::move(row));
      }
    }
    write_csv(cfg.output_dir + "/data.csv", header, rows);
    json truth{{"model", "tobit"},
               {"theta", vector_json(setup.truth.params.pack())},
               {"alpha", matrix_json(setup.truth.alpha)},
               {"ystar", matrix_json(setup.truth.ystar)},
               {"w_idx", setup.data.w_idx},
               {"p", data.p},
               {"r", data.r},
               {"k_alpha", setup.k_alpha}};
    write_json(cfg.output_dir + "/truth.json", truth);
    const double frac =
        std::count(data.censored.begin(), data.censored.end(), true) /
        static_cast<double>(data.N * data.T);
    metrics["censoring_fraction"] = frac;
    std::printf("censoring_fraction %.6f\n", frac);
  } else if (cfg.model == "tvpvar") {
    TvpSimTruth truth;
    bool simulated = false;
    const auto data = make_tvpvar_data(cfg, rng, &truth, &simulated);
    if (!simulated) throw std::invalid_argument("simulate: config lacks simulate section");
    std::vector<std::string> header{"date"};
    for (int j = 0; j < data.N; ++j) header.push_back("y" + std::to_string(j + 1));
    std::vector<std::vector<std::string>> rows;
    for (int t = 0; t < data.T; ++t) {
      std::vector<std::string> row{std::to_string(t + 1)};
      for (int j = 0; j < data.N; ++j) row.push_back(format_double(data.y(t, j)));
      rows.push_back(std::move(row));
    }
    write_csv(cfg.output_dir + "/data.csv", header, rows);
    json jtruth{{"model", "tvpvar"}, {"h", matrix_json(truth.h)}};
    json coefs = json::array();
    for (const auto& c : truth.coefs) {
      json jc{{"beta0", vector_json(c.beta0)}, {"L", matrix_json(c.L)}};
      json jB = json::array();
      for (const auto& B : c.B) jB.push_back(matrix_json(B));
      jc["B"] = jB;
      coefs.push_back(jc);
    }
    jtruth["coefs"] = coefs;
    write_json(cfg.output_dir + "/truth.json", jtruth);
  } else if (cfg.model == "toy") {
    const auto toy = make_toy_model(cfg, rng);
    std::vector<std::string> header{"unit"};
    for (int j = 0; j < toy.dim_theta(); ++j) header.push_back("y" + std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < toy.unit_count(); ++i) {
      std::vector<std::string> row{std::to_string(i)};
      for (int j = 0; j < toy.dim_theta(); ++j) row.push_back(format_double(toy.data()(i, j)));
      rows.push_back(std::move(row));
    }
    write_csv(cfg.output_dir + "/data.csv", header, rows);
    write_json(cfg.output_dir + "/truth.json",
               json{{"model", "toy"},
                    {"posterior_mean", vector_json(toy.posterior_mean())},
                    {"log_evidence", toy.log_evidence()}});
  } else {
    throw std::invalid_argument("simulate: unsupported model " + cfg.model);
  }
  write_json(cfg.output_dir + "/metrics.json", metrics);
  return 0;
}

// ---------------------------------------------------------------------------
// fit

namespace {

struct TobitFitOutputs {
  MatrixXd theta_draws;
  MatrixXd alpha_mean;
  double rmse = 0.0;
};

// Posterior summaries for a calibrated hybrid VA: theta draws from q0 and
// latent means from warm-started conditional sweeps at each theta draw.
TobitFitOutputs tobit_hybrid_outputs(const TobitModel& model, const VaFamily& va,
                                     const VectorXd& z_init, int n_draws, int n_sweeps,
                                     Rng& rng) {
  TobitFitOutputs out;
  out.theta_draws.resize(n_draws, va.dim_theta());
  const auto& data = model.data();
  MatrixXd alpha_acc = MatrixXd::Zero(data.N, data.r);
  VectorXd z = z_init;
  for (int s = 0; s < n_draws; ++s) {
    const auto draw = va.sample_reparam(rng);
    out.theta_draws.row(s) = draw.theta.transpose();
    model.sample_latent(draw.theta, z, n_sweeps, rng);
    alpha_acc += TobitLatent::unpack(z, data).alpha;
  }
  out.alpha_mean = alpha_acc / n_draws;
  const VectorXd point = out.theta_draws.colwise().mean().transpose();
  out.rmse = rmse_metric(data, out.alpha_mean, model.unpack(point));
  return out;
}

int fit_tobit(const RunConfig& cfg) {
  Rng rng(cfg.seed);
  TobitSetup setup = make_tobit_setup(cfg, rng);
  TobitModel model(setup.data, setup.k_alpha, setup.prior);
  const int m = model.dim_theta();
  const auto names = tobit_param_names(setup.data.p, setup.data.r, setup.k_alpha);
  const std::string family = cfg.get_str_or("va", "family", "copula");
  const FitConfig fc = fit_config_from(cfg);
  const int n_draws = cfg.get_int_or("fit", "posterior_draws", 1000);
  json metrics;

  if (family == "gaussian" || family == "copula") {
    const int k = cfg.get_int_or("va", "k", family == "copula" ? 10 : 5);
    const double d0 = cfg.get_or("va", "d0", 0.01);
    std::unique_ptr<VaFamily> init;
    if (family == "gaussian") {
      init = std::make_unique<GaussianFactorVA>(GaussianFactorVA::initial(m, k, d0));
    } else {
      init = std::make_unique<GaussianCopulaVA>(GaussianCopulaVA::initial(m, k, d0));
    }
    auto res = run_sga(model, *init, fc);
    save_va(cfg.output_dir, *res.va_tail_avg);
    write_vector_csv(cfg.output_dir + "/lambda_final.csv", res.va->pack());
    write_trace(cfg.output_dir, res.trace);

    Rng post_rng(cfg.seed ^ 0x706f73746572696fULL);
    const auto outputs = tobit_hybrid_outputs(model, *res.va_tail_avg, res.final_latent,
                                              n_draws, fc.n_sweeps, post_rng);
    write_theta_draws(cfg.output_dir, outputs.theta_draws, names);
    write_summary(cfg.output_dir, outputs.theta_draws, names);
    write_alpha_means(cfg.output_dir, outputs.alpha_mean);
    write_v_alpha_summary(cfg.output_dir, outputs.theta_draws, setup.data.p, setup.data.r,
                          setup.k_alpha);
    metrics["rmse"] = outputs.rmse;
    metrics["steps_run"] = res.trace.steps_run;
    metrics["clip_events"] = res.trace.clip_events;
    if (!res.trace.rows.empty()) {
      metrics["elapsed_ms"] = res.trace.rows.back().elapsed_ms;
      metrics["ms_per_step"] = res.trace.rows.back().elapsed_ms / res.trace.steps_run;
    }
  } else if (family == "augmented_factor" || family == "augmented_meanfield") {
    TobitAugmentedModel aug(model);
    std::vector<AugmentedGaussianVA::BlockSpec> specs;
    const bool meanfield = family == "augmented_meanfield";
    specs.push_back({"theta", m, meanfield ? 0 : cfg.get_int_or("va", "k_theta", 10)});
    for (int i = 0; i < setup.data.N; ++i) {
      specs.push_back({"alpha", setup.data.r, meanfield ? 0 : cfg.get_int_or("va", "k_block", 1)});
    }
    const double d0 = cfg.get_or("va", "d0", 0.01);
    auto res = fit_augmented_benchmark(aug, AugmentedGaussianVA(specs, d0), fc);
    save_va(cfg.output_dir, *res.va_tail_avg);
    write_trace(cfg.output_dir, res.trace);

    const auto* va = dynamic_cast<const AugmentedGaussianVA*>(res.va_tail_avg.get());
    Rng post_rng(cfg.seed ^ 0x706f73746572696fULL);
    MatrixXd theta_draws(n_draws, m);
    for (int s = 0; s < n_draws; ++s) {
      theta_draws.row(s) = va->block(0).sample_reparam(post_rng).theta.transpose();
    }
    MatrixXd alpha_mean(setup.data.N, setup.data.r);
    for (int i = 0; i < setup.data.N; ++i) {
      alpha_mean.row(i) = va->block(i + 1).mu().transpose();
    }
    write_theta_draws(cfg.output_dir, theta_draws, names);
    write_summary(cfg.output_dir, theta_draws, names);
    write_alpha_means(cfg.output_dir, alpha_mean);
    write_v_alpha_summary(cfg.output_dir, theta_draws, setup.data.p, setup.data.r,
                          setup.k_alpha);
    metrics["rmse"] =
        rmse_metric(setup.data, alpha_mean, model.unpack(va->block(0).mu()));
    metrics["steps_run"] = res.trace.steps_run;
    if (!res.trace.rows.empty()) {
      metrics["elapsed_ms"] = res.trace.rows.back().elapsed_ms;
      metrics["ms_per_step"] = res.trace.rows.back().elapsed_ms / res.trace.steps_run;
    }
  } else {
    throw std::invalid_argument("fit: unknown va.family " + family);
  }
  write_json(cfg.output_dir + "/metrics.json", metrics);
  return 0;
}

int fit_tvpvar(const RunConfig& cfg) {
  Rng rng(cfg.seed);
  TvpSimTruth truth;
  bool simulated = false;
  const auto data = make_tvpvar_data(cfg, rng, &truth, &simulated);
  std::vector<int> equations;
  if (cfg.has("tvpvar") && cfg.section("tvpvar").contains("equations")) {
    for (const auto& e : cfg.section("tvpvar")["equations"]) equations.push_back(e.get<int>());
  } else {
    equations.resize(data.N);
    std::iota(equations.begin(), equations.end(), 0);
  }
  const std::string family = cfg.get_str_or("va", "family", "gaussian");
  const FitConfig base_fc = fit_config_from(cfg);
  const int n_draws = cfg.get_int_or("fit", "posterior_draws", 500);
  json metrics;
  std::map<int, std::pair<VectorXd, MatrixXd>> eta_points;  // eq -> (theta_point, eta_path)

  for (int eq : equations) {
    const std::string dir = cfg.output_dir + "/eq" + std::to_string(eq);
    ensure_dir(dir);
    const auto design = build_design(data, eq);
    TvpVarEquationModel model(design);
    const int m = model.dim_theta();
    const auto names = tvp_param_names(2 * design.q);
    FitConfig fc = base_fc;
    fc.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (eq + 1));

    MatrixXd theta_draws;
    VectorXd h_mean = VectorXd::Zero(design.T_eff);
    VectorXd vol_mean = VectorXd::Zero(design.T_eff);
    MatrixXd eta_mean = MatrixXd::Zero(design.T_eff, design.q);

    if (family == "gaussian" || family == "copula") {
      const int k = cfg.get_int_or("va", "k", 5);
      const double d0 = cfg.get_or("va", "d0", 0.01);
      std::unique_ptr<VaFamily> init;
      if (family == "gaussian") {
        init = std::make_unique<GaussianFactorVA>(GaussianFactorVA::initial(m, k, d0));
      } else {
        init = std::make_unique<GaussianCopulaVA>(GaussianCopulaVA::initial(m, k, d0));
      }
      auto res = run_sga(model, *init, fc);
      save_va(dir, *res.va_tail_avg);
      write_trace(dir, res.trace);

      Rng post_rng(fc.seed ^ 0x706f73746572696fULL);
      theta_draws.resize(n_draws, m);
      VectorXd z = res.final_latent;
      for (int s = 0; s < n_draws; ++s) {
        const auto draw = res.va_tail_avg->sample_reparam(post_rng);
        theta_draws.row(s) = draw.theta.transpose();
        model.sample_latent(draw.theta, z, fc.n_sweeps, post_rng);
        const auto latent = TvpLatent::unpack(z, design.T_eff, design.q);
        h_mean += latent.h;
        vol_mean += (latent.h * 0.5).array().exp().matrix();
        eta_mean += latent.eta_tilde;
      }
      h_mean /= n_draws;
      vol_mean /= n_draws;
      eta_mean /= n_draws;
      metrics["eq" + std::to_string(eq)] = {{"steps_run", res.trace.steps_run},
                                            {"clip_events", res.trace.clip_events}};
    } else if (family == "augmented_factor" || family == "augmented_meanfield") {
      TvpVarAugmentedModel aug(model);
      const bool meanfield = family == "augmented_meanfield";
      std::vector<AugmentedGaussianVA::BlockSpec> specs{
          {"theta", m, meanfield ? 0 : cfg.get_int_or("va", "k_theta", 5)},
          {"h", design.T_eff, meanfield ? 0 : cfg.get_int_or("va", "k_block", 1)},
          {"eta", design.T_eff * design.q, meanfield ? 0 : cfg.get_int_or("va", "k_block", 1)}};
      auto res = fit_augmented_benchmark(aug, AugmentedGaussianVA(specs, cfg.get_or("va", "d0", 0.01)), fc);
      save_va(dir, *res.va_tail_avg);
      write_trace(dir, res.trace);
      const auto* va = dynamic_cast<const AugmentedGaussianVA*>(res.va_tail_avg.get());

      Rng post_rng(fc.seed ^ 0x706f73746572696fULL);
      theta_draws.resize(n_draws, m);
      for (int s = 0; s < n_draws; ++s) {
        theta_draws.row(s) = va->block(0).sample_reparam(post_rng).theta.transpose();
      }
      h_mean = va->block(1).mu();
      // E[exp(h/2)] under the Gaussian block: exp(mu/2 + var/8).
      const auto& hblock = va->block(1);
      const MatrixXd hcov = hblock.cov().dense();
      for (int t = 0; t < design.T_eff; ++t) {
        vol_mean[t] = std::exp(0.5 * hblock.mu()[t] + 0.125 * hcov(t, t));
      }
      const VectorXd eta_flat = va->block(2).mu();
      for (int t = 0; t < design.T_eff; ++t) {
        eta_mean.row(t) = eta_flat.segment(static_cast<long>(t) * design.q, design.q).transpose();
      }
      metrics["eq" + std::to_string(eq)] = {{"steps_run", res.trace.steps_run}};
    } else {
      throw std::invalid_argument("fit: unknown va.family " + family);
    }

    write_theta_draws(dir, theta_draws, names);
    write_summary(dir, theta_draws, names);
    write_vol_path(dir, vol_mean);
    write_vector_csv(dir + "/h_point.csv", h_mean);
    std::vector<std::string> eta_header;
    for (int j = 0; j < design.q; ++j) eta_header.push_back("eta" + std::to_string(j));
    write_matrix_csv(dir + "/eta_point.csv", eta_mean, eta_header);
    eta_points[eq] = {theta_draws.colwise().mean().transpose(), eta_mean};
  }

  // Recovered structural coefficient paths when every equation was fitted.
  if (static_cast<int>(equations.size()) == data.N) {
    std::vector<std::vector<std::string>> rows;
    const int T_eff = data.T - data.p;
    for (int t = 0; t < T_eff; ++t) {
      std::vector<VectorXd> eta_t(data.N);
      for (int eq = 0; eq < data.N; ++eq) {
        const auto& [theta_point, eta_path] = eta_points[eq];
        const auto params = TvpParams::unpack(theta_point, 2 * (data.p * data.N + eq + 1));
        const VectorXd alpha = params.alpha();
        const int q = data.p * data.N + eq + 1;
        eta_t[eq] = alpha.head(q) +
                    alpha.tail(q).cwiseProduct(eta_path.row(t).transpose());
      }
      const auto vc = recover_var_coefficients(eta_t, data.N, data.p);
      for (int i = 0; i < data.N; ++i) {
        rows.push_back({std::to_string(t), "beta0_" + std::to_string(i + 1),
                        format_double(vc.beta0[i])});
      }
      for (int lag = 0; lag < data.p; ++lag) {
        for (int i = 0; i < data.N; ++i) {
          for (int j = 0; j < data.N; ++j) {
            rows.push_back({std::to_string(t),
                            "B" + std::to_string(lag + 1) + "_" + std::to_string(i + 1) +
                                std::to_string(j + 1),
                            format_double(vc.B[lag](i, j))});
          }
        }
      }
      for (int i = 1; i < data.N; ++i) {
        for (int j = 0; j < i; ++j) {
          rows.push_back({std::to_string(t),
                          "L_" + std::to_string(i + 1) + std::to_string(j + 1),
                          format_double(vc.L(i, j))});
        }
      }
    }
    write_csv(cfg.output_dir + "/coef_paths.csv", {"t", "name", "value"}, rows);
  }
  write_json(cfg.output_dir + "/metrics.json", metrics);
  return 0;
}

int fit_toy(const RunConfig& cfg) {
  Rng rng(cfg.seed);
  const auto toy = make_toy_model(cfg, rng);
  const int m = toy.dim_theta();
  const std::string family = cfg.get_str_or("va", "family", "gaussian");
  const FitConfig fc = fit_config_from(cfg);
  const int k = cfg.get_int_or("va", "k", 0);
  std::unique_ptr<VaFamily> init;
  if (family == "copula") {
    init = std::make_unique<GaussianCopulaVA>(GaussianCopulaVA::initial(m, k, 0.05));
  } else {
    init = std::make_unique<GaussianFactorVA>(GaussianFactorVA::initial(m, k, 0.05));
  }
  auto res = run_sga(toy, *init, fc);
  save_va(cfg.output_dir, *res.va_tail_avg);
  write_trace(cfg.output_dir, res.trace);
  const int n_draws = cfg.get_int_or("fit", "posterior_draws", 2000);
  Rng post_rng(cfg.seed ^ 0x706f73746572696fULL);
  MatrixXd draws(n_draws, m);
  for (int s = 0; s < n_draws; ++s) {
    draws.row(s) = res.va_tail_avg->sample_reparam(post_rng).theta.transpose();
  }
  std::vector<std::string> names;
  for (int j = 0; j < m; ++j) names.push_back("theta" + std::to_string(j));
  write_theta_draws(cfg.output_dir, draws, names);
  write_summary(cfg.output_dir, draws, names);
  json metrics{{"posterior_mean_error",
                (draws.colwise().mean().transpose() - toy.posterior_mean()).norm()},
               {"steps_run", res.trace.steps_run}};
  write_json(cfg.output_dir + "/metrics.json", metrics);
  return 0;
}

}  // namespace

int cmd_fit(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  if (cfg.model == "tobit") return fit_tobit(cfg);
  if (cfg.model == "tvpvar") return fit_tvpvar(cfg);
  if (cfg.model == "toy") return fit_toy(cfg);
  throw std::invalid_argument("fit: unsupported model " + cfg.model);
}

// ---------------------------------------------------------------------------
// mcmc

int cmd_mcmc(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  Rng rng(cfg.seed);
  json metrics;

  if (cfg.model == "tobit") {
    TobitSetup setup = make_tobit_setup(cfg, rng);
    TobitModel model(setup.data, setup.k_alpha, setup.prior);
    TobitMcmcConfig mcfg;
    mcfg.n_sweeps = static_cast<long>(cfg.get_or("mcmc", "n_sweeps", 200000));
    mcfg.burn_frac = cfg.get_or("mcmc", "burn_frac", 0.5);
    mcfg.thin_to = cfg.get_int_or("mcmc", "thin_to", 10000);
    mcfg.group_size = cfg.get_int_or("mcmc", "group_size", 10);
    mcfg.adapt_interval = cfg.get_int_or("mcmc", "adapt_interval", 100);
    mcfg.scale_init = cfg.get_or("mcmc", "scale_init", 0.1);
    const auto res = mcmc_tobit(model, mcfg, rng);

    const auto names = tobit_param_names(setup.data.p, setup.data.r, setup.k_alpha);
    write_theta_draws(cfg.output_dir, res.theta_draws, names);
    write_summary(cfg.output_dir, res.theta_draws, names);
    write_alpha_means(cfg.output_dir, res.alpha_mean);
    write_v_alpha_summary(cfg.output_dir, res.theta_draws, setup.data.p, setup.data.r,
                          setup.k_alpha);
    std::vector<std::vector<std::string>> acc, ess;
    for (int e = 0; e < res.accept_rate.size(); ++e) {
      acc.push_back({names[e], format_double(res.accept_rate[e])});
      ess.push_back({names[e], format_double(res.ess[e])});
    }
    write_csv(cfg.output_dir + "/accept_rates.csv", {"param", "rate"}, acc);
    write_csv(cfg.output_dir + "/ess.csv", {"param", "ess"}, ess);
    metrics["rmse"] =
        rmse_metric(setup.data, res.alpha_mean,
                    model.unpack(res.theta_mean()));
    metrics["n_kept"] = static_cast<long>(res.theta_draws.rows());
    metrics["flagged_coords"] = res.flagged_coords;
  } else if (cfg.model == "tvpvar") {
    TvpSimTruth truth;
    bool simulated = false;
    const auto data = make_tvpvar_data(cfg, rng, &truth, &simulated);
    std::vector<int> equations;
    if (cfg.has("tvpvar") && cfg.section("tvpvar").contains("equations")) {
      for (const auto& e : cfg.section("tvpvar")["equations"]) equations.push_back(e.get<int>());
    } else {
      equations.resize(data.N);
      std::iota(equations.begin(), equations.end(), 0);
    }
    TvpMcmcConfig mcfg;
    mcfg.n_sweeps = static_cast<long>(cfg.get_or("mcmc", "n_sweeps", 20000));
    mcfg.burn_frac = cfg.get_or("mcmc", "burn_frac", 0.5);
    mcfg.thin_to = cfg.get_int_or("mcmc", "thin_to", 5000);
    mcfg.adapt_interval = cfg.get_int_or("mcmc", "adapt_interval", 100);
    mcfg.scale_init = cfg.get_or("mcmc", "scale_init", 0.2);
    for (int eq : equations) {
      const std::string dir = cfg.output_dir + "/eq" + std::to_string(eq);
      ensure_dir(dir);
      const auto design = build_design(data, eq);
      TvpVarEquationModel model(design);
      Rng eq_rng = rng.substream(eq + 1);
      const auto res = mcmc_tvpvar_equation(model, mcfg, eq_rng);
      const auto names = tvp_param_names(2 * design.q);
      write_theta_draws(dir, res.theta_draws, names);
      write_summary(dir, res.theta_draws, names);
      write_vol_path(dir, res.vol_mean);
      write_vector_csv(dir + "/h_point.csv", res.h_mean);
      std::vector<std::string> eta_header;
      for (int j = 0; j < design.q; ++j) eta_header.push_back("eta" + std::to_string(j));
      write_matrix_csv(dir + "/eta_point.csv", res.eta_mean, eta_header);
      std::vector<std::vector<std::string>> acc, ess;
      const char* scalar_names[3] = {"hbar", "rho_probit", "sigma2_log"};
      for (int w = 0; w < 3; ++w) {
        acc.push_back({scalar_names[w], format_double(res.accept_rate[w])});
      }
      for (int e = 0; e < res.ess.size(); ++e) {
        ess.push_back({names[e], format_double(res.ess[e])});
      }
      write_csv(dir + "/accept_rates.csv", {"param", "rate"}, acc);
      write_csv(dir + "/ess.csv", {"param", "ess"}, ess);
      metrics["eq" + std::to_string(eq)] = {{"n_kept", static_cast<long>(res.theta_draws.rows())}};
    }
  } else {
    throw std::invalid_argument("mcmc: unsupported model " + cfg.model);
  }
  write_json(cfg.output_dir + "/metrics.json", metrics);
  return 0;
}

// ---------------------------------------------------------------------------
// compare

namespace {

// theta scatter from two posterior summaries; returns the mean standardized
// error of the point estimates.
double write_theta_scatter(const std::string& fit_dir, const std::string& mcmc_dir,
                           const std::string& out_path) {
  const auto est = read_csv(fit_dir + "/posterior_summary.csv");
  const auto ref = read_csv(mcmc_dir + "/posterior_summary.csv");
  if (est.rows.size() != ref.rows.size()) {
    throw std::invalid_argument("compare: summaries have different parameter counts");
  }
  std::vector<std::vector<std::string>> scatter;
  double std_err_acc = 0.0;
  for (size_t i = 0; i < est.rows.size(); ++i) {
    if (est.rows[i][0] != ref.rows[i][0]) {
      throw std::invalid_argument("compare: parameter order mismatch at " + est.rows[i][0]);
    }
    const double em = est.num(i, 1), es = est.num(i, 2);
    const double rm = ref.num(i, 1), rs = ref.num(i, 2);
    scatter.push_back({est.rows[i][0], format_double(em), format_double(es), format_double(rm),
                       format_double(rs)});
    std_err_acc += std::fabs(em - rm) / std::max(rs, 1e-8);
  }
  write_csv(out_path, {"param", "est_mean", "est_sd", "ref_mean", "ref_sd"}, scatter);
  return std_err_acc / est.rows.size();
}

}  // namespace

int cmd_compare(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const std::string fit_dir = cfg.section("compare").at("fit_dir");
  const std::string mcmc_dir = cfg.section("compare").at("mcmc_dir");
  json metrics;

  if (cfg.model == "tobit" || cfg.model == "toy") {
    metrics["theta_std_err_mean"] =
        write_theta_scatter(fit_dir, mcmc_dir, cfg.output_dir + "/theta_scatter.csv");
  }

  if (cfg.model == "tobit") {
    Rng rng(cfg.seed);
    TobitSetup setup = make_tobit_setup(cfg, rng);
    TobitModel model(setup.data, setup.k_alpha, setup.prior);

    const MatrixXd alpha_est = read_alpha_means(fit_dir);
    const MatrixXd alpha_ref = read_alpha_means(mcmc_dir);
    std::vector<std::vector<std::string>> rows;
    double acc = 0.0;
    for (int i = 0; i < alpha_est.rows(); ++i) {
      for (int j = 0; j < alpha_est.cols(); ++j) {
        rows.push_back({std::to_string(i), std::to_string(j), format_double(alpha_est(i, j)),
                        format_double(alpha_ref(i, j))});
        acc += (alpha_est(i, j) - alpha_ref(i, j)) * (alpha_est(i, j) - alpha_ref(i, j));
      }
    }
    write_csv(cfg.output_dir + "/alpha_scatter.csv", {"individual", "coef", "est", "ref"}, rows);
    metrics["alpha_rmse"] = std::sqrt(acc / alpha_est.size());

    const VectorXd theta_est = read_vector_csv(fit_dir + "/theta_point.csv");
    metrics["rmse"] = rmse_metric(setup.data, alpha_est, model.unpack(theta_est));

    // Heterogeneity table from both draw sets.
    const MatrixXd draws_est = read_matrix_csv(fit_dir + "/theta_draws.csv");
    const MatrixXd draws_ref = read_matrix_csv(mcmc_dir + "/theta_draws.csv");
    std::vector<std::vector<std::string>> het_rows;
    for (const auto& [label, draws] :
         {std::pair<std::string, const MatrixXd*>{"est", &draws_est},
          std::pair<std::string, const MatrixXd*>{"ref", &draws_ref}}) {
      const auto rep = heterogeneity(
          setup.data, v_alpha_draws(*draws, setup.data.p, setup.data.r, setup.k_alpha),
          setup.focal, setup.cross);
      het_rows.push_back({label, "TH", format_double(rep.total.mean),
                          format_double(rep.total.lo), format_double(rep.total.hi)});
      het_rows.push_back({label, "FBH", format_double(rep.focal.mean),
                          format_double(rep.focal.lo), format_double(rep.focal.hi)});
      het_rows.push_back({label, "CBH", format_double(rep.cross.mean),
                          format_double(rep.cross.lo), format_double(rep.cross.hi)});
    }
    write_csv(cfg.output_dir + "/heterogeneity.csv", {"source", "measure", "mean", "lo", "hi"},
              het_rows);
  } else if (cfg.model == "tvpvar") {
    Rng rng(cfg.seed);
    TvpSimTruth truth;
    bool simulated = false;
    const auto data = make_tvpvar_data(cfg, rng, &truth, &simulated);
    std::vector<int> equations;
    if (cfg.has("tvpvar") && cfg.section("tvpvar").contains("equations")) {
      for (const auto& e : cfg.section("tvpvar")["equations"]) equations.push_back(e.get<int>());
    } else {
      equations.push_back(0);
    }
    for (int eq : equations) {
      const std::string sub = "/eq" + std::to_string(eq);
      const auto design = build_design(data, eq);
      metrics["theta_std_err_mean_eq" + std::to_string(eq)] = write_theta_scatter(
          fit_dir + sub, mcmc_dir + sub,
          cfg.output_dir + "/theta_scatter_eq" + std::to_string(eq) + ".csv");
      const VectorXd vol_est = read_csv(fit_dir + sub + "/vol_path.csv").numeric_column("value");
      const VectorXd vol_ref = read_csv(mcmc_dir + sub + "/vol_path.csv").numeric_column("value");
      std::vector<std::vector<std::string>> rows;
      for (int t = 0; t < vol_est.size(); ++t) {
        rows.push_back({std::to_string(t), format_double(vol_est[t]),
                        format_double(vol_ref[t])});
      }
      write_csv(cfg.output_dir + "/vol_overlay_eq" + std::to_string(eq) + ".csv",
                {"t", "est", "ref"}, rows);
      const double corr =
          ((vol_est.array() - vol_est.mean()) * (vol_ref.array() - vol_ref.mean())).sum() /
          (std::sqrt((vol_est.array() - vol_est.mean()).square().sum()) *
           std::sqrt((vol_ref.array() - vol_ref.mean()).square().sum()));
      metrics["vol_corr_eq" + std::to_string(eq)] = corr;

      const int J = 2 * design.q;
      const auto params_est =
          TvpParams::unpack(read_vector_csv(fit_dir + sub + "/theta_point.csv"), J);
      const auto params_ref =
          TvpParams::unpack(read_vector_csv(mcmc_dir + sub + "/theta_point.csv"), J);
      TvpLatent lat_est, lat_ref;
      lat_est.h = read_vector_csv(fit_dir + sub + "/h_point.csv");
      lat_est.eta_tilde = read_matrix_csv(fit_dir + sub + "/eta_point.csv");
      lat_ref.h = read_vector_csv(mcmc_dir + sub + "/h_point.csv");
      lat_ref.eta_tilde = read_matrix_csv(mcmc_dir + sub + "/eta_point.csv");
      metrics["predictive_kl_eq" + std::to_string(eq)] =
          predictive_kl(design, params_est, lat_est, params_ref, lat_ref);
    }
  }
  write_json(cfg.output_dir + "/metrics.json", metrics);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  Rng rng(cfg.seed);
  const int n_points = cfg.get_int_or("gradcheck", "n_points", 10);
  const double tol = cfg.get_or("gradcheck", "tolerance", 1e-4);
  bool ok = true;
  json metrics;

  auto run_model_check = [&](const std::string& name, const LatentModel& model, VectorXd z,
                             Rng& point_rng) {
    std::vector<std::vector<std::string>> rows;
    double worst = 0.0;
    for (int pt = 0; pt < n_points; ++pt) {
      VectorXd theta(model.dim_theta());
      for (int i = 0; i < theta.size(); ++i) theta[i] = 0.4 * point_rng.normal();
      model.sample_latent(theta, z, 2, point_rng);
      const auto rep = grad_check(
          [&](const VectorXd& t) { return model.log_g(t, z); },
          [&](const VectorXd& t) { return model.grad_log_g(t, z); }, theta, tol);
      for (int i = 0; i < rep.analytic.size(); ++i) {
        rows.push_back({std::to_string(pt), std::to_string(i), format_double(rep.analytic[i]),
                        format_double(rep.numeric[i]), format_double(rep.rel_error[i]),
                        format_double(rep.step_used[i])});
      }
      worst = std::max(worst, rep.max_rel_error);
      if (!rep.ok()) ok = false;
    }
    write_csv(cfg.output_dir + "/gradcheck_" + name + ".csv",
              {"point", "coord", "analytic", "numeric", "rel_error", "step"}, rows);
    metrics[name + "_max_rel_error"] = worst;
  };

  {
    TobitParams truth = tobit_params_from_json(json::object(), 3, 2, 1);
    Rng sim_rng = rng.substream(1);
    const auto data = simulate_tobit(5, 4, 3, 2, truth, {0, 1}, sim_rng);
    TobitModel model(data, 1);
    Rng point_rng = rng.substream(2);
    run_model_check("tobit", model, model.init_latent(point_rng), point_rng);
  }
  {
    TvpSimHyper hyper;
    hyper.hbar = VectorXd::Constant(2, -1.0);
    hyper.rho = VectorXd::Constant(2, 0.95);
    hyper.sigma_e = VectorXd::Constant(2, 0.3);
    Rng sim_rng = rng.substream(3);
    const auto data = simulate_tvpvar(2, 12, 1, hyper, sim_rng);
    for (int eq = 0; eq < 2; ++eq) {
      TvpVarEquationModel model(build_design(data, eq));
      Rng point_rng = rng.substream(4 + eq);
      run_model_check("tvpvar_eq" + std::to_string(eq), model,
                      model.init_latent(point_rng), point_rng);
    }
  }
  metrics["pass"] = ok;
  write_json(cfg.output_dir + "/metrics.json", metrics);
  std::printf("gradcheck %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace hybridvi
