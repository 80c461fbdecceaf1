#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hybridvi/commands.hpp"
#include "hybridvi/config.hpp"
#include "hybridvi/diagnostics.hpp"
#include "hybridvi/engine.hpp"
#include "hybridvi/linalg.hpp"
#include "hybridvi/stats.hpp"
#include "hybridvi/tobit.hpp"
#include "hybridvi/toy.hpp"
#include "hybridvi/tvpvar.hpp"
#include "hybridvi/va.hpp"
#include "hybridvi/yeo_johnson.hpp"

namespace py = pybind11;
using namespace hybridvi;

namespace {

int run_command(const std::string& command, const std::string& config_json) {
  const auto cfg = RunConfig::from_json(nlohmann::json::parse(config_json));
  if (command == "simulate") return cmd_simulate(cfg);
  if (command == "fit") return cmd_fit(cfg);
  if (command == "mcmc") return cmd_mcmc(cfg);
  if (command == "compare") return cmd_compare(cfg);
  if (command == "gradcheck") return cmd_gradcheck(cfg);
  throw std::invalid_argument("unknown command " + command);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Variational inference with exact latent conditionals: core operations";

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>())
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal)
      .def("gamma", &Rng::gamma)
      .def("beta", &Rng::beta);

  py::class_<FactorCovariance>(m, "FactorCovariance")
      .def(py::init<MatrixXd, VectorXd>(), py::arg("B"), py::arg("d"))
      .def_readonly("m", &FactorCovariance::m)
      .def_readonly("k", &FactorCovariance::k)
      .def_readonly("B", &FactorCovariance::B)
      .def_readonly("d", &FactorCovariance::d)
      .def("dense", &FactorCovariance::dense);

  m.def("woodbury_solve",
        py::overload_cast<const FactorCovariance&, const VectorXd&>(&woodbury_solve));
  m.def("woodbury_logdet", &woodbury_logdet);
  m.def("sample_lowrank_normal", &sample_lowrank_normal);

  m.def("yeo_johnson", &yeo_johnson);
  m.def("yeo_johnson_inv", &yeo_johnson_inv);
  m.def("yj_dtheta", &yj_dtheta);
  m.def("yj_dgamma", &yj_dgamma);

  m.def("ndtri", &ndtri);
  m.def("norm_cdf", &norm_cdf);
  m.def("norm_logcdf", &norm_logcdf);
  m.def("trunc_normal_below", &trunc_normal_below);
  m.def("censored_normal_mean", &censored_normal_mean);

  py::class_<ReparamDraw>(m, "ReparamDraw")
      .def_readonly("theta", &ReparamDraw::theta)
      .def_readonly("vartheta", &ReparamDraw::vartheta)
      .def_readonly("zeta1", &ReparamDraw::zeta1)
      .def_readonly("zeta2", &ReparamDraw::zeta2);

  py::class_<VaFamily>(m, "VaFamily")
      .def("dim_theta", &VaFamily::dim_theta)
      .def("step_dim", &VaFamily::step_dim)
      .def("pack", &VaFamily::pack)
      .def("log_density", &VaFamily::log_density)
      .def("score_theta", &VaFamily::score_theta)
      .def("sample_reparam",
           [](const VaFamily& va, Rng& rng) { return va.sample_reparam(rng); })
      .def("sample_reparam_at",
           [](const VaFamily& va, const VectorXd& z1, const VectorXd& z2) {
             return va.sample_reparam(z1, z2);
           })
      .def("jacobian_action", &VaFamily::jacobian_action);

  py::class_<GaussianFactorVA, VaFamily>(m, "GaussianFactorVA")
      .def(py::init<VectorXd, FactorCovariance>())
      .def_static("initial", &GaussianFactorVA::initial, py::arg("m"), py::arg("k"),
                  py::arg("d0") = 0.01)
      .def_static("unpack", &GaussianFactorVA::unpack)
      .def_property_readonly("mu", &GaussianFactorVA::mu);

  py::class_<GaussianCopulaVA, VaFamily>(m, "GaussianCopulaVA")
      .def(py::init<VectorXd, FactorCovariance, VectorXd>())
      .def_static("initial", &GaussianCopulaVA::initial, py::arg("m"), py::arg("k"),
                  py::arg("d0") = 0.01)
      .def_static("unpack", &GaussianCopulaVA::unpack)
      .def_property_readonly("mu", &GaussianCopulaVA::mu)
      .def_property_readonly("gamma", &GaussianCopulaVA::gamma);

  py::class_<AdadeltaState>(m, "AdadeltaState")
      .def(py::init<int, double, double>(), py::arg("dim"), py::arg("rho") = 0.95,
           py::arg("eps") = 1e-6)
      .def("step", &AdadeltaState::step);

  m.def("effective_sample_size", [](const std::vector<double>& chain) {
    bool degenerate = false;
    const double ess = effective_sample_size(chain, &degenerate);
    return py::make_tuple(ess, degenerate);
  });
  m.def("kl_1d", &kl_1d);
  m.def("sample_subset", &sample_subset);

  // Whole-run entry point mirroring the CLI: command + config JSON string.
  m.def("run_command", &run_command, py::arg("command"), py::arg("config_json"));

  // Small helpers used by the smoke tests.
  m.def("toy_fit_error", [](std::uint64_t seed, int n_steps) {
    Rng rng(seed);
    VectorXd mu0 = VectorXd::Zero(2);
    MatrixXd sigma0 = MatrixXd::Identity(2, 2);
    sigma0(0, 1) = sigma0(1, 0) = 0.4;
    const auto toy = ConjugateToyModel::simulate(mu0, sigma0, 0.8, 0.6, 10, rng);
    FitConfig cfg;
    cfg.n_steps = n_steps;
    cfg.seed = seed;
    const auto res = run_sga(toy, GaussianFactorVA::initial(2, 0, 0.05), cfg);
    const auto* va = dynamic_cast<const GaussianFactorVA*>(res.va_tail_avg.get());
    return (va->mu() - toy.posterior_mean()).norm();
  });
}
