#ifndef TSLN_DENSITY_HPP
#define TSLN_DENSITY_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tsln {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Shared linear predictors. A Predictor owns a list of additive effects over
// a common row index (observations or areas); terms reference predictors by
// id so gradients flow through one backward pass per predictor.
// ---------------------------------------------------------------------------

// X * params[coef]
struct LinearEffect {
  Eigen::MatrixXd X;
  std::vector<int> coef;
};

// const_scale * exp(params[log_scale]) * params[idx[row]]; idx -1 skips the
// row, log_scale -1 means unit scale. This is the non-centered random-effect
// building block.
struct IndexedEffect {
  std::vector<int> idx;
  int log_scale = -1;
  double const_scale = 1.0;
};

// params[coef] * params[idx[row]] (e.g. loading times latent field value)
struct ParamProductEffect {
  int coef = -1;
  std::vector<int> idx;
};

// exp(log_sigma) * (s*sqrt(rho/kappa) + v*sqrt(1-rho)), rho = invlogit(.)
struct Bym2Effect {
  std::vector<int> s_idx;
  std::vector<int> v_idx;
  int logit_rho = -1;
  int log_sigma = -1;
  double kappa = 1.0;
};

using Effect = std::variant<LinearEffect, IndexedEffect, ParamProductEffect, Bym2Effect>;

struct Predictor {
  int rows = 0;
  std::vector<Effect> effects;
};

// ---------------------------------------------------------------------------
// Density terms. The term library is closed; every term supplies an exact
// gradient. weight vectors are pseudo-likelihood powers, scale is a global
// likelihood power (e.g. 1/T_tilde).
// ---------------------------------------------------------------------------

// sum_j scale*w_j*(y_j*eta_j - log(1+exp(eta_j))), eta = predictor row j
struct BernoulliLogitTerm {
  int pred = -1;
  std::vector<double> y;
  std::vector<double> weight;
  double scale = 1.0;
};

// Gaussian observations with constant variance, in sufficient-statistic form:
// each entry stands for `weight` replicated draws with mean ybar and mean
// squared deviation msq around ybar. weight=1, msq=0 recovers a plain
// observation.
struct GaussianObsTerm {
  int pred = -1;
  std::vector<int> row;
  std::vector<double> ybar;
  std::vector<double> msq;
  std::vector<double> weight;
  std::vector<double> var;
};

// Same, but the variance is base + c*exp(2*L*omega + sigma^2): the
// variance-function branch for areas whose design variance needs imputation.
struct GvfGaussianObsTerm {
  int pred = -1;
  std::vector<int> row;
  std::vector<double> ybar;
  std::vector<double> msq;
  std::vector<double> weight;
  std::vector<double> base_var;
  std::vector<double> c;
  Eigen::MatrixXd L;
  std::vector<int> omega;
  int log_sigma = -1;
};

// y_j ~ N(L_j*omega, exp(2*log_sigma)) — the variance-function regression
struct GaussianRegressionTerm {
  std::vector<double> y;
  Eigen::MatrixXd L;
  std::vector<int> omega;
  int log_sigma = -1;
};

struct GaussianPriorTerm {
  std::vector<int> params;
  double mean = 0.0;
  double sd = 1.0;
};

// half-normal prior on sigma = exp(u), including the log-scale Jacobian
struct HalfNormalLogScaleTerm {
  std::vector<int> params;
  double sd = 1.0;
};

struct StudentTPriorTerm {
  std::vector<int> params;
  double mean = 0.0;
  double sd = 1.0;
  double df = 3.0;
};

// uniform(0,1) variable sampled on the logit scale (density = Jacobian only)
struct UniformLogitTerm {
  int param = -1;
};

// -(1/2) * sum over edges (p_a - p_b)^2
struct IcarPairwiseTerm {
  std::vector<std::pair<int, int>> edges;
};

// mean(params) ~ N(0, sd^2)
struct SoftSumToZeroTerm {
  std::vector<int> params;
  double sd = 1.0;
};

// population-weighted invlogit aggregate pinned to a target:
// sum_r wpop_r*invlogit(theta_r) ~ N(target, sd^2)
struct BenchmarkGroupData {
  std::vector<int> rows;
  std::vector<double> wpop;
  double target = 0.0;
  double sd = 1.0;
};
struct BenchmarkTerm {
  int pred = -1;
  std::vector<BenchmarkGroupData> groups;
};

using Term = std::variant<BernoulliLogitTerm, GaussianObsTerm, GvfGaussianObsTerm,
                          GaussianRegressionTerm, GaussianPriorTerm,
                          HalfNormalLogScaleTerm, StudentTPriorTerm,
                          UniformLogitTerm, IcarPairwiseTerm, SoftSumToZeroTerm,
                          BenchmarkTerm>;

// ---------------------------------------------------------------------------

struct Model {
  int dim = 0;
  std::vector<std::string> names;
  std::vector<Predictor> predictors;
  std::vector<Term> terms;

  int add_param(const std::string& name);
  std::vector<int> add_params(const std::string& prefix, int count);
  int add_predictor(int rows);

  // log density (up to a constant) and exact gradient; non-finite values are
  // returned as-is for the sampler to reject
  double log_density_grad(const Vec& params, Vec& grad) const;

  void eval_predictor(int pred, const Vec& params, Vec& out) const;
};

}  // namespace tsln

#endif
