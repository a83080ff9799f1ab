#ifndef TSLN_STAGE2_HPP
#define TSLN_STAGE2_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "tsln/graph.hpp"
#include "tsln/hmc.hpp"
#include "tsln/stage1.hpp"

namespace tsln {

struct Stage2Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AreaRow {
  std::string id;
  double population = 0.0;
  int remote_class = 0;
  int ses_decile = 0;
  int nest = 0;
  std::vector<double> g;        // continuous covariates
  double ext_est = std::nan("");  // external logit-scale estimate, optional
  double ext_se = std::nan("");
  std::vector<int> bench;       // group index per benchmark system, -1 none
};

struct AreaFrame {
  std::vector<AreaRow> rows;
  int n_remote = 1;
  int n_ses = 1;
  int n_nest = 1;
  std::vector<std::string> bench_names;
  std::vector<int> bench_group_counts;

  int M() const { return static_cast<int>(rows.size()); }
};

struct Stage2Spec {
  bool use_ses = true;
  bool use_remote = true;
  bool use_g = true;
  bool varying_g = true;        // G slopes per remoteness class
  bool use_external = true;
  bool spatial = true;          // BYM2; false gives an IID area effect
  bool use_nesting = true;
  bool joint_gvf = true;        // variance-function parameters in one posterior
  double benchmark_p = 0.5;
};

// benchmark target from group-level direct estimation
struct BenchmarkGroup {
  std::vector<int> areas;       // all member areas (sampled or not)
  double target = 0.0;          // group direct estimate
  double var = 0.0;             // its sampling variance
};

struct GvfFit {
  std::vector<double> omega_mean;
  double sigma_mean = 0.0;
  std::vector<int> unstable_areas;
  std::vector<double> imputed_tau;   // posterior-mean imputed tau per unstable area
  DrawMatrix dm;
  std::vector<int> omega_idx;
  int log_sigma_idx = -1;
};

// variance-function regression on stable areas, standalone (two-step mode)
GvfFit fit_gvf(const std::vector<Stage1AreaSummary>& s1, const AreaFrame& frame,
               const SampleConfig& cfg);

struct Stage2Fit {
  Model model;
  int theta_pred = -1;
  DrawMatrix dm;
  Eigen::MatrixXd theta;        // (chains*draws) x M
  int chains = 0;
  int draws = 0;
  std::map<std::string, double> rhat;
  std::map<std::string, double> ess;
  std::vector<double> mu_rhat;  // per area
  double max_mu_rhat = 0.0;
  int divergences = 0;

  Eigen::MatrixXd mu() const;   // inverse-logit of theta
};

Stage2Fit fit_stage2(const std::vector<Stage1AreaSummary>& s1,
                     const AreaFrame& frame, const AreaGraph& graph,
                     const Stage2Spec& spec, const SampleConfig& cfg,
                     const std::vector<BenchmarkGroup>& benchmarks = {});

// refit with the aggregate-pinning penalty added
Stage2Fit benchmark(const std::vector<Stage1AreaSummary>& s1,
                    const AreaFrame& frame, const AreaGraph& graph,
                    const Stage2Spec& spec, const SampleConfig& cfg,
                    const std::vector<BenchmarkGroup>& groups);

}  // namespace tsln

#endif
