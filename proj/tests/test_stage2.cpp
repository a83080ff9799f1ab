#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tsln/rng.hpp"
#include "tsln/stage2.hpp"
#include "tsln/util.hpp"

using namespace tsln;

namespace {

Stage1AreaSummary synth_area(int area, double theta_mean, double sd, int T,
                             std::uint64_t seed, double n_i = 20.0) {
  Stage1AreaSummary s;
  s.area = area;
  Rng rng(Rng::stream(seed, "synth", area));
  for (int t = 0; t < T; ++t) s.theta_s1.push_back(theta_mean + sd * rng.normal());
  s.tau_bar = sd * sd;
  s.var_theta = variance(s.theta_s1);
  double mu = inv_logit(theta_mean);
  s.mu_d = mu;
  s.mu_s1_median = mu;
  s.psi_d = s.tau_bar * mu * mu * (1.0 - mu) * (1.0 - mu);
  s.psi_b_mean = 0.0;
  s.n_i = n_i;
  s.stable = true;
  return s;
}

AreaFrame flat_frame(int M, double pop = 1000.0) {
  AreaFrame f;
  for (int i = 0; i < M; ++i) {
    AreaRow r;
    r.id = "A" + std::to_string(i);
    r.population = pop;
    r.g = {0.0};
    f.rows.push_back(r);
  }
  return f;
}

AreaGraph path_graph(int M) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < M; ++i) e.push_back({i, i + 1});
  return build_graph_indexed(M, e);
}

Stage2Spec bare_spec(bool spatial) {
  Stage2Spec s;
  s.use_ses = false;
  s.use_remote = false;
  s.use_g = false;
  s.varying_g = false;
  s.use_external = false;
  s.use_nesting = false;
  s.spatial = spatial;
  return s;
}

SampleConfig quick_cfg(std::uint64_t seed) {
  SampleConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 400;
  cfg.draws = 400;
  cfg.seed = seed;
  return cfg;
}

// variance-function and benchmark posteriors are stiffer; give adaptation
// more room
SampleConfig long_cfg(std::uint64_t seed) {
  SampleConfig cfg = quick_cfg(seed);
  cfg.warmup = 1200;
  cfg.draws = 600;
  cfg.target_accept = 0.9;
  return cfg;
}

}  // namespace

TEST_CASE("precise area signals pass through the smoother") {
  int M = 6;
  std::vector<double> mu_true = {0.12, 0.18, 0.22, 0.28, 0.33, 0.4};
  std::vector<Stage1AreaSummary> s1;
  for (int i = 0; i < M; ++i)
    s1.push_back(synth_area(i, logit(mu_true[i]), 0.05, 200, 9));
  auto frame = flat_frame(M);
  auto fit = fit_stage2(s1, frame, path_graph(M), bare_spec(false), quick_cfg(13));
  CHECK(fit.theta.cols() == M);
  CHECK(fit.divergences <= fit.chains * fit.draws / 100);
  Eigen::MatrixXd mu = fit.mu();
  for (int i = 0; i < M; ++i) {
    std::vector<double> col(mu.col(i).data(), mu.col(i).data() + mu.rows());
    CHECK(std::abs(median(col) - mu_true[i]) < 0.03);
  }
  CHECK(fit.max_mu_rhat < 1.05);
}

TEST_CASE("convolution effect reproduces its closed form") {
  int M = 4;
  Model m;
  int pred = m.add_predictor(M);
  auto s = m.add_params("s", M);
  auto v = m.add_params("v", M);
  int lr = m.add_param("lr");
  int lsg = m.add_param("lsg");
  Bym2Effect by;
  by.s_idx = s;
  by.v_idx = v;
  by.logit_rho = lr;
  by.log_sigma = lsg;
  by.kappa = 0.37;
  m.predictors[pred].effects.push_back(by);

  Vec x(m.dim);
  Rng rng(55);
  for (int k = 0; k < m.dim; ++k) x[k] = rng.normal();
  Vec eta;
  m.eval_predictor(pred, x, eta);
  double rho = inv_logit(x[lr]);
  double sg = std::exp(x[lsg]);
  for (int i = 0; i < M; ++i) {
    double want = sg * (x[s[i]] * std::sqrt(rho / 0.37) +
                        x[v[i]] * std::sqrt(1.0 - rho));
    CHECK(eta[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("unsampled areas borrow from their neighbors") {
  // path 0-1-2-3-4-5-6-7; high cluster on the left, low on the right,
  // areas 3 and 4 unsampled
  int M = 8;
  std::vector<Stage1AreaSummary> s1;
  for (int i : {0, 1, 2}) s1.push_back(synth_area(i, 1.5, 0.15, 200, 21));
  for (int i : {5, 6, 7}) s1.push_back(synth_area(i, -1.5, 0.15, 200, 21));
  auto frame = flat_frame(M);
  auto fit = fit_stage2(s1, frame, path_graph(M), bare_spec(true), quick_cfg(29));
  Eigen::MatrixXd mu = fit.mu();
  std::vector<double> med(M);
  for (int i = 0; i < M; ++i) {
    std::vector<double> col(mu.col(i).data(), mu.col(i).data() + mu.rows());
    med[i] = median(col);
  }
  CHECK(med[2] > med[5]);
  // the gap neighbors lean toward their own cluster
  CHECK(med[3] > med[4]);
  CHECK(med[3] < med[2]);
  CHECK(med[4] > med[7]);
}

TEST_CASE("variance-function regression imputes unstable areas") {
  std::vector<Stage1AreaSummary> s1;
  Rng rng(61);
  int M = 15;
  double psi = 0.04;
  for (int i = 0; i < 12; ++i) {
    auto s = synth_area(i, logit(0.3), 0.2, 150, 31, 10.0 + i);
    // scatter around the common level; an exact fit would degenerate the
    // regression scale
    s.psi_d = psi * std::exp(0.3 * rng.normal());
    s.psi_b_mean = 0.0;
    s1.push_back(s);
  }
  for (int i = 12; i < M; ++i) {
    auto s = synth_area(i, logit(0.3), 0.2, 150, 31, 3.0);
    s.psi_d = 0.0;  // degenerate design variance
    s.stable = false;
    s1.push_back(s);
  }
  auto frame = flat_frame(M);
  for (int i = 0; i < M; ++i) frame.rows[i].population = 800.0 + 40.0 * i;

  auto g = fit_gvf(s1, frame, long_cfg(17));
  REQUIRE(g.unstable_areas.size() == 3);
  double expect_tau = psi / std::pow(0.3 * 0.7, 2.0);
  for (double t : g.imputed_tau) {
    CHECK(t > 0.25 * expect_tau);
    CHECK(t < 4.0 * expect_tau);
  }

  // fewer than ten stable areas is refused
  std::vector<Stage1AreaSummary> few(s1.begin(), s1.begin() + 9);
  few.insert(few.end(), s1.begin() + 12, s1.end());
  CHECK_THROWS_AS(fit_gvf(few, frame, long_cfg(17)), Stage2Error);

  // joint fit runs with the same mix of areas
  auto fit = fit_stage2(s1, frame, path_graph(M), bare_spec(false), long_cfg(43));
  CHECK(fit.theta.cols() == M);
  CHECK(fit.max_mu_rhat < 1.05);

  // two-step mode gives a similar answer
  Stage2Spec two = bare_spec(false);
  two.joint_gvf = false;
  auto fit2 = fit_stage2(s1, frame, path_graph(M), two, long_cfg(47));
  Eigen::MatrixXd mua = fit.mu(), mub = fit2.mu();
  for (int i = 12; i < M; ++i)
    CHECK(std::abs(mua.col(i).mean() - mub.col(i).mean()) < 0.05);
}

TEST_CASE("aggregate pinning pulls group totals to the target") {
  int M = 6;
  std::vector<Stage1AreaSummary> s1;
  for (int i = 0; i < M; ++i)
    s1.push_back(synth_area(i, logit(0.25), 0.3, 200, 71));
  auto frame = flat_frame(M);
  auto graph = path_graph(M);

  BenchmarkGroup grp;
  for (int i = 0; i < M; ++i) grp.areas.push_back(i);
  grp.target = 0.4;
  grp.var = 0.0004;

  auto base = fit_stage2(s1, frame, graph, bare_spec(false), quick_cfg(81));

  Stage2Spec tight = bare_spec(false);
  tight.benchmark_p = 0.05;
  auto fitb = benchmark(s1, frame, graph, tight, long_cfg(83), {grp});
  Eigen::MatrixXd mu = fitb.mu();
  double agg = 0.0;
  for (int i = 0; i < M; ++i) agg += mu.col(i).mean() / M;
  CHECK(std::abs(agg - 0.4) < 0.02);

  // an extremely loose penalty changes essentially nothing
  Stage2Spec loose = bare_spec(false);
  loose.benchmark_p = 100.0;
  auto fitl = benchmark(s1, frame, graph, loose, quick_cfg(85), {grp});
  Eigen::MatrixXd mub = base.mu(), mul = fitl.mu();
  for (int i = 0; i < M; ++i)
    CHECK(std::abs(mub.col(i).mean() - mul.col(i).mean()) < 0.05);

  BenchmarkGroup bad = grp;
  bad.var = 0.0;
  CHECK_THROWS_AS(benchmark(s1, frame, graph, tight, quick_cfg(87), {bad}),
                  Stage2Error);
}
