#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tsln/rng.hpp"
#include "tsln/stage1.hpp"
#include "tsln/util.hpp"

using namespace tsln;

namespace {

SurveyDataset bernoulli_data(int n, int ones, int M = 1) {
  SurveyDataset d;
  d.M = M;
  for (int j = 0; j < n; ++j) {
    SurveyRecord r;
    r.area = j % M;
    r.y = j < ones ? 1 : 0;
    r.w_raw = 1.0;
    d.records.push_back(r);
  }
  return d;
}

}  // namespace

TEST_CASE("intercept-only model recovers the sample proportion") {
  auto d = bernoulli_data(200, 60);
  auto ws = rescale_weights(d);
  Stage1Spec spec;
  spec.include_area_effect = false;
  spec.residual_sd = 0.1;  // nearly pure logistic regression
  SampleConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 400;
  cfg.draws = 400;
  cfg.seed = 41;
  auto fit = fit_stage1(d, ws, spec, cfg);
  Eigen::MatrixXd pi = pi_draws(fit);
  CHECK(pi.rows() == 2 * 400);
  CHECK(pi.cols() == 200);
  CHECK(std::abs(pi.mean() - 0.3) < 0.05);
  // individual-level residual diagnostics are not part of the report
  for (const auto& [name, r] : fit.rhat) {
    CHECK(name.find("eps") == std::string::npos);
    CHECK(r < 1.05);
  }
}

TEST_CASE("area aggregation matches the brute-force reference") {
  // two areas, hand-built draw matrix
  SurveyDataset d;
  d.M = 2;
  std::vector<int> areas = {0, 0, 0, 1, 1};
  std::vector<int> ys = {1, 0, 1, 0, 1};
  std::vector<double> wr = {1.0, 2.0, 0.5, 1.0, 3.0};
  for (int j = 0; j < 5; ++j) {
    SurveyRecord r;
    r.area = areas[j];
    r.y = ys[j];
    r.w_raw = wr[j];
    d.records.push_back(r);
  }
  auto ws = rescale_weights(d);

  int T = 40;
  Rng rng(77);
  Eigen::MatrixXd pi(T, 5);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < 5; ++j) pi(t, j) = 0.05 + 0.9 * rng.uniform();

  std::vector<double> pops = {400.0, 900.0};
  auto agg = aggregate_stage1(pi, d, ws, pops, T, 5);
  REQUIRE(agg.size() == 2);

  for (int a = 0; a < 2; ++a) {
    std::vector<double> w, y;
    std::vector<int> cols;
    for (int j = 0; j < 5; ++j)
      if (areas[j] == a) {
        w.push_back(ws.w[j]);
        y.push_back(ys[j]);
        cols.push_back(j);
      }
    std::vector<std::vector<double>> pdraws;
    for (int t = 0; t < T; ++t) {
      std::vector<double> row;
      for (int c : cols) row.push_back(pi(t, c));
      pdraws.push_back(row);
    }
    auto ref = oracle::stage1_aggregate(pdraws, w, y, pops[a]);
    CHECK(agg[a].area == a);
    CHECK(agg[a].tau_bar == doctest::Approx(ref.tau_bar).epsilon(1e-10));
    CHECK(agg[a].var_theta == doctest::Approx(ref.var_theta).epsilon(1e-10));
    REQUIRE(agg[a].theta_s1.size() == static_cast<std::size_t>(T));
    // t_tilde = T keeps every draw in original order
    for (int t = 0; t < T; ++t)
      CHECK(agg[a].theta_s1[t] == doctest::Approx(ref.theta[t]).epsilon(1e-10));
  }

  // subsample is a strict subset, deterministic in the seed
  auto sub1 = aggregate_stage1(pi, d, ws, pops, 15, 5);
  auto sub2 = aggregate_stage1(pi, d, ws, pops, 15, 5);
  auto sub3 = aggregate_stage1(pi, d, ws, pops, 15, 6);
  CHECK(sub1[0].theta_s1.size() == 15);
  CHECK(sub1[0].theta_s1 == sub2[0].theta_s1);
  CHECK(sub1[0].theta_s1 != sub3[0].theta_s1);
  // the same subsampled draw indices are used in every area
  auto full = aggregate_stage1(pi, d, ws, pops, T, 5);
  for (double v : sub1[1].theta_s1)
    CHECK(std::find_if(full[1].theta_s1.begin(), full[1].theta_s1.end(),
                       [&](double u) { return std::abs(u - v) < 1e-14; }) !=
          full[1].theta_s1.end());
  // shared summaries use all draws, not the subsample
  CHECK(sub1[0].tau_bar == doctest::Approx(full[0].tau_bar));
  CHECK(sub1[0].var_theta == doctest::Approx(full[0].var_theta));
}

TEST_CASE("perfect fit collapses the bias correction") {
  // pi identical to y in every draw: psi reduces to the design variance and
  // the smoothed estimate equals the direct one
  auto d = bernoulli_data(4, 2);
  auto ws = rescale_weights(d);
  Eigen::MatrixXd pi(6, 4);
  for (int t = 0; t < 6; ++t)
    for (int j = 0; j < 4; ++j) pi(t, j) = d.records[j].y;
  auto agg = aggregate_stage1(pi, d, ws, {800.0}, 6, 1);
  auto direct = hajek(d, ws, 0, 800.0);
  CHECK(agg[0].psi_b_mean == doctest::Approx(0.0));
  CHECK(agg[0].mu_s1_median == doctest::Approx(direct.mu_d));
  CHECK(agg[0].mu_d == doctest::Approx(direct.mu_d));
  CHECK(agg[0].stable == direct.stable);

  // at mu = 0.5 the logit-scale variance is 16 psi
  CHECK(agg[0].tau_bar ==
        doctest::Approx(16.0 * direct.psi_d).epsilon(1e-10));
}

TEST_CASE("degenerate areas are flagged") {
  auto d = bernoulli_data(3, 3);  // all ones
  auto ws = rescale_weights(d);
  Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(10, 3, 1.0);
  auto agg = aggregate_stage1(pi, d, ws, {500.0}, 10, 1);
  CHECK(agg[0].clamp_rate == doctest::Approx(1.0));
  CHECK(agg[0].degenerate);
}

TEST_CASE("smoothing ratio endpoints and calibration slope") {
  SurveyDataset d;
  d.M = 3;
  Rng rng(19);
  for (int a = 0; a < 3; ++a)
    for (int j = 0; j < 6; ++j) {
      SurveyRecord r;
      r.area = a;
      r.y = (a + j) % 2;
      r.w_raw = 0.5 + rng.uniform();
      d.records.push_back(r);
    }
  auto ws = rescale_weights(d);
  std::vector<DirectEstimate> direct;
  std::vector<int> direct_area;
  for (int a = 0; a < 3; ++a) {
    direct.push_back(hajek(d, ws, a, 1000.0));
    direct_area.push_back(a);
  }
  double overall = 0.0;
  {
    double sw = 0.0;
    for (std::size_t j = 0; j < d.records.size(); ++j) {
      overall += ws.w_tilde[j] * d.records[j].y;
      sw += ws.w_tilde[j];
    }
    overall /= sw;
  }

  int n = d.n();
  Eigen::MatrixXd pi_y(8, n), pi_flat(8, n);
  for (int t = 0; t < 8; ++t)
    for (int j = 0; j < n; ++j) {
      pi_y(t, j) = d.records[j].y;
      pi_flat(t, j) = overall;
    }

  auto perfect = smoothing_metrics(pi_y, d, ws, direct, direct_area, overall);
  CHECK(perfect.sr_median == doctest::Approx(1.0));
  // per-area medians equal the direct estimates, so the weighted least
  // squares calibration line has unit slope
  CHECK(perfect.alc == doctest::Approx(1.0).epsilon(1e-8));

  auto flat = smoothing_metrics(pi_flat, d, ws, direct, direct_area, overall);
  CHECK(flat.sr_median == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("rank-deficient designs are rejected") {
  SurveyDataset d;
  d.M = 1;
  for (int j = 0; j < 20; ++j) {
    SurveyRecord r;
    r.area = 0;
    r.y = j % 2;
    r.w_raw = 1.0;
    double v = 0.1 * j;
    r.x = {v, 2.0 * v};  // collinear pair
    d.records.push_back(r);
  }
  auto ws = rescale_weights(d);
  Stage1Spec spec;
  spec.continuous = {0, 1};
  spec.include_area_effect = false;
  SampleConfig cfg;
  cfg.chains = 1;
  cfg.warmup = 10;
  cfg.draws = 10;
  CHECK_THROWS_AS(fit_stage1(d, ws, spec, cfg), Stage1Error);
}
