#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tsln/density.hpp"
#include "tsln/rng.hpp"

using namespace tsln;

namespace {

// model with one predictor exercising every effect kind, plus every term
Model rich_model() {
  Model m;
  int pred = m.add_predictor(6);
  auto beta = m.add_params("beta", 2);
  Eigen::MatrixXd X(6, 2);
  X << 1, 0.3, 1, -0.2, 1, 1.1, 1, 0.0, 1, -0.7, 1, 0.4;
  m.predictors[pred].effects.push_back(LinearEffect{X, beta});

  int ls = m.add_param("ls");
  auto raw = m.add_params("raw", 3);
  IndexedEffect ie;
  ie.idx = {raw[0], raw[1], raw[2], raw[0], -1, raw[1]};
  ie.log_scale = ls;
  m.predictors[pred].effects.push_back(ie);

  int alpha = m.add_param("alpha");
  auto gam = m.add_params("gam", 2);
  ParamProductEffect pp;
  pp.coef = alpha;
  pp.idx = {gam[0], -1, gam[1], -1, gam[0], -1};
  m.predictors[pred].effects.push_back(pp);

  auto s = m.add_params("s", 6);
  auto v = m.add_params("v", 6);
  int lrho = m.add_param("lrho");
  int lsz = m.add_param("lsz");
  Bym2Effect by;
  by.s_idx = s;
  by.v_idx = v;
  by.logit_rho = lrho;
  by.log_sigma = lsz;
  by.kappa = 0.42;
  m.predictors[pred].effects.push_back(by);

  BernoulliLogitTerm bl;
  bl.pred = pred;
  bl.y = {1, 0, 1, 1, 0, 0};
  bl.weight = {1.0, 2.0, 0.5, 1.3, 0.8, 1.0};
  bl.scale = 0.9;
  m.terms.push_back(bl);

  GaussianObsTerm go;
  go.pred = pred;
  go.row = {0, 2, 4};
  go.ybar = {0.1, -0.4, 0.9};
  go.msq = {0.0, 0.2, 0.05};
  go.weight = {1.0, 0.7, 1.0};
  go.var = {0.5, 1.2, 0.8};
  m.terms.push_back(go);

  auto omega = m.add_params("omega", 2);
  int lgvf = m.add_param("lgvf");
  GvfGaussianObsTerm gg;
  gg.pred = pred;
  gg.row = {1, 3};
  gg.ybar = {0.2, -0.1};
  gg.msq = {0.1, 0.0};
  gg.weight = {1.0, 1.0};
  gg.base_var = {0.3, 0.2};
  gg.c = {4.0, 9.0};
  gg.L.resize(2, 2);
  gg.L << 1.0, -0.5, 1.0, 0.8;
  gg.omega = omega;
  gg.log_sigma = lgvf;
  m.terms.push_back(gg);

  GaussianRegressionTerm gr;
  gr.y = {-1.2, -0.9, -1.5};
  gr.L.resize(3, 2);
  gr.L << 1.0, 0.2, 1.0, -0.3, 1.0, 0.9;
  gr.omega = omega;
  gr.log_sigma = lgvf;
  m.terms.push_back(gr);

  m.terms.push_back(GaussianPriorTerm{{beta[0], beta[1]}, 0.0, 2.0});
  m.terms.push_back(HalfNormalLogScaleTerm{{ls, lsz, lgvf}, 1.5});
  m.terms.push_back(StudentTPriorTerm{{alpha}, 0.0, 2.0, 3.0});
  m.terms.push_back(UniformLogitTerm{lrho});
  m.terms.push_back(IcarPairwiseTerm{{{s[0], s[1]}, {s[1], s[2]}, {s[3], s[4]}}});
  m.terms.push_back(SoftSumToZeroTerm{s, 0.01});
  m.terms.push_back(GaussianPriorTerm{raw, 0.0, 1.0});
  m.terms.push_back(GaussianPriorTerm{v, 0.0, 1.0});
  m.terms.push_back(GaussianPriorTerm{gam, 0.0, 2.0});

  BenchmarkTerm bt;
  bt.pred = pred;
  BenchmarkGroupData g1;
  g1.rows = {0, 1, 2};
  g1.wpop = {0.5, 0.3, 0.2};
  g1.target = 0.4;
  g1.sd = 0.05;
  BenchmarkGroupData g2;
  g2.rows = {3, 4, 5};
  g2.wpop = {0.6, 0.2, 0.2};
  g2.target = 0.3;
  g2.sd = 0.1;
  bt.groups = {g1, g2};
  m.terms.push_back(bt);
  return m;
}

}  // namespace

TEST_CASE("analytic gradient matches finite differences") {
  Model m = rich_model();
  Rng rng(101);
  auto f = [&](const Eigen::VectorXd& x) {
    Vec g;
    return m.log_density_grad(x, g);
  };
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(m.dim);
    for (int k = 0; k < m.dim; ++k) x[k] = rng.normal() * 0.7;
    Vec g;
    double lp = m.log_density_grad(x, g);
    CHECK(std::isfinite(lp));
    Eigen::VectorXd fd = oracle::fd_gradient(f, x);
    for (int k = 0; k < m.dim; ++k) {
      double denom = std::max(1.0, std::abs(fd[k]));
      CHECK(std::abs(g[k] - fd[k]) / denom < 1e-5);
    }
  }
}

TEST_CASE("hand-worked term values") {
  // standard Gaussian at the mode
  {
    Model m;
    int p = m.add_param("x");
    m.terms.push_back(GaussianPriorTerm{{p}, 0.0, 1.0});
    Vec g;
    Vec x(1);
    x << 0.0;
    m.log_density_grad(x, g);
    CHECK(g[0] == doctest::Approx(0.0));
  }
  // weighted Bernoulli: y=1, eta=0, power 2
  {
    Model m;
    int pred = m.add_predictor(1);
    int p = m.add_param("eta");
    IndexedEffect e;
    e.idx = {p};
    m.predictors[pred].effects.push_back(e);
    BernoulliLogitTerm t;
    t.pred = pred;
    t.y = {1.0};
    t.weight = {2.0};
    m.terms.push_back(t);
    Vec g;
    Vec x(1);
    x << 0.0;
    double lp = m.log_density_grad(x, g);
    CHECK(lp == doctest::Approx(2.0 * std::log(0.5)));
    CHECK(g[0] == doctest::Approx(1.0));
  }
  // pairwise-difference field at s=(a,-a): value -0.5*(2a)^2, gradient
  // (-2a, 2a), confirmed against finite differences
  {
    Model m;
    auto s = m.add_params("s", 2);
    m.terms.push_back(IcarPairwiseTerm{{{s[0], s[1]}}});
    double a = 0.7;
    Vec x(2);
    x << a, -a;
    Vec g;
    double lp = m.log_density_grad(x, g);
    CHECK(lp == doctest::Approx(-0.5 * 4.0 * a * a));
    CHECK(g[0] == doctest::Approx(-2.0 * a));
    CHECK(g[1] == doctest::Approx(2.0 * a));
    auto f = [&](const Eigen::VectorXd& q) {
      Vec gg;
      return m.log_density_grad(q, gg);
    };
    Eigen::VectorXd fd = oracle::fd_gradient(f, x);
    CHECK(g[0] == doctest::Approx(fd[0]).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx(fd[1]).epsilon(1e-7));
  }
}

TEST_CASE("pseudo-likelihood power scales value and gradient exactly") {
  Model base;
  int pred = base.add_predictor(2);
  auto b = base.add_params("b", 1);
  Eigen::MatrixXd X(2, 1);
  X << 1.0, -1.0;
  base.predictors[pred].effects.push_back(LinearEffect{X, b});
  BernoulliLogitTerm t;
  t.pred = pred;
  t.y = {1.0, 0.0};
  t.weight = {1.0, 1.0};
  base.terms.push_back(t);

  Model scaled = base;
  std::get<BernoulliLogitTerm>(scaled.terms[0]).weight = {3.5, 3.5};

  Vec x(1);
  x << 0.4;
  Vec g1, g2;
  double l1 = base.log_density_grad(x, g1);
  double l2 = scaled.log_density_grad(x, g2);
  CHECK(l2 == doctest::Approx(3.5 * l1).epsilon(1e-12));
  CHECK(g2[0] == doctest::Approx(3.5 * g1[0]).epsilon(1e-12));
}

TEST_CASE("dimension mismatch rejected") {
  Model m;
  m.add_param("x");
  Vec g;
  Vec bad(2);
  bad << 0.0, 0.0;
  CHECK_THROWS_AS(m.log_density_grad(bad, g), ModelError);
}
