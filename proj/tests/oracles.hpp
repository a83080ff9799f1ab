#ifndef TSLN_TEST_ORACLES_HPP
#define TSLN_TEST_ORACLES_HPP

// Brute-force reference implementations, written directly from the defining
// formulas with no shared code paths with the library. Used to freeze
// expected values in the unit and acceptance suites.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double logit(double p) { return std::log(p) - std::log(1.0 - p); }
inline double invlogit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Hajek proportion: sum_j w_j y_j / n
inline double hajek_mu(const std::vector<double>& w,
                       const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * y[j];
  return s / static_cast<double>(w.size());
}

// sampling variance with finite-population correction
inline double hajek_psi(const std::vector<double>& w,
                        const std::vector<double>& y, double mu, double N) {
  double n = static_cast<double>(w.size());
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j)
    s += w[j] * w[j] * (y[j] - mu) * (y[j] - mu);
  return (1.0 / n) * (1.0 - n / N) * (1.0 / (n - 1.0)) * s;
}

struct Stage1Area {
  std::vector<double> theta;  // per draw
  std::vector<double> tau;    // per draw
  double tau_bar;
  double var_theta;
};

// stage-1 aggregation for one area from raw draws of pi
inline Stage1Area stage1_aggregate(const std::vector<std::vector<double>>& pi,
                                   const std::vector<double>& w,
                                   const std::vector<double>& y, double N,
                                   double clamp_eps = 1e-6) {
  double mu_d = hajek_mu(w, y);
  double psi_d = hajek_psi(w, y, mu_d, N);
  Stage1Area out;
  for (const auto& p : pi) {
    double mu = hajek_mu(w, p);
    std::vector<double> d(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) d[j] = p[j] - y[j];
    double b = hajek_mu(w, d);
    double vb = hajek_psi(w, d, b, N);
    double psi = psi_d + vb;
    double muc = std::min(1.0 - clamp_eps, std::max(clamp_eps, mu));
    out.theta.push_back(logit(muc));
    out.tau.push_back(psi / std::pow(muc * (1.0 - muc), 2.0));
  }
  double s = 0.0;
  for (double v : out.tau) s += v;
  out.tau_bar = s / out.tau.size();
  double m = 0.0;
  for (double v : out.theta) m += v;
  m /= out.theta.size();
  double q = 0.0;
  for (double v : out.theta) q += (v - m) * (v - m);
  out.var_theta = q / (out.theta.size() - 1.0);
  return out;
}

inline std::vector<double> odds_ratio(const std::vector<double>& mu,
                                      double national) {
  std::vector<double> out;
  for (double m : mu)
    out.push_back((m / (1.0 - m)) / (national / (1.0 - national)));
  return out;
}

inline double exceedance(const std::vector<double>& od) {
  double c = 0.0;
  for (double v : od)
    if (v > 1.0) c += 1.0;
  return c / od.size();
}

// four-rule evidence classifier from raw draws and a dense weight matrix
inline std::vector<std::string> lisa(const Eigen::MatrixXd& mu, double national,
                                     const Eigen::MatrixXd& Wstar) {
  int M = static_cast<int>(mu.cols());
  int T = static_cast<int>(mu.rows());
  std::vector<std::string> out(M);
  for (int i = 0; i < M; ++i) {
    double pz = 0.0, pl = 0.0;
    for (int t = 0; t < T; ++t) {
      double zi = mu(t, i) - national;
      double lag = 0.0;
      for (int j = 0; j < M; ++j) lag += Wstar(i, j) * (mu(t, j) - national);
      if (zi > 0.0) pz += 1.0;
      if (lag > 0.0) pl += 1.0;
    }
    pz /= T;
    pl /= T;
    if (pz > 0.8 && pl > 0.8)
      out[i] = "HC";
    else if (pz > 0.8 && pl <= 0.8)
      out[i] = "H";
    else if (pz < 0.2 && pl < 0.2)
      out[i] = "LC";
    else if (pz < 0.2 && pl >= 0.2)
      out[i] = "L";
    else
      out[i] = "N";
  }
  return out;
}

inline double arb(const std::vector<double>& draws, double truth) {
  double s = 0.0;
  for (double v : draws) s += v - truth;
  return std::abs(s / draws.size()) / truth;
}

inline double rrmse(const std::vector<double>& draws, double truth) {
  double s = 0.0;
  for (double v : draws) s += (v - truth) * (v - truth);
  return std::sqrt(s / draws.size()) / truth;
}

// narrowest window over sorted samples
inline std::pair<double, double> hpdi(std::vector<double> v, double mass) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  std::size_t gap = std::min<std::size_t>(
      n - 1, static_cast<std::size_t>(std::ceil(mass * n)));
  std::size_t best = 0;
  for (std::size_t i = 1; i + gap < n; ++i)
    if (v[i + gap] - v[i] < v[best + gap] - v[best]) best = i;
  return {v[best], v[best + gap]};
}

// ICAR scaling factor through an eigendecomposition pseudo-inverse
inline double kappa(const Eigen::MatrixXd& laplacian) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian);
  int M = static_cast<int>(laplacian.rows());
  Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(M, M);
  for (int k = 0; k < M; ++k) {
    double ev = es.eigenvalues()[k];
    if (ev > 1e-9)
      pinv += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose() / ev;
  }
  double ls = 0.0;
  for (int i = 0; i < M; ++i) ls += std::log(pinv(i, i));
  return std::exp(ls / M);
}

// central finite differences
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle

#endif
