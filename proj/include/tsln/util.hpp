#ifndef TSLN_UTIL_HPP
#define TSLN_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace tsln {

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// clamp a proportion away from {0,1} before taking logits
inline double clamp_proportion(double p, double eps = 1e-6) {
  return std::min(1.0 - eps, std::max(eps, p));
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// sample variance (n-1 denominator)
inline double variance(const std::vector<double>& v) {
  double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// linear-interpolation quantile (type 7)
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty vector");
  std::sort(v.begin(), v.end());
  double h = q * (static_cast<double>(v.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Standard normal quantile, Acklam's rational approximation (~1e-9 accuracy).
inline double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile arg outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Narrowest interval containing ceil(mass*n) sorted samples (capped at n-1
// gaps); ties broken toward the lower endpoint.
inline std::pair<double, double> hpdi(std::vector<double> v, double mass = 0.95) {
  if (v.empty()) throw std::invalid_argument("hpdi of empty vector");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  std::size_t gap = static_cast<std::size_t>(
      std::ceil(mass * static_cast<double>(n)));
  gap = std::min(gap, n - 1);
  std::size_t best = 0;
  double best_w = v[gap] - v[0];
  for (std::size_t i = 1; i + gap < n; ++i) {
    double w = v[i + gap] - v[i];
    if (w < best_w) {
      best_w = w;
      best = i;
    }
  }
  return {v[best], v[best + gap]};
}

}  // namespace tsln

#endif
