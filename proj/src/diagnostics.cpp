#include "tsln/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tsln/util.hpp"

namespace tsln {

namespace {

// average-rank normal scores over the pooled sample
std::vector<std::vector<double>> rank_normalize(
    const std::vector<std::vector<double>>& seqs) {
  std::size_t total = 0;
  for (const auto& s : seqs) total += s.size();
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(total);
  std::size_t off = 0;
  for (const auto& s : seqs) {
    for (double v : s) pooled.emplace_back(v, off++);
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pooled[a].first < pooled[b].first;
  });
  std::vector<double> rank(total);
  std::size_t i = 0;
  while (i < total) {
    std::size_t j = i;
    while (j < total && pooled[order[j]].first == pooled[order[i]].first) ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j - 1)) + 1.0;
    for (std::size_t k = i; k < j; ++k) rank[pooled[order[k]].second] = avg;
    i = j;
  }
  std::vector<std::vector<double>> out(seqs.size());
  std::size_t p = 0;
  double S = static_cast<double>(total);
  for (std::size_t c = 0; c < seqs.size(); ++c) {
    out[c].resize(seqs[c].size());
    for (std::size_t k = 0; k < seqs[c].size(); ++k)
      out[c][k] = std_normal_quantile((rank[p++] - 0.375) / (S + 0.25));
  }
  return out;
}

// biased autocovariance (denominator n)
std::vector<double> autocov(const std::vector<double>& x) {
  std::size_t n = x.size();
  double m = mean(x);
  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - m) * (x[i + t] - m);
    out[t] = s / static_cast<double>(n);
  }
  return out;
}

}  // namespace

static RhatEss rhat_ess_impl(const std::vector<std::vector<double>>& chains,
                             bool with_ess) {
  if (chains.size() < 2) throw std::invalid_argument("need >= 2 chains");
  std::size_t len = chains[0].size();
  for (const auto& c : chains)
    if (c.size() != len) throw std::invalid_argument("unequal chain lengths");
  if (len < 4) throw std::invalid_argument("TooFewDraws");

  // split each chain in half
  std::size_t half = len / 2;
  std::vector<std::vector<double>> seqs;
  for (const auto& c : chains) {
    seqs.emplace_back(c.begin(), c.begin() + half);
    seqs.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }

  // constant chains: R-hat undefined
  bool any_var = false;
  for (const auto& s : seqs)
    if (variance(s) > 0.0) any_var = true;
  if (!any_var)
    return {std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN()};

  auto z = rank_normalize(seqs);
  std::size_t m = z.size();
  double n = static_cast<double>(half);

  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean(z[c]);
    vars[c] = variance(z[c]);
  }
  double W = mean(vars);
  double B = n * variance(means);
  double var_plus = (n - 1.0) / n * W + B / n;
  double rhat = std::sqrt(var_plus / W);
  if (!with_ess) return {rhat, std::numeric_limits<double>::quiet_NaN()};

  // bulk ESS via Geyer initial monotone sequence on combined autocorrelations
  std::vector<std::vector<double>> acov(m);
  for (std::size_t c = 0; c < m; ++c) acov[c] = autocov(z[c]);
  std::size_t max_t = half;
  std::vector<double> rho(max_t, 0.0);
  for (std::size_t t = 0; t < max_t; ++t) {
    double mean_acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) mean_acov += acov[c][t];
    mean_acov /= static_cast<double>(m);
    // within-chain acov uses n/(n-1) correction to align with W
    rho[t] = 1.0 - (W - n / (n - 1.0) * mean_acov) / var_plus;
  }
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < max_t; t += 2) {
    double pair = rho[t] + rho[t + 1];
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m) * n + 10.0));
  double ess = static_cast<double>(m) * n / tau;
  ess = std::min(ess, static_cast<double>(m) * n * std::log10(static_cast<double>(m) * n));
  return {rhat, ess};
}

RhatEss rhat_ess(const std::vector<std::vector<double>>& chains) {
  return rhat_ess_impl(chains, true);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  return rhat_ess_impl(chains, false).rhat;
}

}  // namespace tsln
