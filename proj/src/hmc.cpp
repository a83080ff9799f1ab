#include "tsln/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "tsln/rng.hpp"

namespace tsln {

std::vector<double> DrawMatrix::pooled(int k) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(chains) * draws);
  for (int c = 0; c < chains; ++c)
    for (int d = 0; d < draws; ++d) out.push_back(at(c, d, k));
  return out;
}

std::vector<std::vector<double>> DrawMatrix::by_chain(int k) const {
  std::vector<std::vector<double>> out(chains);
  for (int c = 0; c < chains; ++c) {
    out[c].reserve(draws);
    for (int d = 0; d < draws; ++d) out[c].push_back(at(c, d, k));
  }
  return out;
}

int DrawMatrix::total_divergences() const {
  int s = 0;
  for (const auto& cd : chain_diag) s += cd.divergences;
  return s;
}

namespace {

struct DualAverage {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double count = 0.0;
  double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    count = 0.0;
  }
  void update(double accept, double target) {
    count += 1.0;
    double eta = 1.0 / (count + t0);
    h_bar = (1.0 - eta) * h_bar + eta * (target - accept);
    log_eps = mu - std::sqrt(count) / gamma * h_bar;
    double w = std::pow(count, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
  double eps() const { return std::exp(log_eps); }
  double eps_final() const { return std::exp(log_eps_bar); }
};

struct ChainResult {
  std::vector<double> draws;  // [d][k]
  ChainDiag diag;
};

class ChainRunner {
 public:
  ChainRunner(const Model& model, Vec q0, const SampleConfig& cfg,
              std::uint64_t stream_key)
      : model_(model), cfg_(cfg), rng_(stream_key), q_(std::move(q0)) {
    dim_ = model.dim;
    inv_metric_ = Vec::Ones(dim_);
    grad_.resize(dim_);
    lp_ = model_.log_density_grad(q_, grad_);
    if (!std::isfinite(lp_)) throw SamplerError("NonFiniteAtInit");
  }

  ChainResult run() {
    init_step_size();
    da_.restart(eps_);
    run_warmup();
    ChainResult out;
    out.diag.step_size = eps_;
    out.draws.reserve(static_cast<std::size_t>(n_keep()) * dim_);
    int kept = 0;
    for (int it = 0; kept < n_keep(); ++it) {
      bool div = transition(false);
      if (div) ++out.diag.divergences;
      if (it % cfg_.thin == 0) {
        for (int k = 0; k < dim_; ++k) out.draws.push_back(q_[k]);
        ++kept;
      }
    }
    return out;
  }

 private:
  int n_keep() const { return cfg_.draws; }

  void sample_momentum(Vec& p) {
    for (int k = 0; k < dim_; ++k)
      p[k] = rng_.normal() / std::sqrt(inv_metric_[k]);
  }

  double kinetic(const Vec& p) const {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) s += p[k] * p[k] * inv_metric_[k];
    return 0.5 * s;
  }

  // one leapfrog trajectory; returns (accept_prob, divergent)
  std::pair<double, bool> trajectory(int steps, Vec& q_prop, double& lp_prop,
                                     Vec& grad_prop) {
    Vec p(dim_);
    sample_momentum(p);
    double h0 = -lp_ + kinetic(p);
    Vec q = q_;
    Vec g = grad_;
    double lp = lp_;
    bool bad = false;
    for (int s = 0; s < steps; ++s) {
      p += 0.5 * eps_ * g;
      for (int k = 0; k < dim_; ++k) q[k] += eps_ * inv_metric_[k] * p[k];
      lp = model_.log_density_grad(q, g);
      if (!std::isfinite(lp)) {
        bad = true;
        break;
      }
      p += 0.5 * eps_ * g;
    }
    double h1 = bad ? std::numeric_limits<double>::infinity() : -lp + kinetic(p);
    double de = h1 - h0;
    bool divergent = !std::isfinite(de) || de > 1000.0;
    double accept = divergent ? 0.0 : std::min(1.0, std::exp(-de));
    if (!divergent && std::log(rng_.uniform()) < -de) {
      q_prop = std::move(q);
      lp_prop = lp;
      grad_prop = std::move(g);
      return {accept, false};
    }
    q_prop = q_;
    lp_prop = lp_;
    grad_prop = grad_;
    return {accept, divergent};
  }

  int leapfrog_count() {
    double jitter = rng_.uniform(0.8, 1.2);
    int L = static_cast<int>(std::lround(jitter * cfg_.traj_length / eps_));
    return std::clamp(L, 1, cfg_.max_leapfrog);
  }

  // returns divergent flag
  bool transition(bool adapting) {
    Vec q_prop;
    double lp_prop;
    Vec grad_prop;
    auto [accept, divergent] = trajectory(leapfrog_count(), q_prop, lp_prop, grad_prop);
    q_ = std::move(q_prop);
    lp_ = lp_prop;
    grad_ = std::move(grad_prop);
    if (adapting) {
      da_.update(accept, cfg_.target_accept);
      eps_ = da_.eps();
    }
    return divergent;
  }

  // crude bisection on the one-step acceptance probability
  void init_step_size() {
    eps_ = 0.1;
    for (int tries = 0; tries < 60; ++tries) {
      Vec p(dim_);
      sample_momentum(p);
      double h0 = -lp_ + kinetic(p);
      Vec q = q_;
      Vec g = grad_;
      p += 0.5 * eps_ * g;
      for (int k = 0; k < dim_; ++k) q[k] += eps_ * inv_metric_[k] * p[k];
      double lp = model_.log_density_grad(q, g);
      double h1 = std::isfinite(lp) ? -lp + kinetic(p) + 0.5 * eps_ * 0.0 : 1e300;
      if (std::isfinite(lp)) {
        p += 0.5 * eps_ * g;
        h1 = -lp + kinetic(p);
      }
      double a = std::exp(h0 - h1);
      if (a > 0.9)
        eps_ *= 2.0;
      else if (a < 0.25)
        eps_ *= 0.5;
      else
        return;
    }
  }

  void run_warmup() {
    int warmup = cfg_.warmup;
    int init_buf = std::max(1, static_cast<int>(0.15 * warmup));
    int term_buf = std::max(1, static_cast<int>(0.10 * warmup));
    int metric_span = std::max(0, warmup - init_buf - term_buf);

    // doubling metric windows
    std::vector<int> window_ends;
    {
      int pos = 0, w = std::max(10, metric_span / 8);
      while (pos < metric_span) {
        int end = pos + w;
        if (end * 2 > metric_span) end = metric_span;  // absorb remainder
        window_ends.push_back(init_buf + end);
        pos = end;
        w *= 2;
      }
    }

    Vec mean = Vec::Zero(dim_);
    Vec m2 = Vec::Zero(dim_);
    double count = 0.0;
    std::size_t next_window = 0;

    for (int it = 0; it < warmup; ++it) {
      transition(true);
      bool in_metric = it >= init_buf && it < init_buf + metric_span;
      if (in_metric) {
        count += 1.0;
        Vec delta = q_ - mean;
        mean += delta / count;
        m2 += delta.cwiseProduct(q_ - mean);
      }
      if (next_window < window_ends.size() && it + 1 == window_ends[next_window]) {
        if (count > 1.0) {
          // regularized variance estimate
          Vec var = m2 / (count - 1.0);
          double shrink = count / (count + 5.0);
          for (int k = 0; k < dim_; ++k)
            inv_metric_[k] = shrink * var[k] + (1.0 - shrink) * 1e-3;
        }
        mean.setZero();
        m2.setZero();
        count = 0.0;
        init_step_size();
        da_.restart(eps_);
        ++next_window;
      }
    }
    eps_ = da_.eps_final();
  }

  const Model& model_;
  const SampleConfig& cfg_;
  Rng rng_;
  Vec q_;
  Vec grad_;
  Vec inv_metric_;
  double lp_ = 0.0;
  double eps_ = 0.1;
  int dim_ = 0;
  DualAverage da_;
};

}  // namespace

DrawMatrix sample(const Model& model, const std::vector<Vec>& init,
                  const SampleConfig& cfg) {
  if (static_cast<int>(init.size()) != cfg.chains)
    throw SamplerError("need one init vector per chain");
  DrawMatrix dm;
  dm.chains = cfg.chains;
  dm.draws = cfg.draws;
  dm.dim = model.dim;
  dm.names = model.names;
  dm.values.resize(static_cast<std::size_t>(cfg.chains) * cfg.draws * model.dim);
  dm.chain_diag.resize(cfg.chains);

  auto run_chain = [&](int c) {
    ChainRunner runner(model, init[c],
                       cfg, Rng::stream(cfg.seed, cfg.stream_label, c));
    return runner.run();
  };

  std::vector<ChainResult> results(cfg.chains);
  if (cfg.parallel_chains && cfg.chains > 1) {
    std::vector<std::future<ChainResult>> futs;
    for (int c = 0; c < cfg.chains; ++c)
      futs.push_back(std::async(std::launch::async, run_chain, c));
    for (int c = 0; c < cfg.chains; ++c) results[c] = futs[c].get();
  } else {
    for (int c = 0; c < cfg.chains; ++c) results[c] = run_chain(c);
  }

  for (int c = 0; c < cfg.chains; ++c) {
    dm.chain_diag[c] = results[c].diag;
    std::copy(results[c].draws.begin(), results[c].draws.end(),
              dm.values.begin() +
                  static_cast<std::size_t>(c) * cfg.draws * model.dim);
  }
  return dm;
}

}  // namespace tsln
