#include "tsln/simpop.hpp"

#include <cmath>

#include "tsln/rng.hpp"
#include "tsln/util.hpp"

namespace tsln {

SyntheticCensus generate_census(const CensusConfig& cfg) {
  SyntheticCensus c;
  c.cfg = cfg;
  int M = cfg.areas;
  Rng rng(Rng::stream(cfg.seed, "census"));

  std::vector<double> U(M);
  for (int i = 0; i < M; ++i)
    U[i] = cfg.u_lo + (cfg.u_hi - cfg.u_lo) * static_cast<double>(i) /
                          static_cast<double>(M - 1);

  c.N.resize(M);
  c.mu.resize(M);
  c.k.resize(M);
  c.n_i.resize(M);
  c.offset.resize(M + 1, 0);
  double scale = static_cast<double>(cfg.areas) /
                 static_cast<double>(cfg.sampled_areas);
  for (int i = 0; i < M; ++i) {
    c.N[i] = cfg.pop_choices[rng.below(cfg.pop_choices.size())];
    int Ni = static_cast<int>(c.N[i]);
    int ones = 0;
    std::vector<int> ys(Ni);
    for (int j = 0; j < Ni; ++j) {
      ys[j] = rng.uniform() < U[i] ? 1 : 0;
      ones += ys[j];
    }
    c.mu[i] = static_cast<double>(ones) / c.N[i];
    c.k[i] = logit(clamp_proportion(c.mu[i])) + cfg.g_sd * rng.normal();
    c.n_i[i] = static_cast<int>(
        std::lround(scale * cfg.sampling_fraction * c.N[i]));
    c.offset[i] = c.total();
    for (int j = 0; j < Ni; ++j) {
      c.area.push_back(i);
      c.y.push_back(ys[j]);
      double z = (ys[j] == 0 ? 1.0 : 0.0) + 0.8 * rng.exponential();
      c.z.push_back(z);
    }
  }
  c.offset[M] = c.total();

  // standardize k across areas
  {
    double m = mean(c.k);
    for (double& v : c.k) v -= m;
    double sd = std::sqrt(variance(c.k));
    for (double& v : c.k) v /= sd;
  }

  c.pi.resize(c.total());
  c.w.resize(c.total());
  for (int i = 0; i < M; ++i) {
    double s = 0.0;
    for (int j = c.offset[i]; j < c.offset[i + 1]; ++j) s += c.z[j];
    for (int j = c.offset[i]; j < c.offset[i + 1]; ++j) {
      c.pi[j] = c.z[j] / s;
      c.w[j] = 1.0 / (static_cast<double>(c.n_i[i]) * c.pi[j]);
    }
  }
  return c;
}

namespace {

// sequential weighted draw-and-remove without replacement
std::vector<int> weighted_wor(const std::vector<double>& weights, int count,
                              Rng& rng) {
  std::vector<double> w = weights;
  std::vector<int> out;
  double total = 0.0;
  for (double v : w) total += v;
  for (int d = 0; d < count; ++d) {
    double u = rng.uniform() * total;
    double acc = 0.0;
    int pick = -1;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (w[j] <= 0.0) continue;
      acc += w[j];
      if (u <= acc) {
        pick = static_cast<int>(j);
        break;
      }
    }
    if (pick < 0) {  // numerical tail: take the last remaining
      for (std::size_t j = w.size(); j-- > 0;)
        if (w[j] > 0.0) {
          pick = static_cast<int>(j);
          break;
        }
    }
    out.push_back(pick);
    total -= w[pick];
    w[pick] = 0.0;
  }
  return out;
}

}  // namespace

SurveyDataset draw_sample(const SyntheticCensus& c, std::uint64_t seed) {
  Rng rng(Rng::stream(seed, "sample"));
  int M = c.M();
  for (int i = 0; i < M; ++i)
    if (c.n_i[i] > static_cast<int>(c.N[i]))
      throw SimError("SampleExceedsPopulation");

  std::vector<double> npop(c.N.begin(), c.N.end());
  auto areas = weighted_wor(npop, c.cfg.sampled_areas, rng);

  SurveyDataset d;
  d.M = M;
  for (int i : areas) {
    std::vector<double> pw(c.pi.begin() + c.offset[i],
                           c.pi.begin() + c.offset[i + 1]);
    auto picks = weighted_wor(pw, c.n_i[i], rng);
    double wsum = 0.0;
    std::vector<SurveyRecord> recs;
    for (int local : picks) {
      int j = c.offset[i] + local;
      SurveyRecord r;
      r.area = i;
      r.y = c.y[j];
      r.w_raw = c.w[j];
      r.x = {c.k[i]};
      recs.push_back(std::move(r));
      wsum += c.w[j];
    }
    for (auto& r : recs) {
      r.w_raw *= c.N[i] / wsum;  // within-area weights sum to N_i
      d.records.push_back(std::move(r));
    }
  }
  return d;
}

AreaFrame census_frame(const SyntheticCensus& c) {
  AreaFrame f;
  for (int i = 0; i < c.M(); ++i) {
    AreaRow r;
    r.id = "A" + std::to_string(i);
    r.population = c.N[i];
    r.g = {c.k[i]};
    f.rows.push_back(std::move(r));
  }
  return f;
}

}  // namespace tsln
