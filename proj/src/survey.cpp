#include "tsln/survey.hpp"

#include <algorithm>

namespace tsln {

std::vector<std::vector<int>> SurveyDataset::area_rows() const {
  std::vector<std::vector<int>> out(M);
  for (int j = 0; j < n(); ++j) out[records[j].area].push_back(j);
  return out;
}

std::vector<int> SurveyDataset::sampled_areas() const {
  std::vector<int> out;
  auto rows = area_rows();
  for (int i = 0; i < M; ++i)
    if (!rows[i].empty()) out.push_back(i);
  return out;
}

WeightSet rescale_weights(const SurveyDataset& d) {
  for (const auto& r : d.records)
    if (!(r.w_raw > 0.0)) throw SurveyError("nonpositive raw weight");
  auto rows = d.area_rows();
  WeightSet ws;
  ws.w.assign(d.n(), 0.0);
  ws.w_tilde.assign(d.n(), 0.0);
  double total_raw = 0.0;
  for (const auto& r : d.records) total_raw += r.w_raw;
  double n_total = static_cast<double>(d.n());
  for (int i = 0; i < d.M; ++i) {
    if (rows[i].empty()) continue;
    double s = 0.0;
    for (int j : rows[i]) s += d.records[j].w_raw;
    if (!(s > 0.0)) throw SurveyError("EmptyArea");
    double ni = static_cast<double>(rows[i].size());
    for (int j : rows[i]) ws.w[j] = ni * d.records[j].w_raw / s;
  }
  for (int j = 0; j < d.n(); ++j)
    ws.w_tilde[j] = n_total * d.records[j].w_raw / total_raw;
  return ws;
}

double hajek_mean(const std::vector<double>& w, const std::vector<double>& v) {
  double num = 0.0;
  double ni = static_cast<double>(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) num += w[j] * v[j];
  return num / ni;
}

double hajek_variance(const std::vector<double>& w, const std::vector<double>& v,
                      double center, double population) {
  double ni = static_cast<double>(w.size());
  if (w.size() < 2) return std::nan("");
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    double r = v[j] - center;
    s += w[j] * w[j] * r * r;
  }
  return (1.0 / ni) * (1.0 - ni / population) * (1.0 / (ni - 1.0)) * s;
}

DirectEstimate hajek(const SurveyDataset& d, const WeightSet& ws, int area,
                     double population) {
  if (!(population > 0.0)) throw SurveyError("UnknownPopulation");
  auto rows = d.area_rows();
  if (area < 0 || area >= d.M || rows[area].empty())
    throw SurveyError("area not sampled");
  std::vector<double> w, y;
  for (int j : rows[area]) {
    w.push_back(ws.w[j]);
    y.push_back(static_cast<double>(d.records[j].y));
  }
  DirectEstimate e;
  e.n_i = static_cast<double>(w.size());
  e.N_i = population;
  e.mu_d = hajek_mean(w, y);
  e.psi_d = hajek_variance(w, y, e.mu_d, population);
  e.stable = w.size() >= 2 && e.mu_d > 0.0 && e.mu_d < 1.0;
  return e;
}

DirectEstimate pooled_direct(const SurveyDataset& d,
                             const std::vector<int>& member_areas,
                             double group_population) {
  std::vector<double> w_raw, y;
  auto rows = d.area_rows();
  for (int a : member_areas)
    for (int j : rows[a]) {
      w_raw.push_back(d.records[j].w_raw);
      y.push_back(static_cast<double>(d.records[j].y));
    }
  if (w_raw.empty()) throw SurveyError("EmptyGroup");
  // group-level renormalization: pooled weights sum to the pooled n
  double s = 0.0;
  for (double v : w_raw) s += v;
  double n = static_cast<double>(w_raw.size());
  std::vector<double> w(w_raw.size());
  for (std::size_t j = 0; j < w_raw.size(); ++j) w[j] = n * w_raw[j] / s;
  DirectEstimate e;
  e.n_i = n;
  e.N_i = group_population;
  e.mu_d = hajek_mean(w, y);
  e.psi_d = hajek_variance(w, y, e.mu_d, group_population);
  e.stable = w.size() >= 2 && e.mu_d > 0.0 && e.mu_d < 1.0;
  return e;
}

std::vector<DirectEstimate> aggregate_direct(const SurveyDataset& d,
                                             const std::vector<int>& group_of_area,
                                             int n_groups,
                                             const std::vector<double>& populations) {
  std::vector<std::vector<int>> members(n_groups);
  std::vector<double> pop(n_groups, 0.0);
  for (int a = 0; a < d.M; ++a) {
    int g = group_of_area[a];
    if (g < 0) continue;
    members[g].push_back(a);
    pop[g] += populations[a];
  }
  std::vector<DirectEstimate> out;
  out.reserve(n_groups);
  for (int g = 0; g < n_groups; ++g)
    out.push_back(pooled_direct(d, members[g], pop[g]));
  return out;
}

double cv(double point, double sd) {
  if (point == 0.0) throw SurveyError("ZeroPoint");
  return 100.0 * sd / std::abs(point);
}

}  // namespace tsln
