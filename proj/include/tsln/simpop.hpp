#ifndef TSLN_SIMPOP_HPP
#define TSLN_SIMPOP_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tsln/stage2.hpp"
#include "tsln/survey.hpp"

namespace tsln {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CensusConfig {
  std::uint64_t seed = 1;
  int areas = 100;
  double u_lo = 0.1;
  double u_hi = 0.4;
  std::vector<double> pop_choices = {500.0, 3000.0};
  double g_sd = 0.01;
  double sampling_fraction = 0.004;
  int sampled_areas = 60;
};

struct SyntheticCensus {
  CensusConfig cfg;
  // per area
  std::vector<double> N;
  std::vector<double> mu;       // realized proportion, exact
  std::vector<double> k;        // standardized covariate
  std::vector<int> n_i;         // fixed within-area sample size
  // per individual, area-major
  std::vector<int> area;
  std::vector<int> y;
  std::vector<double> z;        // sampling score
  std::vector<double> pi;       // within-area inclusion probability
  std::vector<double> w;        // design weight 1/(n_i*pi)
  std::vector<int> offset;      // per-area start into individual arrays

  int M() const { return static_cast<int>(N.size()); }
  int total() const { return static_cast<int>(y.size()); }
};

// area proportions equally spaced over [u_lo, u_hi]; outcomes binomial;
// selection scores favor y = 0 (informative design)
SyntheticCensus generate_census(const CensusConfig& cfg);

// 60 areas PPS without replacement, then within-area weighted sampling
// without replacement; weights rescaled to sum to N_i within area.
// The sampled dataset carries k as its single continuous covariate.
SurveyDataset draw_sample(const SyntheticCensus& c, std::uint64_t seed);

// area-level frame for stage 2 over the full census
AreaFrame census_frame(const SyntheticCensus& c);

}  // namespace tsln

#endif
