#ifndef TSLN_SURVEY_HPP
#define TSLN_SURVEY_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsln {

struct SurveyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SurveyRecord {
  int area = 0;                 // index into the full area list (0..M-1)
  int y = 0;                    // outcome bit
  double w_raw = 1.0;           // raw design weight
  std::vector<double> x;        // continuous covariates
  std::vector<int> cat;         // category index per declared factor
};

struct SurveyDataset {
  int M = 0;                    // total area count
  std::vector<SurveyRecord> records;
  std::vector<int> cat_cardinality;  // per declared factor

  int n() const { return static_cast<int>(records.size()); }
  // indices of records per sampled area, area-sorted
  std::vector<std::vector<int>> area_rows() const;
  std::vector<int> sampled_areas() const;
};

struct WeightSet {
  std::vector<double> w;        // within-area normalized, per record
  std::vector<double> w_tilde;  // globally normalized, per record
};

struct DirectEstimate {
  double mu_d = 0.0;
  double psi_d = std::nan("");  // absent when undefined (n_i = 1)
  double n_i = 0.0;
  double N_i = 0.0;
  bool stable = false;
};

WeightSet rescale_weights(const SurveyDataset& d);

// Hajek proportion and its approximate sampling variance with
// finite-population correction, for one sampled area.
DirectEstimate hajek(const SurveyDataset& d, const WeightSet& ws, int area,
                     double population);

// Same estimator over the pooled records of a group of areas, with weights
// renormalized at the group level.
DirectEstimate pooled_direct(const SurveyDataset& d,
                             const std::vector<int>& member_areas,
                             double group_population);

// Group-level direct estimates given an area -> group map (-1 = no group).
std::vector<DirectEstimate> aggregate_direct(const SurveyDataset& d,
                                             const std::vector<int>& group_of_area,
                                             int n_groups,
                                             const std::vector<double>& populations);

double cv(double point, double sd);

// Hajek functional on arbitrary per-record values (used for stage-1
// aggregation where posterior probabilities replace the outcome bit).
double hajek_mean(const std::vector<double>& w, const std::vector<double>& v);
double hajek_variance(const std::vector<double>& w, const std::vector<double>& v,
                      double center, double population);

}  // namespace tsln

#endif
