#ifndef TSLN_HMC_HPP
#define TSLN_HMC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsln/density.hpp"

namespace tsln {

struct SamplerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SampleConfig {
  int chains = 4;
  int warmup = 1000;
  int draws = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  double traj_length = 1.2;   // nominal integration time; steps = time/eps
  int max_leapfrog = 128;
  std::string stream_label = "chain";  // rng sub-stream name
  bool parallel_chains = true;
};

struct ChainDiag {
  double step_size = 0.0;
  int divergences = 0;  // post-warmup
};

struct DrawMatrix {
  int chains = 0;
  int draws = 0;  // per chain, post-thinning
  int dim = 0;
  std::vector<std::string> names;
  std::vector<double> values;  // chain-major [c][d][k]
  std::vector<ChainDiag> chain_diag;

  double at(int c, int d, int k) const {
    return values[(static_cast<std::size_t>(c) * draws + d) * dim + k];
  }
  std::vector<double> pooled(int k) const;
  std::vector<std::vector<double>> by_chain(int k) const;
  int total_divergences() const;
};

// Plain HMC with dual-averaging step size and diagonal metric adaptation
// during warmup; leapfrog count jittered around traj_length/step_size.
DrawMatrix sample(const Model& model, const std::vector<Vec>& init,
                  const SampleConfig& cfg);

}  // namespace tsln

#endif
