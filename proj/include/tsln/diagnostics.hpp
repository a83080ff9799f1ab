#ifndef TSLN_DIAGNOSTICS_HPP
#define TSLN_DIAGNOSTICS_HPP

#include <vector>

namespace tsln {

struct RhatEss {
  double rhat = 0.0;  // NaN when chains are constant
  double ess = 0.0;
};

// Split-chain rank-normalized R-hat and bulk effective sample size.
// chains: one draw vector per chain, equal lengths >= 4.
RhatEss rhat_ess(const std::vector<std::vector<double>>& chains);

// R-hat alone (skips the quadratic autocovariance pass)
double split_rhat(const std::vector<std::vector<double>>& chains);

}  // namespace tsln

#endif
