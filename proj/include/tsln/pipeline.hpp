#ifndef TSLN_PIPELINE_HPP
#define TSLN_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "tsln/simpop.hpp"
#include "tsln/stage1.hpp"
#include "tsln/stage2.hpp"

namespace tsln::pipeline {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiagnostics = 3;

// single experiment cell: one replicate sample fitted end to end with the
// simulation-scale two-stage model
struct CellResult {
  double sigma_e = 0.0;
  bool area_re = false;
  int replicate = 0;
  double sr_median = 0.0;
  double alc = 0.0;
  double marb = 0.0;
  double mrrmse = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;
  int areas_evaluated = 0;
  int covered_count = 0;
  double max_mu_rhat = 0.0;
  int divergences = 0;
  bool failed = false;
  std::string error;
};

CellResult run_cell(const SyntheticCensus& census, const SurveyDataset& sample,
                    double sigma_e, bool area_re, const SampleConfig& s1_cfg,
                    const SampleConfig& s2_cfg, int t_tilde);

// subcommand entry point used by the CLI; returns the process exit code
int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_override,
                std::optional<std::uint64_t> seed_override);

// exposed for tests
nlohmann::json load_config(const std::string& path);
int cmd_simulate(const nlohmann::json& cfg, const std::string& out);
int cmd_fit(const nlohmann::json& cfg, const std::string& out);
int cmd_summarize(const nlohmann::json& cfg, const std::string& out);
int cmd_experiment(const nlohmann::json& cfg, const std::string& out);

}  // namespace tsln::pipeline

#endif
