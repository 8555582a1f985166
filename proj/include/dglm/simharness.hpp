#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dglm/bandit.hpp"
#include "dglm/filter.hpp"
#include "dglm/rng.hpp"

namespace dglm {

/// Bandit simulation setup. Defaults reproduce the reference experiment:
/// ten arms, three-part response (logit, linear, logit), slowly drifting
/// parameters.
struct SimConfig {
  int num_arms = 10;
  int rounds = 2000;
  int repetitions = 30;
  int k1 = 5;                  // continuous predictor rows
  int k2 = 3;                  // categorical predictor rows
  double drift_rate = 1e5;     // rate of the exponential W_t diagonals
  double drift_corr = 0.2;     // correlation of W_t off-diagonals
  double cont_corr = -0.1;     // correlation of Sigma_c off-diagonals
  double sigma_y2 = 1.0;       // noise variance of the linear response entry
  std::uint64_t seed = 0;
  ThompsonVariant thompson_variant = ThompsonVariant::per_arm;

  /// Throws DomainError on out-of-range values, including correlations that
  /// cannot yield a PSD constant-correlation matrix at these dimensions.
  void validate() const;

  Index param_dim() const {
    return num_arms + (k1 + k2) * (num_arms + 1);
  }
};

/// Flat key=value file, '#' comments, unknown keys rejected.
SimConfig load_config(const std::string& path);
SimConfig parse_config(const std::string& text);

/// Cumulative per-round series; all vectors have length = rounds.
struct MetricSeries {
  std::vector<double> error_fraction;
  std::vector<double> regret_rate;
  std::vector<double> random_regret_rate;
};

struct SimResult {
  std::vector<RoundRecord> records;
  MetricSeries metrics;
};

/// Runs the full seeded round loop of one repetition: predict, sample
/// contexts, Thompson-select, observe, update. Deterministic for a fixed
/// config and seed. A filtering failure aborts with the round index.
SimResult run_simulation(const SimConfig& config);

/// Pointwise mean of MetricSeries over `repetitions` runs with sub-seeds
/// derived from the master seed. Repetitions execute concurrently;
/// aggregation order is fixed by repetition index.
MetricSeries aggregate_runs(const SimConfig& config);

/// Writes <path>.rounds.csv and <path>.metrics.csv. Floats are rendered as
/// shortest round-trip decimals.
void emit_csv(const MetricSeries& series,
              const std::vector<RoundRecord>& records,
              const std::string& path);

/// Parses the emitted metrics CSV back into a series (round-trip checks,
/// downstream tooling).
MetricSeries read_metrics_csv(const std::string& path);

/// Model constructor lookup by config name: "gaussian[:sigma2]", "poisson",
/// "exponential", "bernoulli_logit", or "product:<part>,<part>,...".
ModelPtr make_model(const std::string& spec);

/// Covariance with exponential(rate) variances on the diagonal and constant
/// off-diagonal correlation; projected onto the PSD cone by eigenvalue
/// clipping when the raw construction fails. Drives both the drift noise
/// and the continuous-context covariance.
Matrix sample_correlated_cov(Index dim, double rate, double corr, Rng& rng);

/// Offline filtering setup parsed from a dynamics file (key=value: dim,
/// transition, input, process_noise, m0, c0). The dynamics are held constant
/// across the stream.
struct OfflineFilterSpec {
  Matrix transition;
  Vector input_effect;
  Matrix process_noise;
  Vector initial_mean;
  Matrix initial_cov;
};

OfflineFilterSpec load_offline_spec(const std::string& path);

/// Observation rows: d response columns then the k-by-c predictor flattened
/// row-major. A non-numeric first line is treated as a header and skipped.
std::vector<Observation> load_observations_csv(const std::string& path,
                                               Index response_dim,
                                               Index signal_dim,
                                               Index param_dim);

/// Sequential predict/update fold over the stream; returns every posterior.
std::vector<Belief> run_offline_filter(const ObservationModel& model,
                                       const OfflineFilterSpec& spec,
                                       const std::vector<Observation>& stream);

/// Writes step, posterior mean entries, and posterior variance diagonal.
void write_states_csv(const std::vector<Belief>& states,
                      const std::string& path);

}  // namespace dglm
