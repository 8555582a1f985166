#pragma once

#include <cstdint>
#include <vector>

#include "dglm/expfam.hpp"
#include "dglm/statespace.hpp"

namespace dglm {

/// Per-round context ingredients: the continuous predictor block (resampled
/// each round), the one-hot categorical predictor, and the covariance the
/// continuous columns were drawn from.
struct ContextFactors {
  int num_arms = 0;
  Matrix continuous;      // k1-by-c
  Vector categorical;     // k2, one-hot
  Matrix continuous_cov;  // k1-by-k1

  void validate() const;
  Index k1() const { return continuous.rows(); }
  Index k2() const { return categorical.size(); }
  Index signal_dim() const { return continuous.cols(); }
  /// Total parameter count: A + (k1 + k2)(A + 1).
  Index param_dim() const;
};

/// Deterministic linear map from a response vector to a scalar reward;
/// expected reward under a model is weights' h(lambda) in closed form.
struct RewardSpec {
  Vector weights;

  static RewardSpec coordinate(Index response_dim, Index index);
  static RewardSpec linear(Vector weights);

  double operator()(const Vector& response) const {
    return weights.dot(response);
  }
};

/// One bandit round's outcome.
struct RoundRecord {
  std::int64_t round = 0;
  int chosen_arm = 0;
  int optimal_arm = 0;
  double regret = 0.0;
  double random_regret = 0.0;
  double reward = 0.0;
};

enum class ThompsonVariant { per_arm, shared };

/// Context matrix for one arm, stacking in order: the arm indicator block,
/// the shared continuous and categorical blocks, then the arm-specific
/// interaction copies of both. Rows total param_dim().
Matrix build_context(const ContextFactors& factors, int arm);

/// Expected reward of every arm at the given parameters.
Vector arm_expected_rewards(const Vector& params,
                            const std::vector<Matrix>& contexts,
                            const ObservationModel& model,
                            const RewardSpec& reward);

/// Thompson selection: draws one parameter sample per arm from
/// N(prior mean, prior cov) (or a single shared sample) and returns the arm
/// whose sampled expected reward is largest, ties to the lowest index.
/// Per-arm sub-seeds derive deterministically from `seed`, so results do
/// not depend on arm evaluation order.
int thompson_select(const PriorPrediction& prior,
                    const std::vector<Matrix>& contexts,
                    const ObservationModel& model, const RewardSpec& reward,
                    std::uint64_t seed,
                    ThompsonVariant variant = ThompsonVariant::per_arm);

struct RegretResult {
  double regret = 0.0;
  int optimal_arm = 0;
};

/// Gap between the best arm's expected reward and the chosen arm's, under
/// the true parameters; ties resolve to the lowest arm index.
RegretResult regret(const Vector& true_params,
                    const std::vector<Matrix>& contexts, int chosen,
                    const ObservationModel& model, const RewardSpec& reward);

}  // namespace dglm
