#include "dglm/bandit.hpp"

#include <limits>

#include "dglm/filter.hpp"
#include "dglm/linalg.hpp"
#include "dglm/rng.hpp"

namespace dglm {

void ContextFactors::validate() const {
  if (num_arms <= 0) throw DomainError("ContextFactors: num_arms must be > 0");
  int ones = 0;
  for (Index i = 0; i < categorical.size(); ++i) {
    if (categorical[i] == 1.0) {
      ++ones;
    } else if (categorical[i] != 0.0) {
      throw DomainError("ContextFactors: categorical must be one-hot");
    }
  }
  if (categorical.size() > 0 && ones != 1) {
    throw DomainError("ContextFactors: categorical must have exactly one 1");
  }
  require_dims(continuous_cov.rows() == k1() && continuous_cov.cols() == k1(),
               "ContextFactors: continuous_cov must be k1-by-k1");
}

Index ContextFactors::param_dim() const {
  return num_arms + (k1() + k2()) * (num_arms + 1);
}

RewardSpec RewardSpec::coordinate(Index response_dim, Index index) {
  if (index < 0 || index >= response_dim) {
    throw DimensionError("RewardSpec: coordinate index out of range");
  }
  Vector w = Vector::Zero(response_dim);
  w[index] = 1.0;
  return RewardSpec{std::move(w)};
}

RewardSpec RewardSpec::linear(Vector weights) {
  return RewardSpec{std::move(weights)};
}

Matrix build_context(const ContextFactors& factors, int arm) {
  factors.validate();
  if (arm < 0 || arm >= factors.num_arms) {
    throw DomainError("build_context: arm index out of range");
  }
  const Index a_count = factors.num_arms;
  const Index k1 = factors.k1();
  const Index k2 = factors.k2();
  const Index c = factors.signal_dim();

  Matrix x = Matrix::Zero(factors.param_dim(), c);
  Index row = 0;
  // Arm indicator, repeated across all signal entries.
  x.row(row + arm).setOnes();
  row += a_count;
  // Shared continuous and categorical blocks.
  x.block(row, 0, k1, c) = factors.continuous;
  row += k1;
  x.block(row, 0, k2, c) = factors.categorical * Eigen::RowVectorXd::Ones(c);
  row += k2;
  // Arm interactions: only the chosen arm's slice is nonzero.
  x.block(row + arm * k1, 0, k1, c) = factors.continuous;
  row += a_count * k1;
  x.block(row + arm * k2, 0, k2, c) =
      factors.categorical * Eigen::RowVectorXd::Ones(c);
  return x;
}

Vector arm_expected_rewards(const Vector& params,
                            const std::vector<Matrix>& contexts,
                            const ObservationModel& model,
                            const RewardSpec& reward) {
  Vector rewards(static_cast<Index>(contexts.size()));
  const Vector floor = model.signal_floor();
  for (std::size_t a = 0; a < contexts.size(); ++a) {
    Vector signal = contexts[a].transpose() * params;
    for (Index i = 0; i < signal.size(); ++i) {
      if (floor[i] > -std::numeric_limits<double>::infinity()) {
        signal[i] = std::max(signal[i], kFilterSignalFloor);
      }
    }
    rewards[static_cast<Index>(a)] =
        reward.weights.dot(model.response_mean(signal));
  }
  return rewards;
}

namespace {

Index argmax_lowest(const Vector& values) {
  Index best = 0;
  for (Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace

int thompson_select(const PriorPrediction& prior,
                    const std::vector<Matrix>& contexts,
                    const ObservationModel& model, const RewardSpec& reward,
                    std::uint64_t seed, ThompsonVariant variant) {
  if (contexts.empty()) throw DomainError("thompson_select: no contexts");
  const Matrix chol = psd_cholesky(prior.cov(), "thompson_select");

  Vector sampled(static_cast<Index>(contexts.size()));
  Vector shared_draw;
  if (variant == ThompsonVariant::shared) {
    Rng rng(Rng::derive_seed(seed, 0));
    shared_draw = sample_mvn(prior.mean(), chol, rng);
  }
  for (std::size_t a = 0; a < contexts.size(); ++a) {
    Vector theta;
    if (variant == ThompsonVariant::per_arm) {
      Rng rng(Rng::derive_seed(seed, a));
      theta = sample_mvn(prior.mean(), chol, rng);
    } else {
      theta = shared_draw;
    }
    const std::vector<Matrix> one{contexts[a]};
    sampled[static_cast<Index>(a)] =
        arm_expected_rewards(theta, one, model, reward)[0];
  }
  return static_cast<int>(argmax_lowest(sampled));
}

RegretResult regret(const Vector& true_params,
                    const std::vector<Matrix>& contexts, int chosen,
                    const ObservationModel& model, const RewardSpec& reward) {
  if (chosen < 0 || static_cast<std::size_t>(chosen) >= contexts.size()) {
    throw DomainError("regret: chosen arm out of range");
  }
  const Vector rewards =
      arm_expected_rewards(true_params, contexts, model, reward);
  const Index optimal = argmax_lowest(rewards);
  return RegretResult{rewards[optimal] - rewards[chosen],
                      static_cast<int>(optimal)};
}

}  // namespace dglm
