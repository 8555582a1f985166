#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dglm/core.hpp"

namespace dglm {

/// Posterior mean and covariance of the parameters at one time step.
/// Construction re-symmetrizes the covariance and applies the shared PSD
/// jitter policy (see linalg.hpp), so a held Belief always satisfies the
/// covariance invariants. Immutable after construction.
class Belief {
 public:
  Belief(Vector mean, Matrix cov, std::int64_t step = 0);

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  std::int64_t step() const { return step_; }
  Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Matrix cov_;
  std::int64_t step_;
};

/// One step of linear parameter dynamics: transition matrix, pre-multiplied
/// input term, and process-noise covariance.
class DynamicsSpec {
 public:
  DynamicsSpec(Matrix transition, Vector input_effect, Matrix process_noise);

  /// Random-walk dynamics: identity transition, no input.
  static DynamicsSpec random_walk(Matrix process_noise);
  /// Static parameters: identity transition, no input, zero noise.
  static DynamicsSpec static_parameters(Index dim);

  const Matrix& transition() const { return transition_; }
  const Vector& input_effect() const { return input_effect_; }
  const Matrix& process_noise() const { return process_noise_; }
  Index dim() const { return input_effect_.size(); }

 private:
  Matrix transition_;
  Vector input_effect_;
  Matrix process_noise_;
};

/// Mean and covariance of the parameters given history excluding the
/// current observation. Same covariance hygiene as Belief.
class PriorPrediction {
 public:
  PriorPrediction(Vector mean, Matrix cov, std::int64_t step = 0);

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  std::int64_t step() const { return step_; }
  Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Matrix cov_;
  std::int64_t step_;
};

/// Predicted signal moments induced by a predictor matrix: mean, covariance,
/// and the signal/parameter cross-covariance.
struct SignalPrediction {
  Vector mean;       // c-vector
  Matrix cov;        // c-by-c, symmetric
  Matrix cross_cov;  // c-by-k
};

/// Exact prediction step: mean = G m + Bu, cov = G C G' + W.
PriorPrediction predict(const Belief& belief, const DynamicsSpec& dynamics);

/// Signal moments under the prior for predictor X (k-by-c):
/// mean = X' a, cov = X' R X, cross_cov = X' R.
SignalPrediction predict_signal(const PriorPrediction& prior,
                                const Matrix& predictor);

/// Checkpoint encoding of a Belief: mean followed by the packed
/// lower-triangular covariance, row-major, as little-endian 64-bit floats.
/// The step index is not part of the format.
std::vector<std::uint8_t> serialize_belief(const Belief& belief);

/// Inverse of serialize_belief; the dimension is recovered from the byte
/// count. Throws NumericalError on malformed input.
Belief deserialize_belief(const std::vector<std::uint8_t>& bytes);

void save_belief(const Belief& belief, const std::string& path);
Belief load_belief(const std::string& path);

}  // namespace dglm
