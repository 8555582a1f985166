#pragma once

#include "dglm/expfam.hpp"
#include "dglm/statespace.hpp"

namespace dglm {

/// One round's data: predictor matrix X (k-by-c) and response y (d-vector).
struct Observation {
  Matrix predictor;
  Vector response;
};

/// Per-update telemetry. `stabilized` records whether the stable inverse
/// path or a signal-domain clamp was engaged.
struct UpdateDiagnostics {
  Vector predicted_signal;            // f, after any domain clamp
  double gradient_norm = 0.0;
  double hessian_condition_estimate = 0.0;
  bool stabilized = false;
};

struct UpdateResult {
  Belief posterior;
  UpdateDiagnostics diagnostics;
};

/// Predicted signals of models with a constrained domain (the exponential
/// model) are clamped to at least this value before derivatives are taken.
inline constexpr double kFilterSignalFloor = 1e-3;

/// Below this smallest-magnitude Hessian eigenvalue, update() routes to the
/// stable path instead of the textbook one.
inline constexpr double kStableDispatchThreshold = 1e-8;

/// Estimation step: folds the observation into the prior, producing the
/// posterior belief. Dispatches to the stable path for near-singular
/// Hessians, otherwise uses the textbook form.
///   Q = [-d2l/dlambda2]^{-1} + Omega,   C = R - R X Q^{-1} X' R,
///   m = a + C X (dl/dlambda),  all derivatives evaluated at f = X'a.
UpdateResult update(const PriorPrediction& prior, const Observation& obs,
                    const ObservationModel& model);

/// Textbook path that inverts the Hessian factor directly. Kept for
/// validation; throws FilterError directing callers to update_stable when
/// the Hessian factor is numerically singular.
UpdateResult update_naive(const PriorPrediction& prior, const Observation& obs,
                          const ObservationModel& model);

/// Algebraically identical to update() but never inverts the Hessian;
/// Q^{-1} is expanded through the Kailath/Woodbury identity with a single
/// well-conditioned inner solve of (I - H Omega).
UpdateResult update_stable(const PriorPrediction& prior,
                           const Observation& obs,
                           const ObservationModel& model);

/// Scalar-signal fast path (c = d = 1): rank-1 covariance update with
/// scalar divisions only; no matrix inversion or linear solve anywhere.
UpdateResult update_univariate(const PriorPrediction& prior, const Vector& x,
                               double y, const ObservationModel& model);

/// Exact linear-Gaussian posterior (the Kalman estimation step):
/// Q = Sigma + X'RX, C = R - R X Q^{-1} X' R, m = a + C X Sigma^{-1}(y - f).
Belief kalman_update(const PriorPrediction& prior, const Observation& obs,
                     const Matrix& noise_cov);

}  // namespace dglm
