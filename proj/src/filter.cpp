#include "dglm/filter.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "dglm/linalg.hpp"

namespace dglm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Prepared {
  Vector signal;            // f, clamped into the admissible domain
  Matrix signal_cov;        // Omega = X'RX
  Matrix cross;             // X'R
  SignalDerivatives deriv;  // at (y, f)
  bool clamped = false;
  double min_abs_eig = 0.0;     // of the Hessian
  double condition = kInf;      // max|eig| / min|eig| of the Hessian
};

// Predicts the signal, clamps it into the model's admissible domain, and
// evaluates the log-likelihood derivatives there.
Prepared prepare(const PriorPrediction& prior, const Matrix& predictor,
                 const Vector& response, const ObservationModel& model) {
  require_dims(predictor.rows() == prior.dim(),
               "update: predictor must have k rows");
  require_dims(predictor.cols() == model.signal_dim(),
               "update: predictor must have c columns");
  model.validate_response(response);

  Prepared p;
  const SignalPrediction sig = predict_signal(prior, predictor);
  p.signal = sig.mean;
  p.signal_cov = sig.cov;
  p.cross = sig.cross_cov;

  const Vector floor = model.signal_floor();
  for (Index i = 0; i < p.signal.size(); ++i) {
    if (floor[i] > -kInf && p.signal[i] < kFilterSignalFloor) {
      p.signal[i] = kFilterSignalFloor;
      p.clamped = true;
    }
  }

  try {
    p.deriv = model.signal_derivatives(response, p.signal);
  } catch (const DomainError& e) {
    throw FilterError(std::string("update: domain clamp exhausted at f = [") +
                      std::to_string(p.signal[0]) + ", ...]: " + e.what());
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(p.deriv.hessian,
                                           Eigen::EigenvaluesOnly);
  const Vector mags = es.eigenvalues().cwiseAbs();
  p.min_abs_eig = mags.minCoeff();
  p.condition = p.min_abs_eig > 0.0 ? mags.maxCoeff() / p.min_abs_eig : kInf;
  return p;
}

UpdateDiagnostics diagnostics_of(const Prepared& p, bool stable_engaged) {
  UpdateDiagnostics d;
  d.predicted_signal = p.signal;
  d.gradient_norm = p.deriv.gradient.norm();
  d.hessian_condition_estimate = p.condition;
  d.stabilized = stable_engaged || p.clamped;
  return d;
}

UpdateResult finish(const PriorPrediction& prior, const Matrix& predictor,
                    const Prepared& p, const Matrix& q_inv_cross,
                    bool stable_engaged) {
  Matrix cov = prior.cov() - p.cross.transpose() * q_inv_cross;
  Vector mean = prior.mean() + cov * (predictor * p.deriv.gradient);
  Belief posterior(std::move(mean), std::move(cov), prior.step());
  return UpdateResult{std::move(posterior), diagnostics_of(p, stable_engaged)};
}

UpdateResult naive_update_impl(const PriorPrediction& prior,
                               const Observation& obs,
                               const ObservationModel& model,
                               const Prepared& p) {
  const Index c = model.signal_dim();
  if (p.min_abs_eig <= 0.0 || p.condition > 1e14) {
    throw FilterError(
        "update: Hessian factor numerically singular; use update_stable");
  }
  Eigen::LDLT<Matrix> hess_ldlt(Matrix(-p.deriv.hessian));
  const Matrix q =
      hess_ldlt.solve(Matrix::Identity(c, c)) + p.signal_cov;
  Eigen::SelfAdjointEigenSolver<Matrix> q_eig(q, Eigen::EigenvaluesOnly);
  const double q_min = q_eig.eigenvalues().cwiseAbs().minCoeff();
  const double q_max = q_eig.eigenvalues().cwiseAbs().maxCoeff();
  if (q_min <= 0.0 || q_max / q_min > 1e14) {
    throw FilterError("update: Q numerically singular; use update_stable");
  }
  const Matrix q_inv_cross = Eigen::LDLT<Matrix>(q).solve(p.cross);
  return finish(prior, obs.predictor, p, q_inv_cross,
                /*stable_engaged=*/false);
}

UpdateResult stable_update_impl(const PriorPrediction& prior,
                                const Observation& obs,
                                const ObservationModel& model,
                                const Prepared& p) {
  const Index c = model.signal_dim();
  const Matrix s = -p.deriv.hessian;  // PSD for well-formed models
  // Q^{-1} = S - S Omega (I + S Omega)^{-1} S, the Kailath/Woodbury
  // expansion of ([ -H ]^{-1} + Omega)^{-1} that never inverts S itself.
  Eigen::FullPivLU<Matrix> inner(Matrix::Identity(c, c) + s * p.signal_cov);
  if (!inner.isInvertible()) {
    throw FilterError(
        "update_stable: inner (I - H Omega) solve failed; Hessian condition "
        "estimate " +
        std::to_string(p.condition));
  }
  const Matrix q_inv = symmetrize(s - s * p.signal_cov * inner.solve(s));
  return finish(prior, obs.predictor, p, Matrix(q_inv * p.cross),
                /*stable_engaged=*/true);
}

}  // namespace

UpdateResult update(const PriorPrediction& prior, const Observation& obs,
                    const ObservationModel& model) {
  const Prepared p = prepare(prior, obs.predictor, obs.response, model);
  if (p.min_abs_eig < kStableDispatchThreshold) {
    return stable_update_impl(prior, obs, model, p);
  }
  return naive_update_impl(prior, obs, model, p);
}

UpdateResult update_naive(const PriorPrediction& prior, const Observation& obs,
                          const ObservationModel& model) {
  const Prepared p = prepare(prior, obs.predictor, obs.response, model);
  return naive_update_impl(prior, obs, model, p);
}

UpdateResult update_stable(const PriorPrediction& prior,
                           const Observation& obs,
                           const ObservationModel& model) {
  const Prepared p = prepare(prior, obs.predictor, obs.response, model);
  return stable_update_impl(prior, obs, model, p);
}

UpdateResult update_univariate(const PriorPrediction& prior, const Vector& x,
                               double y, const ObservationModel& model) {
  require_dims(model.signal_dim() == 1 && model.response_dim() == 1,
               "update_univariate: model must have c = d = 1");
  require_dims(x.size() == prior.dim(),
               "update_univariate: predictor must have k entries");
  model.validate_response(Vector::Constant(1, y));

  double f = x.dot(prior.mean());
  bool clamped = false;
  if (model.signal_floor()[0] > -kInf && f < kFilterSignalFloor) {
    f = kFilterSignalFloor;
    clamped = true;
  }

  SignalDerivatives deriv;
  try {
    deriv = model.signal_derivatives(Vector::Constant(1, y),
                                     Vector::Constant(1, f));
  } catch (const DomainError& e) {
    throw FilterError(std::string("update_univariate: domain clamp "
                                  "exhausted at f = ") +
                      std::to_string(f) + ": " + e.what());
  }
  const double grad = deriv.gradient[0];
  const double hess = deriv.hessian(0, 0);

  // Scalar-signal update: rank-1 correction, scalar division only.
  const Vector r_x = prior.cov() * x;
  const double x_r_x = x.dot(r_x);
  const double denom = 1.0 - hess * x_r_x;
  if (denom <= 0.0) {
    throw FilterError(
        "update_univariate: nonpositive gain denominator (Hessian not "
        "negative semidefinite?)");
  }
  Matrix cov = prior.cov() + (hess / denom) * (r_x * r_x.transpose());
  Vector mean = prior.mean() + cov * x * grad;
  Belief posterior(std::move(mean), std::move(cov), prior.step());

  UpdateDiagnostics d;
  d.predicted_signal = Vector::Constant(1, f);
  d.gradient_norm = std::abs(grad);
  d.hessian_condition_estimate = hess != 0.0 ? 1.0 : kInf;
  d.stabilized = clamped;
  return UpdateResult{std::move(posterior), d};
}

Belief kalman_update(const PriorPrediction& prior, const Observation& obs,
                     const Matrix& noise_cov) {
  const Index d = obs.response.size();
  require_dims(obs.predictor.rows() == prior.dim(),
               "kalman_update: predictor must have k rows");
  require_dims(obs.predictor.cols() == d,
               "kalman_update: linear-Gaussian case needs c = d");
  require_dims(noise_cov.rows() == d && noise_cov.cols() == d,
               "kalman_update: noise covariance must be d-by-d");

  const SignalPrediction sig = predict_signal(prior, obs.predictor);
  const Matrix q = symmetrize(noise_cov) + sig.cov;
  Eigen::SelfAdjointEigenSolver<Matrix> q_eig(q, Eigen::EigenvaluesOnly);
  const double q_min = q_eig.eigenvalues().cwiseAbs().minCoeff();
  if (q_min <= 0.0 || q_eig.eigenvalues().cwiseAbs().maxCoeff() / q_min > 1e14) {
    throw FilterError("kalman_update: Q singular");
  }
  const Matrix gain = Eigen::LDLT<Matrix>(q).solve(sig.cross_cov);  // Q^{-1} X'R
  Matrix cov = prior.cov() - sig.cross_cov.transpose() * gain;
  const Vector innovation =
      Eigen::LDLT<Matrix>(symmetrize(noise_cov))
          .solve(Vector(obs.response - sig.mean));
  Vector mean = prior.mean() + cov * (obs.predictor * innovation);
  return Belief(std::move(mean), std::move(cov), prior.step());
}

}  // namespace dglm
