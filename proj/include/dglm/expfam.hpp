#pragma once

#include <memory>
#include <vector>

#include "dglm/core.hpp"

namespace dglm {

/// Derivatives of a log-likelihood with respect to the signal at one
/// (response, signal) point. The Hessian is symmetric; for every canonical
/// model shipped here it is also negative semidefinite.
struct SignalDerivatives {
  Vector gradient;  // d l / d lambda,  c-vector
  Matrix hessian;   // d^2 l / d lambda^2,  c-by-c
};

/// Contract for a response distribution driven by a linear signal:
/// log-likelihood and its first two signal-derivatives, the response mean
/// h(lambda) and covariance, and the log-partition b(eta) of the natural
/// exponential form. Instances are immutable after construction and all
/// operations are pure, so models can be shared freely across threads.
///
/// For canonical models (natural parameter equal to the signal) the
/// derivatives collapse to closed forms evaluated by the base class:
///   gradient = Phi^{-1} (y - h(lambda))
///   hessian  = -Phi^{-1} Sigma_y(lambda) Phi^{-1}
/// Non-canonical models must override signal_derivatives.
class ObservationModel {
 public:
  virtual ~ObservationModel() = default;

  Index response_dim() const { return response_dim_; }
  Index signal_dim() const { return signal_dim_; }
  const Matrix& nuisance() const { return nuisance_; }
  bool canonical() const { return canonical_; }
  virtual const char* name() const = 0;

  /// Log-likelihood up to the model's documented y-only additive constant.
  /// Throws DomainError for signals outside the admissible domain or
  /// responses outside the support.
  double log_likelihood(const Vector& y, const Vector& signal) const;

  /// Response mean h(lambda).
  Vector response_mean(const Vector& signal) const;

  /// Response covariance Sigma_y(lambda); symmetric PSD.
  Matrix response_cov(const Vector& signal) const;

  /// Gradient and Hessian of log_likelihood at (y, signal). Canonical
  /// models use the closed forms above; never numeric differentiation.
  virtual SignalDerivatives signal_derivatives(const Vector& y,
                                               const Vector& signal) const;

  /// Log-partition b(eta) of the natural exponential form, as a function of
  /// the natural parameter. Used by moment-identity checks.
  double log_partition(const Vector& natural) const;

  /// Per-entry lower bounds of the admissible signal domain; -infinity for
  /// unconstrained entries.
  virtual Vector signal_floor() const;

  /// Throws DomainError when y is outside the support.
  void validate_response(const Vector& y) const;

  /// Throws DomainError when the signal violates the admissible domain.
  void validate_signal(const Vector& signal) const;

 protected:
  ObservationModel(Index response_dim, Index signal_dim, Matrix nuisance,
                   bool canonical);

  virtual double log_likelihood_impl(const Vector& y,
                                     const Vector& signal) const = 0;
  virtual Vector response_mean_impl(const Vector& signal) const = 0;
  virtual Matrix response_cov_impl(const Vector& signal) const = 0;
  virtual double log_partition_impl(const Vector& natural) const = 0;
  virtual void validate_response_impl(const Vector&) const {}

  /// Solves Phi z = rhs against the factorization cached at construction.
  Vector solve_nuisance(const Vector& rhs) const;
  Matrix solve_nuisance(const Matrix& rhs) const;

 private:
  Index response_dim_;
  Index signal_dim_;
  Matrix nuisance_;
  bool canonical_;
  Eigen::LDLT<Matrix> nuisance_ldlt_;
};

using ModelPtr = std::shared_ptr<const ObservationModel>;

/// y ~ N(lambda, sigma2). Drops the -log(2 pi sigma2)/2 constant.
ModelPtr make_gaussian(double sigma2 = 1.0);

/// y ~ N(lambda, Sigma) with known Sigma. Drops log-det and 2 pi constants.
ModelPtr make_gaussian(const Matrix& sigma);

/// Count response with mean exp(lambda). Drops -log(y!). The exponential is
/// saturated at lambda = 30 so large predicted signals degrade gracefully
/// instead of overflowing.
ModelPtr make_poisson();

/// Non-negative response with mean 1/lambda; requires lambda >= 1e-8.
/// Nuisance is the scalar -1.
ModelPtr make_exponential();

/// Bernoulli response through the logistic response function.
ModelPtr make_bernoulli_logit();

/// Composite of independent parts: log-likelihood sums, nuisance and Hessian
/// are block-diagonal, gradient concatenates. `offsets[i]` places part i's
/// signal slice; by default parts take consecutive slices in order. Offsets
/// must partition the composite signal exactly (no gaps, no overlaps).
ModelPtr make_product(std::vector<ModelPtr> parts);
ModelPtr make_product(std::vector<ModelPtr> parts, std::vector<Index> offsets);

// Saturating guards shared by the models: exp saturates above
// kSignalGuard, and the sigmoid/softplus pair is evaluated in the
// numerically stable branch-wise forms.
inline constexpr double kSignalGuard = 30.0;
double guarded_exp(double x);
double sigmoid(double x);
double softplus(double x);

/// Smallest admissible signal for the exponential model.
inline constexpr double kExponentialSignalMin = 1e-8;

}  // namespace dglm
