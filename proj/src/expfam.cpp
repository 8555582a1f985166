#include "dglm/expfam.hpp"

#include <cmath>
#include <limits>

#include "dglm/linalg.hpp"

namespace dglm {

double guarded_exp(double x) { return std::exp(std::min(x, kSignalGuard)); }

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

ObservationModel::ObservationModel(Index response_dim, Index signal_dim,
                                   Matrix nuisance, bool canonical)
    : response_dim_(response_dim),
      signal_dim_(signal_dim),
      nuisance_(std::move(nuisance)),
      canonical_(canonical) {
  require_dims(response_dim_ > 0 && signal_dim_ > 0,
               "ObservationModel: dimensions must be positive");
  require_dims(nuisance_.rows() == response_dim_ &&
                   nuisance_.cols() == response_dim_,
               "ObservationModel: nuisance must be d-by-d");
  if ((nuisance_ - nuisance_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("ObservationModel: nuisance must be symmetric");
  }
  if (canonical_) {
    require_dims(signal_dim_ == response_dim_,
                 "ObservationModel: canonical models need c == d");
  }
  nuisance_ldlt_.compute(nuisance_);
  if (nuisance_ldlt_.info() != Eigen::Success) {
    throw NumericalError("ObservationModel: nuisance factorization failed");
  }
}

Vector ObservationModel::solve_nuisance(const Vector& rhs) const {
  return nuisance_ldlt_.solve(rhs);
}

Matrix ObservationModel::solve_nuisance(const Matrix& rhs) const {
  return nuisance_ldlt_.solve(rhs);
}

void ObservationModel::validate_signal(const Vector& signal) const {
  require_dims(signal.size() == signal_dim_,
               std::string(name()) + ": signal dimension mismatch");
  const Vector floor = signal_floor();
  for (Index i = 0; i < signal.size(); ++i) {
    if (signal[i] < floor[i]) {
      throw DomainError(std::string(name()) + ": signal entry " +
                        std::to_string(i) + " = " + std::to_string(signal[i]) +
                        " below admissible minimum");
    }
  }
}

void ObservationModel::validate_response(const Vector& y) const {
  require_dims(y.size() == response_dim_,
               std::string(name()) + ": response dimension mismatch");
  validate_response_impl(y);
}

Vector ObservationModel::signal_floor() const {
  return Vector::Constant(signal_dim_,
                          -std::numeric_limits<double>::infinity());
}

double ObservationModel::log_likelihood(const Vector& y,
                                        const Vector& signal) const {
  validate_response(y);
  validate_signal(signal);
  return log_likelihood_impl(y, signal);
}

Vector ObservationModel::response_mean(const Vector& signal) const {
  validate_signal(signal);
  return response_mean_impl(signal);
}

Matrix ObservationModel::response_cov(const Vector& signal) const {
  validate_signal(signal);
  return response_cov_impl(signal);
}

SignalDerivatives ObservationModel::signal_derivatives(
    const Vector& y, const Vector& signal) const {
  if (!canonical_) {
    throw DomainError(std::string(name()) +
                      ": non-canonical models must override "
                      "signal_derivatives");
  }
  validate_response(y);
  validate_signal(signal);
  // Canonical closed forms; see class comment.
  SignalDerivatives d;
  d.gradient = solve_nuisance(Vector(y - response_mean_impl(signal)));
  const Matrix phi_inv_cov = solve_nuisance(response_cov_impl(signal));
  d.hessian = symmetrize(-solve_nuisance(Matrix(phi_inv_cov.transpose())));
  return d;
}

double ObservationModel::log_partition(const Vector& natural) const {
  require_dims(natural.size() == response_dim_,
               std::string(name()) + ": natural parameter dimension mismatch");
  return log_partition_impl(natural);
}

namespace {

class GaussianModel final : public ObservationModel {
 public:
  explicit GaussianModel(Matrix sigma)
      : ObservationModel(sigma.rows(), sigma.rows(), sigma,
                         /*canonical=*/true) {}

  const char* name() const override { return "gaussian"; }

 protected:
  double log_likelihood_impl(const Vector& y,
                             const Vector& signal) const override {
    const Vector r = y - signal;
    return -0.5 * r.dot(solve_nuisance(r));
  }

  Vector response_mean_impl(const Vector& signal) const override {
    return signal;
  }

  Matrix response_cov_impl(const Vector&) const override {
    return nuisance();  // independent of the signal
  }

  double log_partition_impl(const Vector& natural) const override {
    return 0.5 * natural.dot(solve_nuisance(natural));
  }
};

class PoissonModel final : public ObservationModel {
 public:
  PoissonModel() : ObservationModel(1, 1, Matrix::Identity(1, 1), true) {}

  const char* name() const override { return "poisson"; }

 protected:
  double log_likelihood_impl(const Vector& y,
                             const Vector& signal) const override {
    return y[0] * signal[0] - guarded_exp(signal[0]);
  }

  Vector response_mean_impl(const Vector& signal) const override {
    return Vector::Constant(1, guarded_exp(signal[0]));
  }

  Matrix response_cov_impl(const Vector& signal) const override {
    return Matrix::Constant(1, 1, guarded_exp(signal[0]));
  }

  double log_partition_impl(const Vector& natural) const override {
    return guarded_exp(natural[0]);
  }

  void validate_response_impl(const Vector& y) const override {
    if (y[0] < 0.0 || std::abs(y[0] - std::round(y[0])) > 1e-9) {
      throw DomainError("poisson: response must be a non-negative integer");
    }
  }
};

class ExponentialModel final : public ObservationModel {
 public:
  ExponentialModel()
      : ObservationModel(1, 1, -Matrix::Identity(1, 1), true) {}

  const char* name() const override { return "exponential"; }

  Vector signal_floor() const override {
    return Vector::Constant(1, kExponentialSignalMin);
  }

 protected:
  double log_likelihood_impl(const Vector& y,
                             const Vector& signal) const override {
    return -y[0] * signal[0] + std::log(signal[0]);
  }

  Vector response_mean_impl(const Vector& signal) const override {
    return Vector::Constant(1, 1.0 / signal[0]);
  }

  Matrix response_cov_impl(const Vector& signal) const override {
    return Matrix::Constant(1, 1, 1.0 / (signal[0] * signal[0]));
  }

  double log_partition_impl(const Vector& natural) const override {
    if (natural[0] < kExponentialSignalMin) {
      throw DomainError("exponential: natural parameter must be positive");
    }
    return -std::log(natural[0]);
  }

  void validate_response_impl(const Vector& y) const override {
    if (y[0] < 0.0) {
      throw DomainError("exponential: response must be non-negative");
    }
  }
};

class BernoulliLogitModel final : public ObservationModel {
 public:
  BernoulliLogitModel()
      : ObservationModel(1, 1, Matrix::Identity(1, 1), true) {}

  const char* name() const override { return "bernoulli_logit"; }

 protected:
  double log_likelihood_impl(const Vector& y,
                             const Vector& signal) const override {
    return y[0] * signal[0] - softplus(signal[0]);
  }

  Vector response_mean_impl(const Vector& signal) const override {
    return Vector::Constant(1, sigmoid(signal[0]));
  }

  Matrix response_cov_impl(const Vector& signal) const override {
    const double p = sigmoid(signal[0]);
    return Matrix::Constant(1, 1, p * (1.0 - p));
  }

  double log_partition_impl(const Vector& natural) const override {
    return softplus(natural[0]);
  }

  void validate_response_impl(const Vector& y) const override {
    if (y[0] != 0.0 && y[0] != 1.0) {
      throw DomainError("bernoulli_logit: response must be 0 or 1");
    }
  }
};

Matrix block_diagonal_nuisance(const std::vector<ModelPtr>& parts,
                               Index total_d) {
  Matrix phi = Matrix::Zero(total_d, total_d);
  Index at = 0;
  for (const auto& part : parts) {
    const Index d = part->response_dim();
    phi.block(at, at, d, d) = part->nuisance();
    at += d;
  }
  return phi;
}

class ProductModel final : public ObservationModel {
 public:
  ProductModel(std::vector<ModelPtr> parts, std::vector<Index> offsets,
               Index total_c, Index total_d, bool canonical)
      : ObservationModel(total_d, total_c,
                         block_diagonal_nuisance(parts, total_d), canonical),
        parts_(std::move(parts)),
        signal_offsets_(std::move(offsets)) {
    Index at = 0;
    for (const auto& part : parts_) {
      response_offsets_.push_back(at);
      at += part->response_dim();
    }
  }

  const char* name() const override { return "product"; }

  Vector signal_floor() const override {
    Vector floor = Vector::Constant(
        signal_dim(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      floor.segment(signal_offsets_[i], parts_[i]->signal_dim()) =
          parts_[i]->signal_floor();
    }
    return floor;
  }

  SignalDerivatives signal_derivatives(const Vector& y,
                                       const Vector& signal) const override {
    validate_response(y);
    validate_signal(signal);
    SignalDerivatives d;
    d.gradient = Vector::Zero(signal_dim());
    d.hessian = Matrix::Zero(signal_dim(), signal_dim());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Index c = parts_[i]->signal_dim();
      const SignalDerivatives part = parts_[i]->signal_derivatives(
          part_response(y, i), signal.segment(signal_offsets_[i], c));
      d.gradient.segment(signal_offsets_[i], c) = part.gradient;
      d.hessian.block(signal_offsets_[i], signal_offsets_[i], c, c) =
          part.hessian;
    }
    return d;
  }

 protected:
  double log_likelihood_impl(const Vector& y,
                             const Vector& signal) const override {
    double total = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      total += parts_[i]->log_likelihood(
          part_response(y, i),
          signal.segment(signal_offsets_[i], parts_[i]->signal_dim()));
    }
    return total;
  }

  Vector response_mean_impl(const Vector& signal) const override {
    Vector mean(response_dim());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      mean.segment(response_offsets_[i], parts_[i]->response_dim()) =
          parts_[i]->response_mean(
              signal.segment(signal_offsets_[i], parts_[i]->signal_dim()));
    }
    return mean;
  }

  Matrix response_cov_impl(const Vector& signal) const override {
    Matrix cov = Matrix::Zero(response_dim(), response_dim());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Index d = parts_[i]->response_dim();
      cov.block(response_offsets_[i], response_offsets_[i], d, d) =
          parts_[i]->response_cov(
              signal.segment(signal_offsets_[i], parts_[i]->signal_dim()));
    }
    return cov;
  }

  double log_partition_impl(const Vector& natural) const override {
    double total = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      total += parts_[i]->log_partition(part_response(natural, i));
    }
    return total;
  }

  void validate_response_impl(const Vector& y) const override {
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      parts_[i]->validate_response(part_response(y, i));
    }
  }

 private:
  Vector part_response(const Vector& y, std::size_t i) const {
    return y.segment(response_offsets_[i], parts_[i]->response_dim());
  }

  std::vector<ModelPtr> parts_;
  std::vector<Index> signal_offsets_;
  std::vector<Index> response_offsets_;
};

}  // namespace

ModelPtr make_gaussian(double sigma2) {
  if (sigma2 <= 0.0) throw DomainError("gaussian: sigma2 must be positive");
  return std::make_shared<GaussianModel>(Matrix::Constant(1, 1, sigma2));
}

ModelPtr make_gaussian(const Matrix& sigma) {
  if (smallest_eigenvalue(symmetrize(sigma)) <= 0.0) {
    throw DomainError("gaussian: covariance must be positive definite");
  }
  return std::make_shared<GaussianModel>(symmetrize(sigma));
}

ModelPtr make_poisson() { return std::make_shared<PoissonModel>(); }

ModelPtr make_exponential() { return std::make_shared<ExponentialModel>(); }

ModelPtr make_bernoulli_logit() {
  return std::make_shared<BernoulliLogitModel>();
}

ModelPtr make_product(std::vector<ModelPtr> parts) {
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& part : parts) {
    offsets.push_back(at);
    at += part->signal_dim();
  }
  return make_product(std::move(parts), std::move(offsets));
}

ModelPtr make_product(std::vector<ModelPtr> parts,
                      std::vector<Index> offsets) {
  if (parts.empty()) throw DomainError("product: needs at least one part");
  require_dims(parts.size() == offsets.size(),
               "product: one offset per part required");
  Index total_c = 0;
  Index total_d = 0;
  for (const auto& part : parts) {
    total_c += part->signal_dim();
    total_d += part->response_dim();
  }
  // Slices must partition [0, total_c) exactly.
  std::vector<bool> covered(static_cast<std::size_t>(total_c), false);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Index begin = offsets[i];
    const Index end = begin + parts[i]->signal_dim();
    if (begin < 0 || end > total_c) {
      throw DomainError("product: signal slice out of range");
    }
    for (Index j = begin; j < end; ++j) {
      if (covered[static_cast<std::size_t>(j)]) {
        throw DomainError("product: overlapping signal slices");
      }
      covered[static_cast<std::size_t>(j)] = true;
    }
  }
  bool canonical = total_c == total_d;
  Index expected = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    canonical = canonical && parts[i]->canonical() && offsets[i] == expected;
    expected += parts[i]->signal_dim();
  }
  return std::make_shared<ProductModel>(std::move(parts), std::move(offsets),
                                        total_c, total_d, canonical);
}

}  // namespace dglm
