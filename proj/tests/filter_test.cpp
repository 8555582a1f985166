#include "dglm/filter.hpp"

#include <doctest.h>

#include <cmath>

#include "dglm/linalg.hpp"
#include "dglm/rng.hpp"
#include "oracles.hpp"

using namespace dglm;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  return Matrix::NullaryExpr(
      rows, cols, [&](Index, Index) { return scale * rng.normal(); });
}

Matrix random_psd(Index n, Rng& rng, double scale = 1.0) {
  const Matrix a = random_matrix(n, n, rng, scale);
  return Matrix(a * a.transpose() + 0.05 * Matrix::Identity(n, n));
}

PriorPrediction random_prior(Index k, Rng& rng, double scale = 0.6) {
  return PriorPrediction(scale * rng.normal_vector(k),
                         random_psd(k, rng, scale));
}

// Response in the model's support near the given predicted signal.
Vector random_response(const ObservationModel& model, const Vector& signal,
                       Rng& rng) {
  const std::string name = model.name();
  if (name == "poisson") return scalar(std::floor(rng.uniform() * 6.0));
  if (name == "exponential") {
    return scalar(rng.exponential(std::max(signal[0], 0.2)));
  }
  if (name == "bernoulli_logit") {
    return scalar(rng.uniform() < 0.5 ? 0.0 : 1.0);
  }
  if (name == "product") {
    Vector y(3);
    y << (rng.uniform() < 0.5 ? 0.0 : 1.0), signal[1] + rng.normal(),
        (rng.uniform() < 0.5 ? 0.0 : 1.0);
    return y;
  }
  return signal + rng.normal_vector(model.response_dim());
}

// Flat likelihood: zero gradient and Hessian everywhere. The textbook path
// cannot invert the Hessian factor here; the other paths must degrade to
// posterior = prior.
class FlatModel final : public ObservationModel {
 public:
  FlatModel() : ObservationModel(1, 1, Matrix::Identity(1, 1), true) {}
  const char* name() const override { return "flat"; }

 protected:
  double log_likelihood_impl(const Vector&, const Vector&) const override {
    return 0.0;
  }
  Vector response_mean_impl(const Vector&) const override {
    return Vector::Zero(1);
  }
  Matrix response_cov_impl(const Vector&) const override {
    return Matrix::Zero(1, 1);
  }
  double log_partition_impl(const Vector&) const override { return 0.0; }
};

// Malformed on purpose: positive Hessian (convex log-likelihood).
class ConvexModel final : public ObservationModel {
 public:
  explicit ConvexModel(double curvature)
      : ObservationModel(1, 1, Matrix::Identity(1, 1), true),
        curvature_(curvature) {}
  const char* name() const override { return "convex"; }

  SignalDerivatives signal_derivatives(const Vector&,
                                       const Vector&) const override {
    return SignalDerivatives{Vector::Zero(1),
                             Matrix::Constant(1, 1, curvature_)};
  }

 protected:
  double log_likelihood_impl(const Vector&, const Vector& s) const override {
    return 0.5 * curvature_ * s[0] * s[0];
  }
  Vector response_mean_impl(const Vector&) const override {
    return Vector::Zero(1);
  }
  Matrix response_cov_impl(const Vector&) const override {
    return Matrix::Zero(1, 1);
  }
  double log_partition_impl(const Vector&) const override { return 0.0; }

 private:
  double curvature_;
};

}  // namespace

TEST_CASE("zero predictor carries no information") {
  Rng rng(21);
  const std::vector<ModelPtr> models = {make_gaussian(1.5), make_poisson(),
                                        make_exponential(),
                                        make_bernoulli_logit()};
  for (const ModelPtr& model : models) {
    CAPTURE(model->name());
    const PriorPrediction prior = random_prior(4, rng);
    const Observation obs{Matrix::Zero(4, 1),
                          random_response(*model, scalar(0.5), rng)};
    for (const auto& result :
         {update(prior, obs, *model), update_stable(prior, obs, *model),
          update_univariate(prior, Vector::Zero(4), obs.response[0],
                            *model)}) {
      CHECK((result.posterior.mean() - prior.mean()).cwiseAbs().maxCoeff() <=
            1e-12);
      CHECK((result.posterior.cov() - prior.cov()).cwiseAbs().maxCoeff() <=
            1e-12);
    }
  }
}

TEST_CASE("scalar conjugate Gaussian posterior") {
  // Prior N(0, 1), unit-noise observation y = 1 at x = 1: the conjugate
  // posterior is N(0.5, 0.5).
  const ModelPtr model = make_gaussian(1.0);
  const PriorPrediction prior(Vector::Zero(1), Matrix::Identity(1, 1));
  const Observation obs{Matrix::Identity(1, 1), scalar(1.0)};
  for (const auto& result :
       {update(prior, obs, *model), update_stable(prior, obs, *model),
        update_univariate(prior, Vector::Ones(1), 1.0, *model)}) {
    CHECK(result.posterior.mean()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(result.posterior.cov()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  const Belief kalman = kalman_update(prior, obs, Matrix::Identity(1, 1));
  CHECK(kalman.mean()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kalman.cov()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("posterior tracks dense grid quadrature (logistic, k = 2)") {
  const ModelPtr model = make_bernoulli_logit();
  Vector a(2);
  a << 0.2, -0.3;
  Matrix r(2, 2);
  r << 0.5, 0.1, 0.1, 0.4;
  Matrix x(2, 1);
  x << 0.8, -0.6;
  const Observation obs{x, scalar(1.0)};
  const PriorPrediction prior(a, r);

  const UpdateResult result = update(prior, obs, *model);
  const oracles::PosteriorMoments truth =
      oracles::grid_posterior(a, r, x, obs.response, *model);

  for (Index i = 0; i < 2; ++i) {
    CHECK(std::abs(result.posterior.mean()[i] - truth.mean[i]) <= 0.05);
    const double sd = std::sqrt(result.posterior.cov()(i, i));
    const double sd_truth = std::sqrt(truth.cov(i, i));
    CHECK(std::abs(sd - sd_truth) <= 0.2 * sd_truth);
  }
}

TEST_CASE("all update paths agree on well-conditioned instances") {
  Rng rng(22);
  Matrix sigma(2, 2);
  sigma << 1.3, -0.3, -0.3, 0.9;
  const std::vector<ModelPtr> models = {
      make_gaussian(1.2),  make_gaussian(sigma),
      make_poisson(),      make_exponential(),
      make_bernoulli_logit(),
      make_product({make_bernoulli_logit(), make_gaussian(1.0),
                    make_bernoulli_logit()})};
  for (const ModelPtr& model : models) {
    CAPTURE(model->name());
    const bool scalar_case =
        model->signal_dim() == 1 && model->response_dim() == 1;
    for (int trial = 0; trial < 17; ++trial) {
      const Index k = 3;
      const PriorPrediction prior = random_prior(k, rng);
      Matrix x = random_matrix(k, model->signal_dim(), rng, 0.5);
      if (std::string(model->name()) == "exponential") {
        x = x.cwiseAbs();
        if ((x.transpose() * prior.mean())(0) < 0.05) x = -x;
      }
      const Vector f = x.transpose() * prior.mean();
      const Observation obs{x, random_response(*model, f, rng)};
      const UpdateResult naive = update_naive(prior, obs, *model);
      const UpdateResult stable = update_stable(prior, obs, *model);
      CHECK((naive.posterior.mean() - stable.posterior.mean())
                .cwiseAbs()
                .maxCoeff() <= 1e-8);
      CHECK((naive.posterior.cov() - stable.posterior.cov())
                .cwiseAbs()
                .maxCoeff() <= 1e-8);
      if (scalar_case) {
        const UpdateResult fast =
            update_univariate(prior, Vector(x.col(0)), obs.response[0],
                              *model);
        CHECK((fast.posterior.mean() - naive.posterior.mean())
                  .cwiseAbs()
                  .maxCoeff() <= 1e-8);
        CHECK((fast.posterior.cov() - naive.posterior.cov())
                  .cwiseAbs()
                  .maxCoeff() <= 1e-8);
      }
    }
  }
}

TEST_CASE("near-singular Hessian engages the stable path and contracts") {
  // Logistic at f = 30: the response variance is ~1e-13, so the textbook
  // Hessian inverse is essentially singular.
  const ModelPtr model = make_bernoulli_logit();
  Vector a(2);
  a << 30.0, 0.0;
  Matrix r(2, 2);
  r << 1.0, 0.2, 0.2, 0.8;
  Matrix x(2, 1);
  x << 1.0, 0.0;
  const PriorPrediction prior(a, r);
  const Observation obs{x, scalar(1.0)};

  const UpdateResult result = update(prior, obs, *model);
  CHECK(result.diagnostics.stabilized);
  CHECK(smallest_eigenvalue(Matrix(r - result.posterior.cov())) >= -1e-10);
  // Flat-likelihood limit: posterior barely moves from the prior.
  CHECK((result.posterior.cov() - r).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("multivariate Gaussian updates equal the Kalman step") {
  Rng rng(23);
  Matrix sigma(2, 2);
  sigma << 1.0, 0.3, 0.3, 2.0;
  const ModelPtr model = make_gaussian(sigma);
  for (int trial = 0; trial < 20; ++trial) {
    const Index k = 4;
    const PriorPrediction prior = random_prior(k, rng);
    const Matrix x = random_matrix(k, 2, rng, 0.7);
    const Vector f = x.transpose() * prior.mean();
    const Observation obs{x, Vector(f + rng.normal_vector(2))};

    const Belief kalman = kalman_update(prior, obs, sigma);
    for (const auto& result :
         {update(prior, obs, *model), update_stable(prior, obs, *model)}) {
      CHECK((result.posterior.mean() - kalman.mean()).cwiseAbs().maxCoeff() <=
            1e-10);
      CHECK((result.posterior.cov() - kalman.cov()).cwiseAbs().maxCoeff() <=
            1e-10);
    }
  }
}

TEST_CASE("univariate fast path matches the general path") {
  Rng rng(24);
  const std::vector<ModelPtr> models = {make_gaussian(0.8), make_poisson(),
                                        make_exponential(),
                                        make_bernoulli_logit()};
  for (const ModelPtr& model : models) {
    CAPTURE(model->name());
    for (int trial = 0; trial < 25; ++trial) {
      const Index k = 3;
      const PriorPrediction prior = random_prior(k, rng);
      Vector x = rng.normal_vector(k) * 0.5;
      if (std::string(model->name()) == "exponential") {
        // Keep the predicted signal inside the admissible domain.
        x = x.cwiseAbs();
        if (x.dot(prior.mean()) < 0.05) x = -x;
      }
      const double f = x.dot(prior.mean());
      const double y = random_response(*model, scalar(f), rng)[0];

      const UpdateResult fast = update_univariate(prior, x, y, *model);
      const UpdateResult general =
          update(prior, Observation{Matrix(x), scalar(y)}, *model);
      CHECK((fast.posterior.mean() - general.posterior.mean())
                .cwiseAbs()
                .maxCoeff() <= 1e-10);
      CHECK((fast.posterior.cov() - general.posterior.cov())
                .cwiseAbs()
                .maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("univariate Poisson gain matches the closed form") {
  // At f = 0 the covariance correction weight is e^f / (1 + e^f x'Rx) =
  // 1 / (1 + x'Rx).
  const ModelPtr model = make_poisson();
  Rng rng(25);
  const Index k = 3;
  Vector a = rng.normal_vector(k);
  Vector x = rng.normal_vector(k);
  a -= x * (x.dot(a) / x.dot(x));  // force f = x'a = 0
  const Matrix r = random_psd(k, rng);
  const PriorPrediction prior(a, r);

  const UpdateResult result = update_univariate(prior, x, 2.0, *model);
  const Vector rx = r * x;
  const double weight = 1.0 / (1.0 + x.dot(rx));
  const Matrix expected_cov = r - weight * (rx * rx.transpose());
  CHECK((result.posterior.cov() - expected_cov).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("exponential update is negatively proportional to the error") {
  const ModelPtr model = make_exponential();
  Vector a(2);
  a << 1.0, 0.5;
  Matrix r(2, 2);
  r << 0.3, 0.05, 0.05, 0.2;
  Vector x(2);
  x << 1.0, 1.0;  // f = 1.5
  const PriorPrediction prior(a, r);
  const double f = x.dot(a);
  const double y = 2.0;  // y > 1/f: over-shooting response

  const UpdateResult result = update_univariate(prior, x, y, *model);
  // m = a - C x (y - 1/f), evaluated directly.
  const Vector expected_mean =
      a - result.posterior.cov() * x * (y - 1.0 / f);
  CHECK((result.posterior.mean() - expected_mean).cwiseAbs().maxCoeff() <=
        1e-12);
  // The error is positive, so the mean decreases along C x.
  const Vector direction = result.posterior.cov() * x;
  CHECK((result.posterior.mean() - a).dot(direction) < 0.0);
}

TEST_CASE("kalman_update limits and batch equivalence") {
  Rng rng(26);

  SUBCASE("uninformative observation leaves the prior in place") {
    const PriorPrediction prior = random_prior(3, rng, 1.0);
    const Matrix x = random_matrix(3, 2, rng);
    const Observation obs{x, rng.normal_vector(2)};
    const Belief post =
        kalman_update(prior, obs, Matrix(1e12 * Matrix::Identity(2, 2)));
    CHECK((post.mean() - prior.mean()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((post.cov() - prior.cov()).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("recursive filtering equals the batch conjugate posterior") {
    const Index k = 3;
    Matrix sigma(2, 2);
    sigma << 0.9, -0.2, -0.2, 1.4;
    const Vector m0 = rng.normal_vector(k);
    const Matrix c0 = random_psd(k, rng);

    std::vector<Observation> stream;
    Belief belief(m0, c0, 0);
    const DynamicsSpec statics = DynamicsSpec::static_parameters(k);
    for (int t = 0; t < 50; ++t) {
      const Matrix x = random_matrix(k, 2, rng, 0.6);
      stream.push_back({x, rng.normal_vector(2)});
      belief = kalman_update(predict(belief, statics), stream.back(), sigma);
    }
    const oracles::PosteriorMoments batch =
        oracles::batch_gaussian_posterior(m0, c0, stream, sigma);
    CHECK((belief.mean() - batch.mean).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((belief.cov() - batch.cov).cwiseAbs().maxCoeff() <= 1e-8);
  }

  SUBCASE("scalar case matches hand-coded formulas") {
    for (int trial = 0; trial < 10; ++trial) {
      const double a = rng.normal();
      const double r = 0.2 + rng.uniform();
      const double x0 = rng.normal();
      const double s2 = 0.3 + rng.uniform();
      const double y = rng.normal();

      const double q = s2 + x0 * r * x0;
      const double c = r - r * x0 * x0 * r / q;
      const double m = a + c * x0 * (y - x0 * a) / s2;

      const Belief post = kalman_update(
          PriorPrediction(scalar(a), Matrix::Constant(1, 1, r)),
          Observation{Matrix::Constant(1, 1, x0), scalar(y)},
          Matrix::Constant(1, 1, s2));
      CHECK(post.mean()[0] == doctest::Approx(m).epsilon(1e-12));
      CHECK(post.cov()(0, 0) == doctest::Approx(c).epsilon(1e-12));
    }
  }
}

TEST_CASE("posterior covariance contracts in the Loewner order") {
  Rng rng(27);
  const std::vector<ModelPtr> models = {
      make_gaussian(1.0), make_poisson(), make_exponential(),
      make_bernoulli_logit(),
      make_product({make_bernoulli_logit(), make_gaussian(1.0),
                    make_bernoulli_logit()})};
  for (const ModelPtr& model : models) {
    CAPTURE(model->name());
    for (int trial = 0; trial < 20; ++trial) {
      const Index k = 4;
      const PriorPrediction prior = random_prior(k, rng);
      const Matrix x = random_matrix(k, model->signal_dim(), rng, 0.5);
      const Vector f = x.transpose() * prior.mean();
      const Observation obs{x, random_response(*model, f, rng)};
      const UpdateResult result = update(prior, obs, *model);
      CHECK(smallest_eigenvalue(Matrix(prior.cov() - result.posterior.cov())) >=
            -1e-10);
      CHECK((result.posterior.cov() -
             result.posterior.cov().transpose()).cwiseAbs().maxCoeff() <=
            1e-12);
    }
  }
}

TEST_CASE("flat likelihood: textbook path fails, others degrade gracefully") {
  const FlatModel flat;
  Rng rng(28);
  const PriorPrediction prior = random_prior(2, rng);
  Matrix x(2, 1);
  x << 0.5, -1.0;
  const Observation obs{x, scalar(0.0)};

  CHECK_THROWS_AS(update_naive(prior, obs, flat), FilterError);

  const UpdateResult dispatched = update(prior, obs, flat);
  CHECK(dispatched.diagnostics.stabilized);
  CHECK((dispatched.posterior.cov() - prior.cov()).cwiseAbs().maxCoeff() <=
        1e-12);

  const UpdateResult fast =
      update_univariate(prior, Vector(x.col(0)), 0.0, flat);
  CHECK((fast.posterior.cov() - prior.cov()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("malformed convex models are rejected with filter errors") {
  Rng rng(29);
  const PriorPrediction prior(Vector::Zero(1), Matrix::Identity(1, 1));
  Matrix x(1, 1);
  x << 1.0;

  // S = -H = -1 and Omega = 1 make Q = S^{-1} + Omega exactly singular.
  const ConvexModel unit_convex(1.0);
  CHECK_THROWS_AS(update_naive(prior, Observation{x, scalar(0.0)}, unit_convex),
                  FilterError);

  // Positive Hessian of 2 with x'Rx = 1 drives the univariate gain
  // denominator to -1.
  const ConvexModel strong_convex(2.0);
  CHECK_THROWS_AS(update_univariate(prior, Vector::Ones(1), 0.0, strong_convex),
                  FilterError);

  // S Omega = -1 makes the stable path's inner matrix I + S Omega exactly
  // singular.
  CHECK_THROWS_AS(
      update_stable(prior, Observation{x, scalar(0.0)}, unit_convex),
      FilterError);
}

TEST_CASE("exponential signal clamp engages below the domain floor") {
  const ModelPtr model = make_exponential();
  Vector a(2);
  a << -1.0, 0.2;  // f = x'a < 0 without the clamp
  Matrix r = 0.2 * Matrix::Identity(2, 2);
  Vector x(2);
  x << 1.0, 0.0;
  const PriorPrediction prior(a, r);

  const UpdateResult result = update_univariate(prior, x, 0.7, *model);
  CHECK(result.diagnostics.stabilized);
  CHECK(result.diagnostics.predicted_signal[0] ==
        doctest::Approx(kFilterSignalFloor));

  const UpdateResult general =
      update(prior, Observation{Matrix(x), scalar(0.7)}, *model);
  CHECK(general.diagnostics.stabilized);
  CHECK((general.posterior.mean() - result.posterior.mean())
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
}

TEST_CASE("responses outside the support are rejected") {
  const ModelPtr model = make_poisson();
  const PriorPrediction prior(Vector::Zero(2), Matrix::Identity(2, 2));
  Matrix x(2, 1);
  x << 1.0, 0.5;
  CHECK_THROWS_AS(update(prior, Observation{x, scalar(-1.0)}, *model),
                  DomainError);
  CHECK_THROWS_AS(update(prior, Observation{x, scalar(2.5)}, *model),
                  DomainError);
}
