#include "dglm/statespace.hpp"

#include <cstring>
#include <fstream>

#include "dglm/linalg.hpp"

namespace dglm {

Belief::Belief(Vector mean, Matrix cov, std::int64_t step)
    : mean_(std::move(mean)), step_(step) {
  require_dims(cov.rows() == mean_.size() && cov.cols() == mean_.size(),
               "Belief: covariance shape must match mean");
  cov_ = ensure_psd(cov, "Belief");
}

PriorPrediction::PriorPrediction(Vector mean, Matrix cov, std::int64_t step)
    : mean_(std::move(mean)), step_(step) {
  require_dims(cov.rows() == mean_.size() && cov.cols() == mean_.size(),
               "PriorPrediction: covariance shape must match mean");
  cov_ = ensure_psd(cov, "PriorPrediction");
}

DynamicsSpec::DynamicsSpec(Matrix transition, Vector input_effect,
                           Matrix process_noise)
    : transition_(std::move(transition)),
      input_effect_(std::move(input_effect)) {
  const Index k = input_effect_.size();
  require_dims(transition_.rows() == k && transition_.cols() == k,
               "DynamicsSpec: transition must be k-by-k");
  require_dims(process_noise.rows() == k && process_noise.cols() == k,
               "DynamicsSpec: process noise must be k-by-k");
  process_noise_ = ensure_psd(process_noise, "DynamicsSpec");
}

DynamicsSpec DynamicsSpec::random_walk(Matrix process_noise) {
  const Index k = process_noise.rows();
  return DynamicsSpec(Matrix::Identity(k, k), Vector::Zero(k),
                      std::move(process_noise));
}

DynamicsSpec DynamicsSpec::static_parameters(Index dim) {
  return DynamicsSpec(Matrix::Identity(dim, dim), Vector::Zero(dim),
                      Matrix::Zero(dim, dim));
}

PriorPrediction predict(const Belief& belief, const DynamicsSpec& dynamics) {
  require_dims(dynamics.dim() == belief.dim(),
               "predict: dynamics dimension must match belief");
  Vector mean = dynamics.transition() * belief.mean() + dynamics.input_effect();
  Matrix cov = dynamics.transition() * belief.cov() *
                   dynamics.transition().transpose() +
               dynamics.process_noise();
  return PriorPrediction(std::move(mean), std::move(cov), belief.step() + 1);
}

SignalPrediction predict_signal(const PriorPrediction& prior,
                                const Matrix& predictor) {
  require_dims(predictor.rows() == prior.dim(),
               "predict_signal: predictor must have k rows");
  SignalPrediction s;
  s.mean = predictor.transpose() * prior.mean();
  s.cross_cov = predictor.transpose() * prior.cov();
  s.cov = symmetrize(s.cross_cov * predictor);
  return s;
}

namespace {

void append_le64(std::vector<std::uint8_t>& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

double read_le64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  double value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

}  // namespace

std::vector<std::uint8_t> serialize_belief(const Belief& belief) {
  const Index k = belief.dim();
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(8 * (k + k * (k + 1) / 2)));
  for (Index i = 0; i < k; ++i) append_le64(out, belief.mean()[i]);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j <= i; ++j) append_le64(out, belief.cov()(i, j));
  }
  return out;
}

Belief deserialize_belief(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 8 != 0) {
    throw NumericalError("deserialize_belief: byte count not a multiple of 8");
  }
  const std::size_t n = bytes.size() / 8;
  // n = k + k(k+1)/2 = k(k+3)/2 must hold for some integer k.
  Index k = 0;
  while (static_cast<std::size_t>(k * (k + 3) / 2) < n) ++k;
  if (k == 0 || static_cast<std::size_t>(k * (k + 3) / 2) != n) {
    throw NumericalError("deserialize_belief: malformed payload size");
  }
  Vector mean(k);
  const std::uint8_t* p = bytes.data();
  for (Index i = 0; i < k; ++i, p += 8) mean[i] = read_le64(p);
  Matrix cov(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j <= i; ++j, p += 8) {
      cov(i, j) = read_le64(p);
      cov(j, i) = cov(i, j);
    }
  }
  return Belief(std::move(mean), std::move(cov));
}

void save_belief(const Belief& belief, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NumericalError("save_belief: cannot open " + path);
  const auto bytes = serialize_belief(belief);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw NumericalError("save_belief: write failed for " + path);
}

Belief load_belief(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericalError("load_belief: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_belief(bytes);
}

}  // namespace dglm
