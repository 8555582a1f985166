#include "dglm/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "dglm/linalg.hpp"
#include "dglm/rng.hpp"

namespace dglm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Flat key=value text: one pair per line, '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DomainError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NumericalError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DomainError("config key " + key + ": bad number '" + value + "'");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DomainError("config key " + key + ": bad integer '" + value + "'");
  }
}

std::vector<double> to_number_list(const std::string& key,
                                   const std::string& value) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    out.push_back(to_double(key, trim(item)));
  }
  if (out.empty()) throw DomainError("config key " + key + ": empty list");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Sampling factor: Cholesky when it holds, otherwise clip negative
// eigenvalues at zero first.
Matrix sampling_factor(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  return psd_cholesky(project_psd(cov), "simharness covariance");
}

class CumulativeMetrics {
 public:
  explicit CumulativeMetrics(int rounds) {
    series_.error_fraction.reserve(rounds);
    series_.regret_rate.reserve(rounds);
    series_.random_regret_rate.reserve(rounds);
  }

  void push(const RoundRecord& rec) {
    errors_ += rec.chosen_arm != rec.optimal_arm ? 1.0 : 0.0;
    regret_sum_ += rec.regret;
    random_regret_sum_ += rec.random_regret;
    const double t = static_cast<double>(rec.round);
    series_.error_fraction.push_back(errors_ / t);
    series_.regret_rate.push_back(regret_sum_ / t);
    series_.random_regret_rate.push_back(random_regret_sum_ / t);
  }

  MetricSeries take() { return std::move(series_); }

 private:
  MetricSeries series_;
  double errors_ = 0.0;
  double regret_sum_ = 0.0;
  double random_regret_sum_ = 0.0;
};

}  // namespace

Matrix sample_correlated_cov(Index dim, double rate, double corr, Rng& rng) {
  Vector variances(dim);
  for (Index i = 0; i < dim; ++i) variances[i] = rng.exponential(rate);
  const Vector sd = variances.cwiseSqrt();
  Matrix cov = corr * (sd * sd.transpose());
  cov.diagonal() = variances;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return cov;
  return project_psd(cov);
}

void SimConfig::validate() const {
  if (num_arms <= 0) throw DomainError("num_arms must be positive");
  if (rounds < 0) throw DomainError("rounds must be non-negative");
  if (repetitions <= 0) throw DomainError("repetitions must be positive");
  if (k1 < 0 || k2 < 0) throw DomainError("k1/k2 must be non-negative");
  if (drift_rate <= 0.0) throw DomainError("drift_rate must be positive");
  if (sigma_y2 <= 0.0) throw DomainError("sigma_y2 must be positive");
  if (std::abs(drift_corr) >= 1.0 || std::abs(cont_corr) >= 1.0) {
    throw DomainError("correlations must lie in (-1, 1)");
  }
  // A constant-correlation matrix of size n is PSD iff corr >= -1/(n-1).
  const Index k = param_dim();
  if (k > 1 && drift_corr < -1.0 / static_cast<double>(k - 1)) {
    throw DomainError("drift_corr incompatible with PSD at dimension " +
                      std::to_string(k));
  }
  if (k1 > 1 && cont_corr < -1.0 / static_cast<double>(k1 - 1)) {
    throw DomainError("cont_corr incompatible with PSD at k1 = " +
                      std::to_string(k1));
  }
}

SimConfig parse_config(const std::string& text) {
  SimConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "num_arms") {
      cfg.num_arms = static_cast<int>(to_int(key, value));
    } else if (key == "rounds") {
      cfg.rounds = static_cast<int>(to_int(key, value));
    } else if (key == "repetitions") {
      cfg.repetitions = static_cast<int>(to_int(key, value));
    } else if (key == "k1") {
      cfg.k1 = static_cast<int>(to_int(key, value));
    } else if (key == "k2") {
      cfg.k2 = static_cast<int>(to_int(key, value));
    } else if (key == "drift_rate") {
      cfg.drift_rate = to_double(key, value);
    } else if (key == "drift_corr") {
      cfg.drift_corr = to_double(key, value);
    } else if (key == "cont_corr") {
      cfg.cont_corr = to_double(key, value);
    } else if (key == "sigma_y2") {
      cfg.sigma_y2 = to_double(key, value);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "thompson_variant") {
      if (value == "per_arm") {
        cfg.thompson_variant = ThompsonVariant::per_arm;
      } else if (value == "shared") {
        cfg.thompson_variant = ThompsonVariant::shared;
      } else {
        throw DomainError("thompson_variant must be per_arm or shared");
      }
    } else {
      throw DomainError("unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::string& path) {
  return parse_config(read_file(path));
}

SimResult run_simulation(const SimConfig& config) {
  config.validate();
  const Index k = config.param_dim();
  const Index c = 3;  // (logit, linear, logit) response layout

  const ModelPtr model =
      make_product({make_bernoulli_logit(), make_gaussian(config.sigma_y2),
                    make_bernoulli_logit()});
  const RewardSpec reward = RewardSpec::coordinate(3, 0);

  Rng rng(config.seed);

  // Continuous-predictor covariance: unit-rate exponential variances with a
  // constant off-diagonal correlation, drawn once per repetition.
  Matrix cont_cov = Matrix::Zero(config.k1, config.k1);
  Matrix cont_factor(config.k1, config.k1);
  if (config.k1 > 0) {
    cont_cov = sample_correlated_cov(config.k1, 1.0, config.cont_corr, rng);
    cont_factor = sampling_factor(cont_cov);
  }

  // True parameters start from a zero-mean Gaussian with exponential(1)
  // variances on the diagonal; the filter starts from m0 = 0, C0 = I.
  Vector theta(k);
  for (Index i = 0; i < k; ++i) {
    theta[i] = std::sqrt(rng.exponential(1.0)) * rng.normal();
  }
  Belief belief(Vector::Zero(k), Matrix::Identity(k, k), 0);

  SimResult result;
  result.records.reserve(config.rounds);
  CumulativeMetrics metrics(config.rounds);

  for (int t = 1; t <= config.rounds; ++t) {
    // Parameter drift with a freshly sampled noise covariance.
    const Matrix w =
        sample_correlated_cov(k, config.drift_rate, config.drift_corr, rng);
    const Matrix w_factor = sampling_factor(w);
    theta += w_factor * rng.normal_vector(k);

    // Round contexts.
    ContextFactors factors;
    factors.num_arms = config.num_arms;
    factors.continuous = Matrix::Zero(config.k1, c);
    if (config.k1 > 0) {
      for (Index col = 0; col < c; ++col) {
        factors.continuous.col(col) =
            cont_factor * rng.normal_vector(config.k1);
      }
    }
    factors.categorical = Vector::Zero(config.k2);
    if (config.k2 > 0) factors.categorical[rng.uniform_int(config.k2)] = 1.0;
    factors.continuous_cov = cont_cov;

    std::vector<Matrix> contexts;
    contexts.reserve(config.num_arms);
    for (int a = 0; a < config.num_arms; ++a) {
      contexts.push_back(build_context(factors, a));
    }

    const PriorPrediction prior =
        predict(belief, DynamicsSpec::random_walk(w));

    const std::uint64_t select_seed = rng.next_u64();
    const int chosen = thompson_select(prior, contexts, *model, reward,
                                       select_seed, config.thompson_variant);

    // Observe the played arm's response under the true parameters.
    const Vector signal = contexts[chosen].transpose() * theta;
    Vector y(3);
    y[0] = rng.uniform() < sigmoid(signal[0]) ? 1.0 : 0.0;
    y[1] = signal[1] + std::sqrt(config.sigma_y2) * rng.normal();
    y[2] = rng.uniform() < sigmoid(signal[2]) ? 1.0 : 0.0;

    const RegretResult reg = regret(theta, contexts, chosen, *model, reward);
    const Vector rewards = arm_expected_rewards(theta, contexts, *model,
                                                reward);

    RoundRecord rec;
    rec.round = t;
    rec.chosen_arm = chosen;
    rec.optimal_arm = reg.optimal_arm;
    rec.regret = reg.regret;
    rec.random_regret = rewards[reg.optimal_arm] - rewards.mean();
    rec.reward = reward(y);

    try {
      belief = update(prior, Observation{contexts[chosen], y}, *model)
                   .posterior;
    } catch (const std::exception& e) {
      throw FilterError("round " + std::to_string(t) + ": " + e.what());
    }

    metrics.push(rec);
    result.records.push_back(rec);
  }

  result.metrics = metrics.take();
  return result;
}

MetricSeries aggregate_runs(const SimConfig& config) {
  config.validate();
  const int reps = config.repetitions;
  std::vector<MetricSeries> all(reps);
  std::vector<std::string> errors(reps);

  // Repetitions are independent given their derived sub-seeds; run them on
  // a small worker pool and aggregate in repetition order.
  std::atomic<int> next{0};
  const unsigned workers = std::max(
      1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                             static_cast<unsigned>(reps)));
  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < reps; i = next.fetch_add(1)) {
      SimConfig rep_config = config;
      // Repetition 0 reuses the master seed, so a single-repetition
      // aggregate reproduces run_simulation exactly.
      rep_config.seed =
          i == 0 ? config.seed
                 : Rng::derive_seed(config.seed, static_cast<std::uint64_t>(i));
      try {
        all[i] = run_simulation(rep_config).metrics;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (int i = 0; i < reps; ++i) {
    if (!errors[i].empty()) {
      throw FilterError("repetition " + std::to_string(i) + ": " + errors[i]);
    }
  }

  MetricSeries mean;
  mean.error_fraction.assign(config.rounds, 0.0);
  mean.regret_rate.assign(config.rounds, 0.0);
  mean.random_regret_rate.assign(config.rounds, 0.0);
  for (const MetricSeries& s : all) {
    for (int t = 0; t < config.rounds; ++t) {
      mean.error_fraction[t] += s.error_fraction[t] / reps;
      mean.regret_rate[t] += s.regret_rate[t] / reps;
      mean.random_regret_rate[t] += s.random_regret_rate[t] / reps;
    }
  }
  return mean;
}

void emit_csv(const MetricSeries& series,
              const std::vector<RoundRecord>& records,
              const std::string& path) {
  {
    std::ofstream out(path + ".rounds.csv", std::ios::trunc);
    if (!out) throw NumericalError("emit_csv: cannot open " + path +
                                   ".rounds.csv");
    out << "round,chosen_arm,optimal_arm,reward,regret,random_regret\n";
    for (const RoundRecord& r : records) {
      out << r.round << ',' << r.chosen_arm << ',' << r.optimal_arm << ','
          << format_double(r.reward) << ',' << format_double(r.regret) << ','
          << format_double(r.random_regret) << '\n';
    }
    if (!out) throw NumericalError("emit_csv: write failed");
  }
  {
    std::ofstream out(path + ".metrics.csv", std::ios::trunc);
    if (!out) throw NumericalError("emit_csv: cannot open " + path +
                                   ".metrics.csv");
    out << "round,error_fraction,regret_rate,random_regret_rate\n";
    for (std::size_t t = 0; t < series.error_fraction.size(); ++t) {
      out << (t + 1) << ',' << format_double(series.error_fraction[t]) << ','
          << format_double(series.regret_rate[t]) << ','
          << format_double(series.random_regret_rate[t]) << '\n';
    }
    if (!out) throw NumericalError("emit_csv: write failed");
  }
}

MetricSeries read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NumericalError("read_metrics_csv: cannot open " + path);
  MetricSeries series;
  std::string line;
  if (!std::getline(in, line)) return series;  // empty file: empty series
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) {
      cells.push_back(to_double("metrics csv", trim(cell)));
    }
    if (cells.size() != 4) {
      throw DomainError("read_metrics_csv: expected 4 columns");
    }
    series.error_fraction.push_back(cells[1]);
    series.regret_rate.push_back(cells[2]);
    series.random_regret_rate.push_back(cells[3]);
  }
  return series;
}

ModelPtr make_model(const std::string& spec) {
  const std::string s = trim(spec);
  const auto colon = s.find(':');
  const std::string head = colon == std::string::npos ? s : s.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : s.substr(colon + 1);

  if (head == "gaussian") {
    return make_gaussian(arg.empty() ? 1.0 : to_double("gaussian", arg));
  }
  if (head == "poisson") return make_poisson();
  if (head == "exponential") return make_exponential();
  if (head == "bernoulli_logit") return make_bernoulli_logit();
  if (head == "product") {
    if (arg.empty()) throw DomainError("product: needs part list");
    std::vector<ModelPtr> parts;
    std::istringstream in(arg);
    std::string part;
    while (std::getline(in, part, ',')) {
      part = trim(part);
      if (part.rfind("product", 0) == 0) {
        throw DomainError("product: nested products not supported");
      }
      parts.push_back(make_model(part));
    }
    return make_product(std::move(parts));
  }
  throw DomainError("unknown model: " + s);
}

namespace {

// Accepts "identity", a scalar (times identity), a diagonal list of length
// n, or a full row-major n*n list.
Matrix parse_square(const std::string& key, const std::string& value,
                    Index n) {
  if (value == "identity") return Matrix::Identity(n, n);
  const std::vector<double> nums = to_number_list(key, value);
  if (nums.size() == 1) return nums[0] * Matrix::Identity(n, n);
  if (nums.size() == static_cast<std::size_t>(n)) {
    Matrix m = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) m(i, i) = nums[i];
    return m;
  }
  if (nums.size() == static_cast<std::size_t>(n * n)) {
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) m(i, j) = nums[i * n + j];
    }
    return m;
  }
  throw DomainError(key + ": expected 1, " + std::to_string(n) + " or " +
                    std::to_string(n * n) + " numbers");
}

Vector parse_vector(const std::string& key, const std::string& value,
                    Index n) {
  const std::vector<double> nums = to_number_list(key, value);
  if (nums.size() == 1) return Vector::Constant(n, nums[0]);
  if (nums.size() != static_cast<std::size_t>(n)) {
    throw DomainError(key + ": expected 1 or " + std::to_string(n) +
                      " numbers");
  }
  return Eigen::Map<const Vector>(nums.data(), n);
}

}  // namespace

OfflineFilterSpec load_offline_spec(const std::string& path) {
  const auto kv = parse_key_values(read_file(path));
  const auto it = kv.find("dim");
  if (it == kv.end()) throw DomainError("dynamics file: missing dim");
  const Index k = static_cast<Index>(to_int("dim", it->second));
  if (k <= 0) throw DomainError("dynamics file: dim must be positive");

  OfflineFilterSpec spec;
  spec.transition = Matrix::Identity(k, k);
  spec.input_effect = Vector::Zero(k);
  spec.process_noise = Matrix::Zero(k, k);
  spec.initial_mean = Vector::Zero(k);
  spec.initial_cov = Matrix::Identity(k, k);
  for (const auto& [key, value] : kv) {
    if (key == "dim") {
      continue;
    } else if (key == "transition") {
      spec.transition = parse_square(key, value, k);
    } else if (key == "input") {
      spec.input_effect = parse_vector(key, value, k);
    } else if (key == "process_noise") {
      spec.process_noise = parse_square(key, value, k);
    } else if (key == "m0") {
      spec.initial_mean = parse_vector(key, value, k);
    } else if (key == "c0") {
      spec.initial_cov = parse_square(key, value, k);
    } else {
      throw DomainError("dynamics file: unknown key " + key);
    }
  }
  return spec;
}

std::vector<Observation> load_observations_csv(const std::string& path,
                                               Index response_dim,
                                               Index signal_dim,
                                               Index param_dim) {
  std::ifstream in(path);
  if (!in) throw NumericalError("cannot open " + path);
  std::vector<Observation> stream;
  std::string line;
  bool first = true;
  const std::size_t expected =
      static_cast<std::size_t>(response_dim + param_dim * signal_dim);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    bool numeric = true;
    while (std::getline(row, cell, ',')) {
      try {
        cells.push_back(to_double("data csv", trim(cell)));
      } catch (const DomainError&) {
        numeric = false;
        break;
      }
    }
    if (first && !numeric) {
      first = false;  // header line
      continue;
    }
    first = false;
    if (!numeric) throw DomainError("data csv: non-numeric row");
    if (cells.size() != expected) {
      throw DomainError("data csv: expected " + std::to_string(expected) +
                        " columns, got " + std::to_string(cells.size()));
    }
    Observation obs;
    obs.response = Eigen::Map<const Vector>(cells.data(), response_dim);
    obs.predictor.resize(param_dim, signal_dim);
    for (Index i = 0; i < param_dim; ++i) {
      for (Index j = 0; j < signal_dim; ++j) {
        obs.predictor(i, j) =
            cells[static_cast<std::size_t>(response_dim + i * signal_dim + j)];
      }
    }
    stream.push_back(std::move(obs));
  }
  return stream;
}

std::vector<Belief> run_offline_filter(const ObservationModel& model,
                                       const OfflineFilterSpec& spec,
                                       const std::vector<Observation>& stream) {
  Belief belief(spec.initial_mean, spec.initial_cov, 0);
  const DynamicsSpec dynamics(spec.transition, spec.input_effect,
                              spec.process_noise);
  std::vector<Belief> states;
  states.reserve(stream.size());
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const PriorPrediction prior = predict(belief, dynamics);
    try {
      belief = update(prior, stream[t], model).posterior;
    } catch (const std::exception& e) {
      throw FilterError("observation " + std::to_string(t + 1) + ": " +
                        e.what());
    }
    states.push_back(belief);
  }
  return states;
}

void write_states_csv(const std::vector<Belief>& states,
                      const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw NumericalError("cannot open " + path);
  const Index k = states.empty() ? 0 : states.front().dim();
  out << "step";
  for (Index i = 0; i < k; ++i) out << ",m" << (i + 1);
  for (Index i = 0; i < k; ++i) out << ",var" << (i + 1);
  out << '\n';
  for (const Belief& b : states) {
    out << b.step();
    for (Index i = 0; i < k; ++i) out << ',' << format_double(b.mean()[i]);
    for (Index i = 0; i < k; ++i) {
      out << ',' << format_double(b.cov()(i, i));
    }
    out << '\n';
  }
  if (!out) throw NumericalError("write failed for " + path);
}

}  // namespace dglm
