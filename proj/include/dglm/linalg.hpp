#pragma once

#include "dglm/core.hpp"

namespace dglm {

// Covariance hygiene thresholds shared across modules. Violations of the
// smallest eigenvalue worse than kPsdHardLimit are treated as bugs, smaller
// ones as accumulated round-off that diagonal jitter may repair.
inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kPsdHardLimit = 1e-8;
inline constexpr double kPsdJitter = 1e-10;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double smallest_eigenvalue(const Matrix& sym);

/// Symmetrizes `cov` and enforces smallest eigenvalue >= -kPsdTolerance.
/// Violations below kPsdHardLimit are repaired by adding diagonal jitter,
/// starting at kPsdJitter and escalating tenfold until the check passes;
/// larger violations throw NumericalError tagged with `context`.
Matrix ensure_psd(const Matrix& cov, const std::string& context);

/// Lower Cholesky factor of a symmetric PSD matrix, adding escalating
/// diagonal jitter (1e-10 up to 1e-6) when the plain factorization fails.
/// Throws NumericalError once the jitter cap is exhausted.
Matrix psd_cholesky(const Matrix& cov, const std::string& context);

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero. Returns the input unchanged when already PSD.
Matrix project_psd(const Matrix& sym);

}  // namespace dglm
