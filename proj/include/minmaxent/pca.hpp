#pragma once

#include <cstdint>
#include <utility>

#include "minmaxent/types.hpp"

namespace mme {

// Gaussian special case, solvable in closed form. With quadratic observables
// along a rotated frame, the fitted model is the Gaussian whose variances are
// the data variances in that frame, so the entropy is an explicit function of
// the rotation angle and minimizing it recovers the principal axes.

struct Covariance2D {
    double s11 = 1.0;
    double s22 = 1.0;
    double s12 = 0.0;

    /// Throws unless symmetric-positive-definite (s11 > 0, det > 0).
    void validate() const;
    double det() const { return s11 * s22 - s12 * s12; }
};

/// Variances of u = x cos t + y sin t and v = -x sin t + y cos t.
std::pair<double, double> rotated_variances(const Covariance2D& cov, double theta);

/// Covariance of (u, v); zero exactly at the principal-axis angles.
double off_diagonal(const Covariance2D& cov, double theta);

/// Entropy of the independent-Gaussian model with the given variances:
/// (1/2) ln(4 pi^2 e^2 v1 v2). Throws if the product is not positive.
double maxent_entropy_2d(double v1, double v2);

/// Entropy of the fitted model as a function of the frame angle.
double entropy_at(const Covariance2D& cov, double theta);

/// Argmin of entropy_at: (1/2) atan2(2 s12, s11 - s22), folded into
/// [-pi/4, pi/4] (the entropy has period pi/2).
double optimal_angle(const Covariance2D& cov);

/// Three-dimensional analogue, solved numerically over rotations
/// parametrized by Euler angles. Verifiable against diagonalization.
struct MinMaxEnt3dResult {
    Vector angles;      // Euler angles (x, y, z order)
    Matrix rotation;    // 3x3, rows are the fitted axes
    Vector variances;   // diagonal of R Sigma R^T
    double entropy = 0.0;
    double max_off_diagonal = 0.0;
    int iterations = 0;
    bool converged = false;  // residual off-diagonal below tolerance
};

MinMaxEnt3dResult numeric_minmaxent_3d(const Matrix& cov, std::uint64_t seed = 0,
                                       int max_iterations = 20000,
                                       double off_diag_tol = 1e-6);

}  // namespace mme
