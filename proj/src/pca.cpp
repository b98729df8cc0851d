#include "minmaxent/pca.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/LU>

#include "minmaxent/adam.hpp"
#include "minmaxent/rng.hpp"

namespace mme {

namespace {
constexpr double kPi = std::numbers::pi;
const double kLn2PiE = std::log(2.0 * kPi) + 1.0;
}  // namespace

void Covariance2D::validate() const {
    if (!(s11 > 0.0) || !(s22 > 0.0) || !(det() > 0.0))
        throw std::invalid_argument("Covariance2D: matrix is not positive definite");
}

std::pair<double, double> rotated_variances(const Covariance2D& cov, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double s2 = std::sin(2.0 * theta);
    const double v1 = cov.s11 * c * c + cov.s22 * s * s + cov.s12 * s2;
    const double v2 = cov.s11 * s * s + cov.s22 * c * c - cov.s12 * s2;
    return {v1, v2};
}

double off_diagonal(const Covariance2D& cov, double theta) {
    return cov.s12 * std::cos(2.0 * theta) - 0.5 * (cov.s11 - cov.s22) * std::sin(2.0 * theta);
}

double maxent_entropy_2d(double v1, double v2) {
    if (!(v1 * v2 > 0.0))
        throw std::invalid_argument("maxent_entropy_2d: variance product must be positive");
    return kLn2PiE + 0.5 * std::log(v1 * v2);
}

double entropy_at(const Covariance2D& cov, double theta) {
    auto [v1, v2] = rotated_variances(cov, theta);
    return maxent_entropy_2d(v1, v2);
}

double optimal_angle(const Covariance2D& cov) {
    cov.validate();
    double theta = 0.5 * std::atan2(2.0 * cov.s12, cov.s11 - cov.s22);
    if (theta > kPi / 4.0) theta -= kPi / 2.0;
    if (theta < -kPi / 4.0) theta += kPi / 2.0;
    return theta;
}

namespace {

Matrix rot_x(double a, bool deriv) {
    const double c = std::cos(a), s = std::sin(a);
    Matrix r = Matrix::Zero(3, 3);
    if (!deriv) {
        r(0, 0) = 1.0;
        r(1, 1) = c; r(1, 2) = -s;
        r(2, 1) = s; r(2, 2) = c;
    } else {
        r(1, 1) = -s; r(1, 2) = -c;
        r(2, 1) = c; r(2, 2) = -s;
    }
    return r;
}

Matrix rot_y(double b, bool deriv) {
    const double c = std::cos(b), s = std::sin(b);
    Matrix r = Matrix::Zero(3, 3);
    if (!deriv) {
        r(0, 0) = c; r(0, 2) = s;
        r(1, 1) = 1.0;
        r(2, 0) = -s; r(2, 2) = c;
    } else {
        r(0, 0) = -s; r(0, 2) = c;
        r(2, 0) = -c; r(2, 2) = -s;
    }
    return r;
}

Matrix rot_z(double c_, bool deriv) {
    const double c = std::cos(c_), s = std::sin(c_);
    Matrix r = Matrix::Zero(3, 3);
    if (!deriv) {
        r(0, 0) = c; r(0, 1) = -s;
        r(1, 0) = s; r(1, 1) = c;
        r(2, 2) = 1.0;
    } else {
        r(0, 0) = -s; r(0, 1) = -c;
        r(1, 0) = c; r(1, 1) = -s;
    }
    return r;
}

Matrix euler_rotation(const Vector& ang) {
    return rot_z(ang(2), false) * rot_y(ang(1), false) * rot_x(ang(0), false);
}

/// L = sum_i ln (R Sigma R^T)_ii and its gradient in the Euler angles.
double log_var_sum(const Vector& ang, const Matrix& sigma, Vector& grad) {
    const Matrix rx = rot_x(ang(0), false), ry = rot_y(ang(1), false), rz = rot_z(ang(2), false);
    const Matrix r = rz * ry * rx;
    const Matrix sr = sigma * r.transpose();
    const Vector d = (r * sr).diagonal();
    if (!(d.minCoeff() > 0.0))
        throw std::runtime_error("numeric_minmaxent_3d: rotated variance became non-positive");

    const Matrix dr_a = rz * ry * rot_x(ang(0), true);
    const Matrix dr_b = rz * rot_y(ang(1), true) * rx;
    const Matrix dr_c = rot_z(ang(2), true) * ry * rx;
    grad.resize(3);
    // d ln det-free objective: d/dphi (R Sigma R^T)_ii = 2 (dR Sigma R^T)_ii.
    grad(0) = 2.0 * ((dr_a * sr).diagonal().array() / d.array()).sum();
    grad(1) = 2.0 * ((dr_b * sr).diagonal().array() / d.array()).sum();
    grad(2) = 2.0 * ((dr_c * sr).diagonal().array() / d.array()).sum();
    return d.array().log().sum();
}

}  // namespace

MinMaxEnt3dResult numeric_minmaxent_3d(const Matrix& cov, std::uint64_t seed,
                                       int max_iterations, double off_diag_tol) {
    if (cov.rows() != 3 || cov.cols() != 3)
        throw std::invalid_argument("numeric_minmaxent_3d: covariance must be 3x3");
    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + scale))
        throw std::invalid_argument("numeric_minmaxent_3d: covariance is not symmetric");
    // Sylvester's criterion keeps validation independent of any eigensolver.
    const double m1 = cov(0, 0);
    const double m2 = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    const double m3 = cov.determinant();
    if (!(m1 > 0.0) || !(m2 > 0.0) || !(m3 > 0.0))
        throw std::invalid_argument("numeric_minmaxent_3d: covariance is not positive definite");

    const int n_restarts = 8;
    const int budget = std::max(200, max_iterations / n_restarts);
    CounterRng rng(CounterRng::derive(seed, 0x3D));

    MinMaxEnt3dResult best;
    double best_l = std::numeric_limits<double>::infinity();
    int total_iters = 0;

    for (int restart = 0; restart < n_restarts; ++restart) {
        Vector ang(3);
        if (restart == 0)
            ang.setZero();
        else
            for (int i = 0; i < 3; ++i) ang(i) = uniform(rng, -kPi, kPi);

        AdamState adam;
        adam.resize(3);
        AdamParams ap;
        Vector grad(3);
        double l = log_var_sum(ang, cov, grad);
        for (int it = 0; it < budget; ++it) {
            ++total_iters;
            if (grad.norm() < 1e-12) break;
            adam_update(ang, grad, adam, 0.05, ap);
            l = log_var_sum(ang, cov, grad);
        }
        // Backtracking descent polishes the Adam solution to stationarity.
        for (int it = 0; it < 200 && grad.norm() > 1e-13; ++it) {
            ++total_iters;
            double step = 0.25;
            const double g2 = grad.squaredNorm();
            Vector trial = ang - step * grad;
            Vector tgrad(3);
            double tl = log_var_sum(trial, cov, tgrad);
            int halvings = 0;
            while (tl > l - 0.5 * step * g2 && halvings < 60) {
                step *= 0.5;
                trial = ang - step * grad;
                tl = log_var_sum(trial, cov, tgrad);
                ++halvings;
            }
            if (tl >= l) break;
            ang = trial;
            l = tl;
            grad = tgrad;
        }
        if (l < best_l) {
            best_l = l;
            best.angles = ang;
        }
    }

    best.rotation = euler_rotation(best.angles);
    const Matrix tilted = best.rotation * cov * best.rotation.transpose();
    best.variances = tilted.diagonal();
    best.entropy = 1.5 * kLn2PiE + 0.5 * best_l;
    best.max_off_diagonal = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) best.max_off_diagonal = std::max(best.max_off_diagonal,
                                                         std::abs(tilted(i, j)));
    best.iterations = total_iters;
    best.converged = best.max_off_diagonal < off_diag_tol * (1.0 + scale);
    return best;
}

}  // namespace mme
