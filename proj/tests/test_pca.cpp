#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "minmaxent/pca.hpp"
#include "minmaxent/rng.hpp"
#include "minmaxent/trainer.hpp"

using mme::Covariance2D;
using mme::Matrix;
using mme::Vector;

namespace {

constexpr double kPi = std::numbers::pi;
const Covariance2D kPaperCov{3.0, 2.0, 1.0};

/// Gaussian differential entropy by Simpson quadrature (independent oracle).
double entropy_1d_quadrature(double var) {
    const double s = std::sqrt(var);
    const int n = 200000;  // even
    const double lo = -12.0 * s, hi = 12.0 * s, h = (hi - lo) / n;
    auto f = [&](double x) {
        const double p = std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * kPi * var);
        return p > 0.0 ? -p * std::log(p) : 0.0;
    };
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

/// Eigenvalues of a symmetric 3x3 by classical Jacobi sweeps (independent oracle).
Vector jacobi_eigenvalues(Matrix a) {
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) off += std::abs(a(p, q));
        if (off < 1e-15) break;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a(p, q)) < 1e-18) continue;
                const double phi = 0.5 * std::atan2(2.0 * a(p, q), a(p, p) - a(q, q));
                Matrix g = Matrix::Identity(3, 3);
                g(p, p) = g(q, q) = std::cos(phi);
                g(p, q) = std::sin(phi);
                g(q, p) = -g(p, q);
                a = g * a * g.transpose();
            }
    }
    Vector ev = a.diagonal();
    std::sort(ev.data(), ev.data() + 3);
    return ev;
}

double det3(const Matrix& m) {
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
           m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

Matrix spd3(std::uint64_t seed) {
    mme::CounterRng rng(seed);
    Matrix a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = mme::gaussian(rng);
    Matrix s = a * a.transpose() + 0.5 * Matrix::Identity(3, 3);
    return s;
}

Matrix correlated_draws(int n, const Covariance2D& cov, std::uint64_t seed) {
    const double l11 = std::sqrt(cov.s11);
    const double l21 = cov.s12 / l11;
    const double l22 = std::sqrt(cov.s22 - l21 * l21);
    mme::CounterRng rng(seed);
    Matrix x(n, 2);
    for (int i = 0; i < n; ++i) {
        const double z1 = mme::gaussian(rng), z2 = mme::gaussian(rng);
        x(i, 0) = l11 * z1;
        x(i, 1) = l21 * z1 + l22 * z2;
    }
    return x;
}

}  // namespace

TEST_CASE("covariance validation") {
    CHECK_NOTHROW(kPaperCov.validate());
    CHECK(kPaperCov.det() == 5.0);
    CHECK_THROWS_AS(Covariance2D({-1.0, 2.0, 0.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Covariance2D({3.0, 2.0, 3.0}).validate(), std::invalid_argument);  // det < 0
}

TEST_CASE("rotated variances") {
    SUBCASE("axis-aligned and quarter-turn") {
        auto [a, b] = mme::rotated_variances(kPaperCov, 0.0);
        CHECK(a == 3.0);
        CHECK(b == 2.0);
        auto [c, d] = mme::rotated_variances(kPaperCov, kPi / 2.0);
        CHECK(c == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(d == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("trace is rotation invariant") {
        for (int k = 0; k < 37; ++k) {
            auto [a, b] = mme::rotated_variances(kPaperCov, -1.3 + 0.17 * k);
            CHECK(a + b == doctest::Approx(5.0).epsilon(1e-12));
        }
    }
    SUBCASE("agrees with an explicit similarity transform") {
        Matrix sigma(2, 2);
        sigma << 3.0, 1.0, 1.0, 2.0;
        for (double t : {0.3, -0.9, 1.7, 2.9}) {
            Matrix r(2, 2);
            r << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
            Matrix rot = r * sigma * r.transpose();
            auto [a, b] = mme::rotated_variances(kPaperCov, t);
            CHECK(a == doctest::Approx(rot(0, 0)).epsilon(1e-12));
            CHECK(b == doctest::Approx(rot(1, 1)).epsilon(1e-12));
            CHECK(mme::off_diagonal(kPaperCov, t) == doctest::Approx(rot(0, 1)).epsilon(1e-12));
        }
    }
}

TEST_CASE("off-diagonal residual") {
    const double star = mme::optimal_angle(kPaperCov);
    CHECK(std::abs(mme::off_diagonal(kPaperCov, star)) < 1e-12);
    // Quarter-period away, the residual is half the eigenvalue gap of
    // [[3,1],[1,2]]: eigenvalues (5 +- sqrt(5))/2, gap sqrt(5).
    CHECK(std::abs(mme::off_diagonal(kPaperCov, star + kPi / 4.0)) ==
          doctest::Approx(std::sqrt(5.0) / 2.0).epsilon(1e-12));
    CHECK(mme::off_diagonal(Covariance2D{3.0, 2.0, 0.0}, 0.0) == 0.0);
}

TEST_CASE("closed-form entropies") {
    SUBCASE("axis-aligned value, cross-checked by quadrature") {
        const double s0 = mme::entropy_at(kPaperCov, 0.0);
        CHECK(s0 == doctest::Approx(0.5 * std::log(4.0 * kPi * kPi * std::exp(2.0) * 6.0))
                        .epsilon(1e-14));
        // Independent-Gaussian model: entropy is the sum of the marginals'.
        const double quad = entropy_1d_quadrature(3.0) + entropy_1d_quadrature(2.0);
        CHECK(s0 == doctest::Approx(quad).epsilon(1e-9));
    }
    SUBCASE("optimal-angle value hits the determinant") {
        const double smin = mme::entropy_at(kPaperCov, mme::optimal_angle(kPaperCov));
        CHECK(smin == doctest::Approx(0.5 * std::log(4.0 * kPi * kPi * std::exp(2.0) * 5.0))
                          .epsilon(1e-14));
    }
    SUBCASE("isotropic covariance is angle independent") {
        const Covariance2D iso{1.7, 1.7, 0.0};
        const double base = mme::entropy_at(iso, 0.0);
        for (int k = 1; k < 20; ++k)
            CHECK(mme::entropy_at(iso, 0.33 * k) == doctest::Approx(base).epsilon(1e-13));
    }
    SUBCASE("invalid variance products are rejected") {
        CHECK_THROWS_AS(mme::maxent_entropy_2d(1.0, -2.0), std::invalid_argument);
        CHECK_THROWS_AS(mme::maxent_entropy_2d(0.0, 2.0), std::invalid_argument);
    }
}

TEST_CASE("optimal angle") {
    CHECK(mme::optimal_angle(Covariance2D{3.0, 2.0, 0.0}) == 0.0);
    CHECK(mme::optimal_angle(kPaperCov) ==
          doctest::Approx(0.5 * std::atan(2.0)).epsilon(1e-14));
    CHECK(mme::optimal_angle(Covariance2D{2.0, 2.0, 1.0}) ==
          doctest::Approx(kPi / 4.0).epsilon(1e-14));
    // Continuity across the equal-variance singularity of the arctan form.
    CHECK(mme::optimal_angle(Covariance2D{2.0, 2.0 - 1e-12, 1.0}) ==
          doctest::Approx(kPi / 4.0).epsilon(1e-9));

    SUBCASE("grid minimization agrees within 1e-4") {
        const int n = 100000;
        double best = 0.0, best_s = mme::entropy_at(kPaperCov, 0.0);
        for (int i = 0; i < n; ++i) {
            const double t = kPi * i / n;
            const double s = mme::entropy_at(kPaperCov, t);
            if (s < best_s) {
                best_s = s;
                best = t;
            }
        }
        // Fold onto the principal branch: the entropy has period pi/2.
        double folded = std::fmod(best, kPi / 2.0);
        if (folded > kPi / 4.0) folded -= kPi / 2.0;
        CHECK(std::abs(folded - mme::optimal_angle(kPaperCov)) < 1e-4);
    }
}

TEST_CASE("determinant bound along the angle sweep") {
    const double star = mme::optimal_angle(kPaperCov);
    for (int k = 0; k < 1000; ++k) {
        const double t = -kPi + 2.0 * kPi * k / 1000.0;
        auto [a, b] = mme::rotated_variances(kPaperCov, t);
        CHECK(a * b >= kPaperCov.det() - 1e-12);
    }
    auto [a, b] = mme::rotated_variances(kPaperCov, star);
    CHECK(a * b == doctest::Approx(kPaperCov.det()).epsilon(1e-12));
    auto [c, d] = mme::rotated_variances(kPaperCov, star + 0.3);
    CHECK(c * d > kPaperCov.det() + 0.1);
}

TEST_CASE("entropy curve shape") {
    SUBCASE("periodicity") {
        for (double t : {0.1, 0.9, -0.4, 2.2}) {
            CHECK(mme::entropy_at(kPaperCov, t + kPi / 2.0) ==
                  doctest::Approx(mme::entropy_at(kPaperCov, t)).epsilon(1e-13));
            CHECK(mme::entropy_at(kPaperCov, t + kPi) ==
                  doctest::Approx(mme::entropy_at(kPaperCov, t)).epsilon(1e-13));
        }
    }
    SUBCASE("single interior minimum per period") {
        const double star = mme::optimal_angle(kPaperCov);
        const int n = 10001;  // odd: the grid hits the symmetry center exactly
        int minima = 0;
        double at = 0.0;
        for (int i = 1; i + 1 < n; ++i) {
            const double t = star - kPi / 4.0 + kPi / 2.0 * i / (n - 1.0);
            const double s = mme::entropy_at(kPaperCov, t);
            if (s < mme::entropy_at(kPaperCov, t - kPi / 2.0 / (n - 1.0)) &&
                s < mme::entropy_at(kPaperCov, t + kPi / 2.0 / (n - 1.0))) {
                ++minima;
                at = t;
            }
        }
        CHECK(minima == 1);
        CHECK(at == doctest::Approx(star).epsilon(1e-3));
    }
}

TEST_CASE("three-dimensional numerical solution") {
    SUBCASE("diagonal input needs no rotation") {
        Matrix sigma = Vector({{2.0, 0.5, 1.3}}).transpose().asDiagonal();
        auto res = mme::numeric_minmaxent_3d(sigma, 1);
        CHECK(res.converged);
        CHECK(res.max_off_diagonal < 1e-6);
        Vector got = res.variances;
        std::sort(got.data(), got.data() + 3);
        CHECK((got - Vector({{0.5, 1.3, 2.0}}).transpose()).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("random spd: diagonalizes and matches the jacobi oracle") {
        for (std::uint64_t seed : {11u, 12u, 13u}) {
            Matrix sigma = spd3(seed);
            auto res = mme::numeric_minmaxent_3d(sigma, seed);
            CHECK(res.converged);
            CHECK(res.max_off_diagonal < 1e-6);
            // Rotation is orthogonal and reproduces the claimed variances.
            CHECK((res.rotation * res.rotation.transpose() - Matrix::Identity(3, 3))
                      .cwiseAbs()
                      .maxCoeff() < 1e-9);
            Matrix d = res.rotation * sigma * res.rotation.transpose();
            CHECK((d.diagonal() - res.variances).cwiseAbs().maxCoeff() < 1e-12);

            Vector got = res.variances;
            std::sort(got.data(), got.data() + 3);
            Vector oracle = jacobi_eigenvalues(sigma);
            CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-6);

            // At the optimum the variance product is the determinant.
            const double expect =
                0.5 * std::log(std::pow(2.0 * kPi * std::exp(1.0), 3) * det3(sigma));
            CHECK(res.entropy == doctest::Approx(expect).epsilon(1e-9));
        }
    }
    SUBCASE("invalid inputs are rejected") {
        Matrix bad = Matrix::Identity(3, 3);
        bad(2, 2) = -1.0;
        CHECK_THROWS_AS(mme::numeric_minmaxent_3d(bad, 1), std::invalid_argument);
        Matrix asym = spd3(4);
        asym(0, 1) += 0.1;
        CHECK_THROWS_AS(mme::numeric_minmaxent_3d(asym, 1), std::invalid_argument);
        CHECK_THROWS_AS(mme::numeric_minmaxent_3d(Matrix::Identity(2, 2), 1),
                        std::invalid_argument);
    }
}

TEST_CASE("full training recovers the principal angle") {
    const Matrix data = correlated_draws(100000, kPaperCov, 29);
    mme::ObservableSet obs = mme::ObservableSet::rotated_quadratic(0.0);
    std::optional<mme::LagrangeState> warm;
    mme::TrainConfig cfg;
    cfg.eta_lambda = 5e-2;
    cfg.measure_sweeps = 50;
    // Anneal the parameter rate over a few stages to shrink the final jitter.
    const struct {
        int epochs;
        double eta;
    } stages[] = {{60, 0.05}, {40, 0.02}, {40, 0.01}, {40, 0.005}};
    int k = 0;
    for (const auto& st : stages) {
        cfg.max_epochs = st.epochs;
        cfg.eta_theta = st.eta;
        cfg.seed = 41 + k++;
        auto res = mme::train(obs, data, cfg, warm);
        REQUIRE(res.status != mme::TrainStatus::Diverged);
        obs = res.observables;
        warm = res.lagrange;
    }
    const double theta = obs.theta()(0);
    CAPTURE(theta);
    CHECK(std::abs(theta - mme::optimal_angle(kPaperCov)) < 0.02);
}
