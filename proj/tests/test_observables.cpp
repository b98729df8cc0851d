#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "minmaxent/observables.hpp"
#include "minmaxent/rng.hpp"

using mme::CounterRng;
using mme::Index;
using mme::ObservableSet;
using mme::ObsWorkspace;
using mme::Vector;

namespace {

Vector randn(int n, CounterRng& rng, double scale = 1.0) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = scale * mme::gaussian(rng);
    return v;
}

void check_close(const Vector& got, const Vector& want, double tol = 1e-4) {
    REQUIRE(got.size() == want.size());
    for (Index i = 0; i < got.size(); ++i) {
        CAPTURE(i);
        CAPTURE(got(i));
        CAPTURE(want(i));
        CHECK(std::abs(got(i) - want(i)) <=
              tol * std::max({1.0, std::abs(got(i)), std::abs(want(i))}));
    }
}

/// d(sum_j w_j f_j)/dtheta by central differences.
Vector fd_theta(ObservableSet obs, const Vector& x, const Vector& w, double h = 1e-5) {
    ObsWorkspace ws = obs.make_workspace();
    Vector g(obs.n_params());
    for (Index i = 0; i < g.size(); ++i) {
        const double t0 = obs.theta()(i);
        obs.theta()(i) = t0 + h;
        const double fp = obs.weighted_value(x.data(), w, ws);
        obs.theta()(i) = t0 - h;
        const double fm = obs.weighted_value(x.data(), w, ws);
        obs.theta()(i) = t0;
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

Vector fd_input(const ObservableSet& obs, Vector x, const Vector& w, double h = 1e-5) {
    ObsWorkspace ws = obs.make_workspace();
    Vector g(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        const double x0 = x(i);
        x(i) = x0 + h;
        const double fp = obs.weighted_value(x.data(), w, ws);
        x(i) = x0 - h;
        const double fm = obs.weighted_value(x.data(), w, ws);
        x(i) = x0;
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("moments family: f = (x, x^2), no parameters") {
    ObservableSet obs = ObservableSet::moments();
    CHECK(obs.n_obs() == 2);
    CHECK(obs.n_params() == 0);
    CHECK(obs.input_dim() == 1);

    ObsWorkspace ws = obs.make_workspace();
    Vector x(1);
    x << 2.0;
    const Vector f = obs.evaluate(x, ws);
    CHECK(f(0) == 2.0);
    CHECK(f(1) == 4.0);
}

TEST_CASE("rotated quadratic: values at axis-aligned and swapped frames") {
    ObsWorkspace ws;
    Vector xy(2);
    xy << 1.0, 2.0;

    ObservableSet obs = ObservableSet::rotated_quadratic(0.0);
    ws = obs.make_workspace();
    Vector f = obs.evaluate(xy, ws);
    CHECK(f(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f(1) == doctest::Approx(4.0).epsilon(1e-14));

    ObservableSet swapped = ObservableSet::rotated_quadratic(std::acos(0.0));  // pi/2
    ws = swapped.make_workspace();
    f = swapped.evaluate(xy, ws);
    CHECK(f(0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(f(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rotated quadratic: gradient vanishes on a principal axis point") {
    ObservableSet obs = ObservableSet::rotated_quadratic(0.0);
    ObsWorkspace ws = obs.make_workspace();
    Vector xy(2), w(2), grad(1);
    xy << 1.0, 0.0;
    w << 1.0, 0.0;
    obs.parameter_gradients(xy, w, grad, ws);
    CHECK(grad(0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("zero weights give a zero parameter gradient in every family") {
    CounterRng rng(5);
    ObservableSet sets[] = {ObservableSet::rotated_quadratic(0.3),
                            ObservableSet::mlp(3, {6, 6}, 2, 42),
                            ObservableSet::cnn(4, 3, 42, 2, 3)};
    for (ObservableSet& obs : sets) {
        CAPTURE(obs.n_params());
        ObsWorkspace ws = obs.make_workspace();
        Vector grad(obs.n_params());
        obs.parameter_gradients(randn(obs.input_dim(), rng), Vector::Zero(obs.n_obs()), grad, ws);
        CHECK(grad.norm() == 0.0);
    }
}

TEST_CASE("rotated quadratic: rotation identity and scale covariance") {
    CounterRng rng(6);
    for (double theta : {-0.9, 0.0, 0.37, 1.2}) {
        ObservableSet obs = ObservableSet::rotated_quadratic(theta);
        ObsWorkspace ws = obs.make_workspace();
        for (int k = 0; k < 5; ++k) {
            const Vector xy = randn(2, rng, 2.0);
            const Vector f = obs.evaluate(xy, ws);
            CHECK(f(0) + f(1) ==
                  doctest::Approx(xy.squaredNorm()).epsilon(1e-12));  // norm is frame-invariant
            const double c = 0.5 + mme::uniform01(rng);
            const Vector fc = obs.evaluate(c * xy, ws);
            CHECK(fc(0) == doctest::Approx(c * c * f(0)).epsilon(1e-12));
            CHECK(fc(1) == doctest::Approx(c * c * f(1)).epsilon(1e-12));
        }
    }
}

TEST_CASE("mlp observables: layout arithmetic gives 1186 parameters for 1-[32,32]-2") {
    ObservableSet obs = ObservableSet::mlp(1, {32, 32}, 2, 1);
    CHECK(obs.n_params() == 1186);
    CHECK(obs.n_obs() == 2);
}

TEST_CASE("mlp observables: seeded initialization is reproducible; bad layouts throw") {
    ObservableSet a = ObservableSet::mlp(2, {8, 8}, 3, 77);
    ObservableSet b = ObservableSet::mlp(2, {8, 8}, 3, 77);
    REQUIRE(a.n_params() == b.n_params());
    CHECK(std::memcmp(a.theta().data(), b.theta().data(), sizeof(double) * a.n_params()) == 0);

    ObservableSet c = ObservableSet::mlp(2, {8, 8}, 3, 78);
    CHECK(a.theta() != c.theta());

    CHECK_THROWS_AS(ObservableSet::mlp(2, {8, 8}, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(ObservableSet::mlp(2, {8, 0, 8}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(ObservableSet::mlp(2, {}, 2, 1), std::invalid_argument);
}

TEST_CASE("cnn observables: 8x8 input, 16 outputs, zero image maps to zero") {
    ObservableSet obs = ObservableSet::cnn(8, 16, 3);
    CHECK(obs.input_dim() == 64);
    CHECK(obs.n_obs() == 16);

    // Convolving a zero image gives zero whatever the kernels; the
    // initialization leaves every bias at zero, so the outputs vanish exactly.
    ObsWorkspace ws = obs.make_workspace();
    const Vector f = obs.evaluate(Vector::Zero(64), ws);
    CHECK(f.norm() == 0.0);

    CHECK_THROWS_AS(ObservableSet::cnn(3, 16, 1), std::invalid_argument);
}

TEST_CASE("mlp observables: gradients match finite differences over 100 random draws") {
    CounterRng rng(7);
    ObservableSet obs = ObservableSet::mlp(2, {8, 8}, 2, 123);
    ObsWorkspace ws = obs.make_workspace();
    Vector grad(obs.n_params());
    for (int draw = 0; draw < 100; ++draw) {
        CAPTURE(draw);
        const Vector x = randn(2, rng);
        const Vector w = randn(2, rng);
        obs.parameter_gradients(x, w, grad, ws);
        check_close(grad, fd_theta(obs, x, w));
        Vector xgrad(2);
        obs.input_gradient(x, w, xgrad, ws);
        check_close(xgrad, fd_input(obs, x, w));
        obs.theta() += randn(obs.n_params(), rng, 0.05);  // probe at varied parameters
    }
}

TEST_CASE("cnn observables: sampled gradient components match finite differences") {
    CounterRng rng(8);
    ObservableSet obs = ObservableSet::cnn(6, 4, 9, 4, 3);
    ObsWorkspace ws = obs.make_workspace();
    Vector grad(obs.n_params());
    for (int draw = 0; draw < 5; ++draw) {
        CAPTURE(draw);
        const Vector x = randn(obs.input_dim(), rng, 0.5);
        const Vector w = randn(obs.n_obs(), rng);
        obs.parameter_gradients(x, w, grad, ws);

        ObsWorkspace fd_ws = obs.make_workspace();
        for (int probe = 0; probe < 60; ++probe) {
            const Index i = mme::uniform_index(rng, obs.n_params());
            const double h = 1e-5, t0 = obs.theta()(i);
            obs.theta()(i) = t0 + h;
            const double fp = obs.weighted_value(x.data(), w, fd_ws);
            obs.theta()(i) = t0 - h;
            const double fm = obs.weighted_value(x.data(), w, fd_ws);
            obs.theta()(i) = t0;
            const double fd = (fp - fm) / (2.0 * h);
            CAPTURE(i);
            CHECK(std::abs(grad(i) - fd) <=
                  1e-4 * std::max({1.0, std::abs(grad(i)), std::abs(fd)}));
        }
        check_close(fd_input(obs, x, w), [&] {
            Vector xg(obs.input_dim());
            obs.input_gradient(x, w, xg, ws);
            return xg;
        }());
    }
}

TEST_CASE("jacobian from evaluate_full matches per-observable finite differences") {
    CounterRng rng(9);
    ObservableSet obs = ObservableSet::mlp(3, {6}, 4, 31);
    ObsWorkspace ws = obs.make_workspace();
    const Vector x = randn(3, rng);
    const auto eval = obs.evaluate_full(x, true, false, ws);
    REQUIRE(eval.jacobian_x.rows() == 4);
    REQUIRE(eval.jacobian_x.cols() == 3);

    for (int j = 0; j < obs.n_obs(); ++j) {
        Vector w = Vector::Zero(obs.n_obs());
        w(j) = 1.0;
        check_close(eval.jacobian_x.row(j).transpose(), fd_input(obs, x, w));
    }
}

TEST_CASE("serialization round-trips every family bit-exactly") {
    namespace fs = std::filesystem;
    CounterRng rng(10);
    const fs::path dir = fs::temp_directory_path() / "mme_obs_roundtrip";
    fs::create_directories(dir);

    ObservableSet sets[] = {ObservableSet::moments(), ObservableSet::rotated_quadratic(0.81),
                            ObservableSet::mlp(2, {5, 4}, 3, 3),
                            ObservableSet::cnn(6, 4, 4, 3, 3)};
    int k = 0;
    for (ObservableSet& obs : sets) {
        CAPTURE(k);
        const std::string path = (dir / ("obs" + std::to_string(k++) + ".ckpt")).string();
        obs.save(path);
        ObservableSet back = ObservableSet::load(path);
        CHECK(back.family() == obs.family());
        CHECK(back.n_obs() == obs.n_obs());
        CHECK(back.input_dim() == obs.input_dim());
        REQUIRE(back.n_params() == obs.n_params());
        if (obs.n_params() > 0)
            CHECK(std::memcmp(back.theta().data(), obs.theta().data(),
                              sizeof(double) * obs.n_params()) == 0);

        ObsWorkspace wa = obs.make_workspace(), wb = back.make_workspace();
        const Vector x = randn(obs.input_dim(), rng);
        CHECK(obs.evaluate(x, wa) == back.evaluate(x, wb));
    }
}

TEST_CASE("non-finite and mis-sized inputs are rejected") {
    ObservableSet obs = ObservableSet::moments();
    ObsWorkspace ws = obs.make_workspace();
    Vector bad(1);
    bad << std::nan("");
    Vector out(2);
    CHECK_THROWS_AS(obs.evaluate(bad, ws), std::invalid_argument);
    CHECK_THROWS_AS(obs.evaluate(Vector::Zero(2), ws), std::invalid_argument);

    Vector grad(0), w_bad(3);
    w_bad.setZero();
    Vector x(1);
    x << 1.0;
    CHECK_THROWS_AS(obs.parameter_gradients(x, w_bad, grad, ws), std::invalid_argument);
}
