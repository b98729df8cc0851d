#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "minmaxent/hamiltonian.hpp"
#include "minmaxent/rng.hpp"
#include "minmaxent/sampler.hpp"

using mme::CnnArch;
using mme::CounterRng;
using mme::EffectiveHamiltonian;
using mme::Network;
using mme::ObservableSet;
using mme::OutputKind;
using mme::Vector;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(Vector a, Vector b) {
    std::sort(a.data(), a.data() + a.size());
    std::sort(b.data(), b.data() + b.size());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double d = 0.0;
    Eigen::Index i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a(i) <= b(j))
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

}  // namespace

TEST_CASE("energy is the multiplier-weighted observable sum") {
    EffectiveHamiltonian h = EffectiveHamiltonian::maxent(ObservableSet::moments(), vec2(0.0, 0.5));
    auto s = h.make_scratch();
    Vector x(1);
    x << 2.0;
    CHECK(h.energy(x, s) == doctest::Approx(2.0).epsilon(1e-15));  // 0.5 * x^2
    // log of the unnormalized density is -energy
    CHECK(-h.energy(x, s) == doctest::Approx(-2.0).epsilon(1e-15));

    EffectiveHamiltonian zero =
        EffectiveHamiltonian::maxent(ObservableSet::moments(), Vector::Zero(2));
    auto sz = zero.make_scratch();
    for (double v : {-3.0, 0.0, 1.7, 42.0}) {
        x << v;
        CHECK(zero.energy(x, sz) == 0.0);
    }
}

TEST_CASE("gaussian closed form: multipliers 1/(2 variance) reproduce the paper covariance") {
    // Axis-aligned quadratic observables fitted to variances (3, 2) give
    // lambda = (1/6, 1/4); the energy is then x^2/6 + y^2/4.
    EffectiveHamiltonian h = EffectiveHamiltonian::maxent(ObservableSet::rotated_quadratic(0.0),
                                                          vec2(1.0 / 6.0, 1.0 / 4.0));
    auto s = h.make_scratch();
    CounterRng rng(1);
    for (int k = 0; k < 10; ++k) {
        const double x = mme::gaussian(rng), y = mme::gaussian(rng);
        CHECK(h.energy(vec2(x, y), s) ==
              doctest::Approx(x * x / 6.0 + y * y / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("moments energy is the quadratic with coefficients lambda") {
    const Vector lam = vec2(-0.3, 0.8);
    EffectiveHamiltonian h = EffectiveHamiltonian::maxent(ObservableSet::moments(), lam);
    auto s = h.make_scratch();
    Vector x(1);
    for (double v : {-2.0, -0.5, 0.0, 1.0, 3.25}) {
        x << v;
        CHECK(h.energy(x, s) == doctest::Approx(lam(0) * v + lam(1) * v * v).epsilon(1e-14));
    }
}

TEST_CASE("energy is linear in lambda when no bias is attached") {
    CounterRng rng(2);
    ObservableSet obs = ObservableSet::mlp(2, {6, 6}, 3, 9);
    Vector a(3), b(3);
    for (int i = 0; i < 3; ++i) {
        a(i) = mme::gaussian(rng);
        b(i) = mme::gaussian(rng);
    }
    EffectiveHamiltonian ha = EffectiveHamiltonian::maxent(obs, a);
    EffectiveHamiltonian hb = EffectiveHamiltonian::maxent(obs, b);
    EffectiveHamiltonian hab = EffectiveHamiltonian::maxent(obs, a + b);
    auto sa = ha.make_scratch(), sb = hb.make_scratch(), sab = hab.make_scratch();
    for (int k = 0; k < 10; ++k) {
        const Vector x = vec2(mme::gaussian(rng), mme::gaussian(rng));
        CHECK(hab.energy(x, sab) ==
              doctest::Approx(ha.energy(x, sa) + hb.energy(x, sb)).epsilon(1e-12));
    }
}

TEST_CASE("discriminator bias adds alpha times the score") {
    CounterRng rng(3);
    Network g = Network::cnn(CnnArch{4, 3, 3, 1}, OutputKind::SigmoidProb, 17);
    EffectiveHamiltonian base =
        EffectiveHamiltonian::maxent(ObservableSet::cnn(4, 2, 3, 3, 3), vec2(0.2, -0.1));
    auto ws = g.make_workspace();

    SUBCASE("alpha = 0 leaves the energy untouched") {
        EffectiveHamiltonian h = base.with_discriminator_bias(g, 0.0);
        auto s0 = base.make_scratch(), s1 = h.make_scratch();
        for (int k = 0; k < 5; ++k) {
            Vector x(16);
            for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
            CHECK(h.energy(x, s1) == doctest::Approx(base.energy(x, s0)).epsilon(1e-15));
        }
    }
    SUBCASE("alpha = 5 shifts by the network score") {
        EffectiveHamiltonian h = base.with_discriminator_bias(g, 5.0);
        auto s0 = base.make_scratch(), s1 = h.make_scratch();
        for (int k = 0; k < 5; ++k) {
            Vector x(16);
            for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
            CHECK(h.energy(x, s1) ==
                  doctest::Approx(base.energy(x, s0) + 5.0 * g.score(x, ws)).epsilon(1e-12));
        }
    }
    SUBCASE("negative alpha is rejected") {
        CHECK_THROWS_AS(base.with_discriminator_bias(g, -1.0), std::invalid_argument);
    }
    SUBCASE("bias networks are frozen at composition time") {
        EffectiveHamiltonian h = base.with_discriminator_bias(g, 2.0);
        Vector x(16);
        for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
        auto s = h.make_scratch();
        const double before = h.energy(x, s);
        g.params().setZero();  // retraining g must not alter the composed energy
        CHECK(h.energy(x, s) == before);
    }
}

TEST_CASE("classifier bias arithmetic") {
    CounterRng rng(4);
    Network h10 = Network::cnn(CnnArch{4, 3, 3, 10}, OutputKind::SoftmaxProb, 18);
    EffectiveHamiltonian base =
        EffectiveHamiltonian::maxent(ObservableSet::cnn(4, 2, 3, 3, 3), vec2(0.2, -0.1));

    SUBCASE("matches sum_{i != j} h_i - h_j against direct network output") {
        const int j = 4;
        EffectiveHamiltonian h = base.with_classifier_bias(h10, j, 3.0);
        auto s0 = base.make_scratch(), s1 = h.make_scratch();
        auto ws = h10.make_workspace();
        Vector p(10);
        for (int k = 0; k < 5; ++k) {
            Vector x(16);
            for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
            h10.prob(x.data(), p, ws);
            const double expected = base.energy(x, s0) + 3.0 * (p.sum() - 2.0 * p(j));
            CHECK(h.energy(x, s1) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("uniform class scores contribute 0.8 alpha") {
        Network uniform = Network::cnn(CnnArch{4, 3, 3, 10}, OutputKind::SoftmaxProb, 18);
        uniform.params().setZero();  // zero logits -> all probabilities 0.1
        EffectiveHamiltonian h = base.with_classifier_bias(uniform, 2, 5.0);
        auto s0 = base.make_scratch(), s1 = h.make_scratch();
        Vector x(16);
        for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
        CHECK(h.energy(x, s1) ==
              doctest::Approx(base.energy(x, s0) + 0.8 * 5.0).epsilon(1e-12));
    }
    SUBCASE("a certain target contributes -alpha") {
        // Huge output bias on class 7 makes the softmax a one-hot vector.
        Network sure = Network::cnn(CnnArch{4, 3, 3, 10}, OutputKind::SoftmaxProb, 18);
        sure.params().setZero();
        sure.params()(sure.n_params() - 10 + 7) = 200.0;
        EffectiveHamiltonian h = base.with_classifier_bias(sure, 7, 4.0);
        auto s0 = base.make_scratch(), s1 = h.make_scratch();
        Vector x(16);
        for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
        CHECK(h.energy(x, s1) == doctest::Approx(base.energy(x, s0) - 4.0).epsilon(1e-9));
    }
    SUBCASE("out-of-range targets are rejected") {
        CHECK_THROWS_AS(base.with_classifier_bias(h10, 10, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(base.with_classifier_bias(h10, -1, 1.0), std::invalid_argument);
    }
    SUBCASE("alpha = 0 leaves the energy untouched") {
        EffectiveHamiltonian h = base.with_classifier_bias(h10, 0, 0.0);
        auto s0 = base.make_scratch(), s1 = h.make_scratch();
        Vector x(16);
        for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
        CHECK(h.energy(x, s1) == doctest::Approx(base.energy(x, s0)).epsilon(1e-15));
    }
}

TEST_CASE("detach_base keeps the bias terms only") {
    Network h10 = Network::cnn(CnnArch{4, 3, 3, 10}, OutputKind::SoftmaxProb, 19);
    EffectiveHamiltonian base =
        EffectiveHamiltonian::maxent(ObservableSet::cnn(4, 2, 3, 3, 3), vec2(0.2, -0.1));

    CHECK_THROWS_AS(base.detach_base(), std::logic_error);

    EffectiveHamiltonian full = base.with_classifier_bias(h10, 3, 2.0);
    EffectiveHamiltonian only = full.detach_base();
    CHECK_FALSE(only.has_base());
    auto sb = base.make_scratch(), sf = full.make_scratch(), so = only.make_scratch();
    CounterRng rng(5);
    for (int k = 0; k < 5; ++k) {
        Vector x(16);
        for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
        CHECK(only.energy(x, so) ==
              doctest::Approx(full.energy(x, sf) - base.energy(x, sb)).epsilon(1e-12));
    }
}

TEST_CASE("constant bias leaves the sampling distribution invariant") {
    EffectiveHamiltonian h = EffectiveHamiltonian::maxent(ObservableSet::moments(), vec2(0.0, 0.5));
    EffectiveHamiltonian hc = h.with_constant_bias(3.7);

    auto s0 = h.make_scratch(), s1 = hc.make_scratch();
    Vector x(1);
    x << 0.4;
    CHECK(hc.energy(x, s1) == doctest::Approx(h.energy(x, s0) + 3.7).epsilon(1e-15));

    mme::SamplerConfig cfg;
    cfg.n_chains = 16;
    cfg.burn_in_sweeps = 200;
    const auto p = mme::ProposalPolicy::full_vector();

    SUBCASE("same seed: acceptance decisions and samples are identical") {
        mme::Ensemble a = mme::sample_hamiltonian(h, p, cfg, 20000, 71);
        mme::Ensemble b = mme::sample_hamiltonian(hc, p, cfg, 20000, 71);
        CHECK(a.samples == b.samples);
    }
    SUBCASE("different seeds: two-sample KS test at the 1% level on 1e5 samples") {
        const int n = 100000;
        mme::Ensemble a = mme::sample_hamiltonian(h, p, cfg, n, 72);
        mme::Ensemble b = mme::sample_hamiltonian(hc, p, cfg, n, 73);
        const double d = ks_statistic(a.samples.col(0), b.samples.col(0));
        // Critical value c(0.01) * sqrt((n+m)/(n m)) with c = 1.628.
        const double crit = 1.628 * std::sqrt(2.0 / n);
        CAPTURE(d);
        CHECK(d < crit);
    }
}

TEST_CASE("energy_checked names the offending term") {
    EffectiveHamiltonian h =
        EffectiveHamiltonian::maxent(ObservableSet::moments(), vec2(1e308, 1e308));
    auto s = h.make_scratch();
    Vector x(1);
    x << 10.0;
    try {
        h.energy_checked(x, s);
        FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("maxent") != std::string::npos);
    }
}

TEST_CASE("hamiltonian checkpoint bundles round-trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mme_ham_roundtrip";
    fs::create_directories(dir);

    Network disc = Network::cnn(CnnArch{4, 3, 3, 1}, OutputKind::SigmoidProb, 31);
    Network clas = Network::cnn(CnnArch{4, 3, 3, 10}, OutputKind::SoftmaxProb, 32);
    EffectiveHamiltonian h = EffectiveHamiltonian::maxent(ObservableSet::cnn(4, 2, 3, 3, 3),
                                                          vec2(0.4, -0.2))
                                 .with_discriminator_bias(disc, 5.0)
                                 .with_classifier_bias(clas, 6, 2.5)
                                 .with_constant_bias(0.75);
    const std::string path = (dir / "model.ckpt").string();
    h.save(path);

    EffectiveHamiltonian back = EffectiveHamiltonian::load(path);
    CHECK(back.has_base());
    CHECK(back.lambda() == h.lambda());
    REQUIRE(back.biases().size() == 3);
    CHECK(back.biases()[1].target == 6);
    CHECK(back.biases()[2].value == 0.75);

    auto sa = h.make_scratch(), sb = back.make_scratch();
    CounterRng rng(6);
    for (int k = 0; k < 5; ++k) {
        Vector x(16);
        for (int i = 0; i < 16; ++i) x(i) = mme::uniform01(rng);
        CHECK(back.energy(x, sb) == h.energy(x, sa));
    }
}
