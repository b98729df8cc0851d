#pragma once

#include <cmath>

#include "minmaxent/types.hpp"

namespace mme {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// ADAM moment state for a flat parameter vector.
struct AdamState {
    Vector m;  // first moment
    Vector v;  // second moment, elementwise non-negative
    long step = 0;

    explicit AdamState(Index n = 0) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}

    void resize(Index n) {
        m = Vector::Zero(n);
        v = Vector::Zero(n);
        step = 0;
    }
};

/// One bias-corrected ADAM update: x <- x - eta * m_hat / (sqrt(v_hat) + eps).
inline void adam_update(Vector& x, const Vector& grad, AdamState& state, double eta,
                        const AdamParams& p = {}) {
    ++state.step;
    state.m = p.beta1 * state.m + (1.0 - p.beta1) * grad;
    state.v = p.beta2 * state.v + (1.0 - p.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
    x.array() -= eta * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + p.epsilon);
}

}  // namespace mme
