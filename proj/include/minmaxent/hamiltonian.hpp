#pragma once

#include <optional>
#include <string>
#include <vector>

#include "minmaxent/adam.hpp"
#include "minmaxent/network.hpp"
#include "minmaxent/observables.hpp"
#include "minmaxent/types.hpp"

namespace mme {

/// Lagrange multipliers with their optimizer state.
struct LagrangeState {
    Vector lambda;
    AdamState adam;

    explicit LagrangeState(int n_obs) : lambda(Vector::Zero(n_obs)) { adam.resize(n_obs); }
};

/// One additive term steering the sampling distribution.
struct BiasField {
    enum class Kind { Discriminator, Classifier, Constant };

    Kind kind = Kind::Constant;
    double alpha = 0.0;     // coupling strength (Discriminator/Classifier)
    int target = -1;        // class index favoured by a Classifier bias
    double value = 0.0;     // Constant offset
    std::optional<Network> net;  // frozen copy of the scoring network
};

/// Energy function H(x) defining the sampling density p(x) ~ exp(-H(x)).
///
/// The base term is lambda . f(x) over a frozen copy of an observable set;
/// bias fields add on top:
///   discriminator d:      + alpha * d(x)          (d in [0,1], 1 = "generated")
///   classifier h, class j: + alpha * (sum_{i != j} h_i(x) - h_j(x))
///   constant c:           + c
/// detach_base() drops the base term, keeping only the biases.
class EffectiveHamiltonian {
public:
    static EffectiveHamiltonian maxent(const ObservableSet& obs, const Vector& lambda);

    EffectiveHamiltonian with_discriminator_bias(const Network& net, double alpha) const;
    EffectiveHamiltonian with_classifier_bias(const Network& net, int target,
                                              double alpha) const;
    EffectiveHamiltonian with_constant_bias(double value) const;
    EffectiveHamiltonian detach_base() const;

    struct Scratch {
        std::optional<ObsWorkspace> obs;
        std::vector<ad::Workspace> bias;
        Vector prob;
    };
    Scratch make_scratch() const;

    int input_dim() const { return input_dim_; }
    bool has_base() const { return has_base_; }
    const ObservableSet& observables() const;
    const Vector& lambda() const { return lambda_; }
    const std::vector<BiasField>& biases() const { return biases_; }

    /// Fast path: may return non-finite values, which samplers treat as
    /// infinitely improbable proposals.
    double energy(const double* x, Scratch& s) const;
    double energy(const Vector& x, Scratch& s) const;

    /// Validating path: throws, naming the offending term, on non-finite energy.
    double energy_checked(const Vector& x, Scratch& s) const;

    /// Writes a manifest at `path` plus sibling files (`path` + ".obs",
    /// ".bias<k>.net") holding the frozen networks.
    void save(const std::string& path) const;
    static EffectiveHamiltonian load(const std::string& path);

private:
    EffectiveHamiltonian() = default;

    bool has_base_ = false;
    std::optional<ObservableSet> obs_;
    Vector lambda_;
    std::vector<BiasField> biases_;
    int input_dim_ = 0;
};

}  // namespace mme
