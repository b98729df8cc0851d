#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "minmaxent/adam.hpp"
#include "minmaxent/hamiltonian.hpp"
#include "minmaxent/observables.hpp"
#include "minmaxent/sampler.hpp"
#include "minmaxent/types.hpp"

namespace mme {

// Dual-loop fitting. The inner loop drives the Lagrange multipliers to match
// the training-set observable averages (Adam on chi-squared); the outer loop
// descends the model entropy in the observable parameters, using the identity
// that the entropy gradient equals the gradient of the auxiliary cost
//   S_aux = <lambda . f>_train - <lambda . f>_generated,
// with lambda held fixed and only f's parameters varying.

/// Target moments of the observables over the training set.
struct ConstraintStats {
    Vector mu;    // per-observable mean
    Vector var;   // unbiased per-observable variance, floored at var_floor
    int n = 0;
    static constexpr double var_floor = 1e-8;
};

ConstraintStats compute_constraints(const ObservableSet& obs, const Matrix& train_data);

/// chi^2 = sum_i (<f_i>_gen - mu_i)^2 / var_i.
double chi_squared(const Vector& f_means, const ConstraintStats& stats);

/// Gradient of chi^2 in lambda through the sampling distribution:
/// d<f_i>/dlambda_j = -Cov(f_i, f_j), estimated from the ensemble.
Vector chi2_lambda_gradient(const Matrix& f_values, const Vector& f_means,
                            const ConstraintStats& stats);

/// One Adam update of lambda against chi^2; returns the raw gradient. The
/// update itself sees the gradient with its norm clipped to grad_clip
/// (0 disables), which keeps early far-from-constraint spikes from
/// saturating Adam's second moment.
Vector lambda_step(LagrangeState& ls, const Ensemble& ensemble, const ConstraintStats& stats,
                   double eta, const AdamParams& ap, double grad_clip = 100.0);

/// S_aux evaluated at the current observable parameters.
double auxiliary_cost(const ObservableSet& obs, const Vector& lambda, const Matrix& train_data,
                      const Matrix& gen_samples);

/// d S_aux / d theta; equals the entropy gradient at fixed lambda.
Vector entropy_gradient(const ObservableSet& obs, const Vector& lambda, const Matrix& train_data,
                        const Matrix& gen_samples);

/// Plain descent update theta -= eta * grad. Throws on non-finite gradient.
void theta_step(ObservableSet& obs, const Vector& grad, double eta);

struct EpochRecord {
    int epoch = 0;
    double chi2 = 0.0;
    double mean_energy = 0.0;
    double grad_theta_norm = 0.0;
    double grad_lambda_norm = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double wall_seconds = 0.0;
    void save_csv(const std::string& path) const;
};

enum class TrainStatus { MaxEpochs, Converged, Diverged };
std::string to_string(TrainStatus s);

struct TrainConfig {
    int max_epochs = 1000;
    int lambda_steps_per_epoch = 5;
    double eta_lambda = 1e-2;
    double eta_theta = 1e-3;
    double eta_lambda_decay = 1.0;  // multiplies eta_lambda once per epoch
    double lambda_grad_clip = 100.0;  // norm cap on the chi^2 gradient fed to Adam; 0 = off
    AdamParams adam;

    int measure_sweeps = 25;  // sweeps per chain per gradient estimate (thinned retention)
    int train_batch = 0;      // samples of the training set per theta gradient; 0 = all
    SamplerConfig sampler;
    ProposalPolicy proposal = ProposalPolicy::full_vector();
    std::uint64_t seed = 1;

    double divergence_chi2 = 1e6;  // abort when chi^2 exceeds this or turns non-finite
    double chi2_tol = 0.0;         // > 0 enables early stopping on chi^2 ...
    double grad_theta_tol = 0.0;   // ... together with the entropy-gradient norm
    int patience = 10;             // consecutive epochs inside both tolerances required

    int checkpoint_every = 0;  // epochs between snapshots; 0 disables
    std::string checkpoint_path;

    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    ObservableSet observables;  // trained parameters
    LagrangeState lagrange;
    ConstraintStats stats;  // constraints at the final parameters
    TrainReport report;
    TrainStatus status = TrainStatus::MaxEpochs;

    EffectiveHamiltonian hamiltonian() const {
        return EffectiveHamiltonian::maxent(observables, lagrange.lambda);
    }
};

TrainResult train(ObservableSet obs, const Matrix& train_data, const TrainConfig& cfg,
                  std::optional<LagrangeState> warm_start = std::nullopt);

}  // namespace mme
