#include "minmaxent/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "minmaxent/io.hpp"

namespace mme {

ConstraintStats compute_constraints(const ObservableSet& obs, const Matrix& train_data) {
    const int n = static_cast<int>(train_data.rows());
    if (n < 1) throw std::invalid_argument("compute_constraints: empty training set");
    if (train_data.cols() != obs.input_dim())
        throw std::invalid_argument("compute_constraints: data has " +
                                    std::to_string(train_data.cols()) + " columns, observables expect " +
                                    std::to_string(obs.input_dim()));
    const int m = obs.n_obs();
    ObsWorkspace ws = obs.make_workspace();
    Vector f(m), sum = Vector::Zero(m), sum2 = Vector::Zero(m);
    Vector x(obs.input_dim());
    for (int i = 0; i < n; ++i) {
        x = train_data.row(i);
        obs.evaluate(x, f, ws);
        sum += f;
        sum2 += f.cwiseProduct(f);
    }
    ConstraintStats s;
    s.n = n;
    s.mu = sum / n;
    if (n > 1) {
        // Unbiased variance; the floor keeps near-constant observables from
        // blowing up the chi^2 weights.
        s.var = ((sum2 - n * s.mu.cwiseProduct(s.mu)) / (n - 1)).cwiseMax(ConstraintStats::var_floor);
    } else {
        s.var = Vector::Constant(m, ConstraintStats::var_floor);
    }
    return s;
}

double chi_squared(const Vector& f_means, const ConstraintStats& stats) {
    if (f_means.size() != stats.mu.size())
        throw std::invalid_argument("chi_squared: observable count mismatch");
    return ((f_means - stats.mu).array().square() / stats.var.array()).sum();
}

Vector chi2_lambda_gradient(const Matrix& f_values, const Vector& f_means,
                            const ConstraintStats& stats) {
    const Index n = f_values.rows();
    if (n < 2) throw std::invalid_argument("chi2_lambda_gradient: need at least two samples");
    if (f_values.cols() != stats.mu.size() || f_means.size() != stats.mu.size())
        throw std::invalid_argument("chi2_lambda_gradient: observable count mismatch");
    Matrix centered = f_values.rowwise() - f_means.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Vector r = (f_means - stats.mu).cwiseQuotient(stats.var);
    return -2.0 * (cov * r);
}

Vector lambda_step(LagrangeState& ls, const Ensemble& ensemble, const ConstraintStats& stats,
                   double eta, const AdamParams& ap, double grad_clip) {
    Vector grad = chi2_lambda_gradient(ensemble.f_values, ensemble.f_means, stats);
    // Far from the constraints (e.g. the initial flat model filling the
    // sampling box) the raw gradient can be orders of magnitude above its
    // converged scale; unclipped, such spikes park Adam's second moment so
    // high that later steps starve. Clip the norm fed to Adam.
    Vector used = grad;
    if (grad_clip > 0.0) {
        const double n = used.norm();
        if (n > grad_clip) used *= grad_clip / n;
    }
    adam_update(ls.lambda, used, ls.adam, eta, ap);
    return grad;
}

double auxiliary_cost(const ObservableSet& obs, const Vector& lambda, const Matrix& train_data,
                      const Matrix& gen_samples) {
    if (train_data.rows() < 1 || gen_samples.rows() < 1)
        throw std::invalid_argument("auxiliary_cost: empty sample set");
    ObsWorkspace ws = obs.make_workspace();
    Vector x(obs.input_dim());
    double train_term = 0.0, gen_term = 0.0;
    for (Index i = 0; i < train_data.rows(); ++i) {
        x = train_data.row(i);
        train_term += obs.weighted_value(x.data(), lambda, ws);
    }
    for (Index i = 0; i < gen_samples.rows(); ++i) {
        x = gen_samples.row(i);
        gen_term += obs.weighted_value(x.data(), lambda, ws);
    }
    return train_term / train_data.rows() - gen_term / gen_samples.rows();
}

Vector entropy_gradient(const ObservableSet& obs, const Vector& lambda, const Matrix& train_data,
                        const Matrix& gen_samples) {
    if (train_data.rows() < 1 || gen_samples.rows() < 1)
        throw std::invalid_argument("entropy_gradient: empty sample set");
    ObsWorkspace ws = obs.make_workspace();
    Vector x(obs.input_dim());
    Vector g(obs.n_params());
    Vector acc = Vector::Zero(obs.n_params());
    for (Index i = 0; i < train_data.rows(); ++i) {
        x = train_data.row(i);
        obs.parameter_gradients(x, lambda, g, ws);
        acc += g;
    }
    acc /= static_cast<double>(train_data.rows());
    Vector acc_gen = Vector::Zero(obs.n_params());
    for (Index i = 0; i < gen_samples.rows(); ++i) {
        x = gen_samples.row(i);
        obs.parameter_gradients(x, lambda, g, ws);
        acc_gen += g;
    }
    acc -= acc_gen / static_cast<double>(gen_samples.rows());
    return acc;
}

void theta_step(ObservableSet& obs, const Vector& grad, double eta) {
    if (grad.size() != obs.n_params())
        throw std::invalid_argument("theta_step: gradient length does not match parameters");
    if (!grad.allFinite()) throw std::invalid_argument("theta_step: non-finite gradient");
    obs.theta() -= eta * grad;
}

void TrainReport::save_csv(const std::string& path) const {
    std::ostringstream out;
    out << "epoch,chi2,mean_energy,grad_theta_norm,grad_lambda_norm\n";
    char buf[160];
    for (const EpochRecord& r : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.chi2,
                      r.mean_energy, r.grad_theta_norm, r.grad_lambda_norm);
        out << buf;
    }
    io::atomic_write(path, out.str());
}

std::string to_string(TrainStatus s) {
    switch (s) {
        case TrainStatus::MaxEpochs: return "max_epochs";
        case TrainStatus::Converged: return "converged";
        case TrainStatus::Diverged: return "diverged";
    }
    return "?";
}

namespace {

Matrix sample_rows(const Matrix& data, int count, CounterRng& rng) {
    if (count <= 0 || count >= data.rows()) return data;
    // Partial Fisher-Yates over an index vector.
    std::vector<Index> idx(data.rows());
    std::iota(idx.begin(), idx.end(), Index{0});
    Matrix out(count, data.cols());
    for (int i = 0; i < count; ++i) {
        const int j = i + uniform_index(rng, static_cast<int>(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.row(i) = data.row(idx[i]);
    }
    return out;
}

}  // namespace

TrainResult train(ObservableSet obs, const Matrix& train_data, const TrainConfig& cfg,
                  std::optional<LagrangeState> warm_start) {
    if (cfg.max_epochs < 1) throw std::invalid_argument("train: max_epochs must be positive");
    if (cfg.lambda_steps_per_epoch < 1)
        throw std::invalid_argument("train: need at least one lambda step per epoch");
    if (train_data.cols() != obs.input_dim())
        throw std::invalid_argument("train: data dimension does not match observables");

    TrainResult res{std::move(obs), LagrangeState(0), {}, {}, TrainStatus::MaxEpochs};
    ObservableSet& model = res.observables;
    res.lagrange = warm_start ? std::move(*warm_start) : LagrangeState(model.n_obs());
    if (res.lagrange.lambda.size() != model.n_obs())
        throw std::invalid_argument("train: warm start lambda size mismatch");
    LagrangeState& ls = res.lagrange;

    CounterRng batch_rng(CounterRng::derive(cfg.seed, 0xBA7C4));
    const bool update_theta = cfg.eta_theta != 0.0 && model.n_params() > 0;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<ChainState> chains;
    double eta_l = cfg.eta_lambda;
    int below_tol = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        res.stats = compute_constraints(model, train_data);

        double grad_lambda_norm = 0.0;
        for (int k = 0; k < cfg.lambda_steps_per_epoch; ++k) {
            EffectiveHamiltonian h = EffectiveHamiltonian::maxent(model, ls.lambda);
            if (chains.empty())
                chains = init_chains(h, cfg.proposal, cfg.sampler, cfg.seed);
            else
                refresh_chains(h, cfg.proposal, chains, cfg.sampler, cfg.sampler.refresh_sweeps);
            Ensemble ens =
                run_ensemble(h, cfg.proposal, chains, cfg.measure_sweeps, cfg.sampler.thinning);
            Vector grad = lambda_step(ls, ens, res.stats, eta_l, cfg.adam, cfg.lambda_grad_clip);
            grad_lambda_norm = grad.norm();
        }

        // Measurement ensemble at the updated multipliers; reused for the
        // entropy gradient so chi^2 and the theta step see the same state.
        EffectiveHamiltonian h = EffectiveHamiltonian::maxent(model, ls.lambda);
        refresh_chains(h, cfg.proposal, chains, cfg.sampler, cfg.sampler.refresh_sweeps);
        Ensemble ens =
            run_ensemble(h, cfg.proposal, chains, cfg.measure_sweeps, cfg.sampler.thinning);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.chi2 = chi_squared(ens.f_means, res.stats);
        rec.mean_energy = ens.energies.mean();
        rec.grad_lambda_norm = grad_lambda_norm;

        bool theta_finite = true;
        if (update_theta) {
            const Matrix batch = cfg.train_batch > 0 && cfg.train_batch < train_data.rows()
                                     ? sample_rows(train_data, cfg.train_batch, batch_rng)
                                     : train_data;
            Vector g = entropy_gradient(model, ls.lambda, batch, ens.samples);
            rec.grad_theta_norm = g.norm();
            theta_finite = g.allFinite();
            if (theta_finite) theta_step(model, g, cfg.eta_theta);
        }

        res.report.epochs.push_back(rec);
        if (cfg.on_epoch) cfg.on_epoch(rec);

        if (!theta_finite || !std::isfinite(rec.chi2) || rec.chi2 > cfg.divergence_chi2 ||
            !ls.lambda.allFinite()) {
            res.status = TrainStatus::Diverged;
            break;
        }
        if (cfg.chi2_tol > 0.0) {
            const bool theta_ok = !update_theta || cfg.grad_theta_tol <= 0.0 ||
                                  rec.grad_theta_norm < cfg.grad_theta_tol;
            below_tol = rec.chi2 < cfg.chi2_tol && theta_ok ? below_tol + 1 : 0;
            if (below_tol >= cfg.patience) {
                res.status = TrainStatus::Converged;
                break;
            }
        }
        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            epoch % cfg.checkpoint_every == 0) {
            EffectiveHamiltonian::maxent(model, ls.lambda).save(cfg.checkpoint_path);
        }
        eta_l *= cfg.eta_lambda_decay;
    }

    res.stats = compute_constraints(model, train_data);
    res.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace mme
