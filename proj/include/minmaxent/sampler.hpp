#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "minmaxent/hamiltonian.hpp"
#include "minmaxent/metrics.hpp"
#include "minmaxent/rng.hpp"
#include "minmaxent/types.hpp"

namespace mme {

// Metropolis sampling of p(x) ~ exp(-H(x)) with persistent chains. H is any
// type providing input_dim(), make_scratch() and energy(const double*,
// scratch&); EffectiveHamiltonian is the main one, FunctionHamiltonian wraps
// closed-form energies for tests and demos. Proposals are either a Gaussian
// displacement of the whole vector or a Gaussian nudge of one random
// coordinate clamped to a box (the image policy). Acceptance is
// min(1, exp(H(x) - H(x'))); proposals with non-finite energy are rejected.

struct ProposalPolicy {
    enum class Kind { FullVector, SinglePixel };

    Kind kind = Kind::FullVector;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    /// Whole-vector Gaussian step; proposals leaving [lo,hi]^d are rejected.
    static ProposalPolicy full_vector(double lo = -20.0, double hi = 20.0);
    /// One coordinate per proposal, clamped to [lo,hi]. A sweep visits dim coordinates.
    static ProposalPolicy single_pixel(double lo = 0.0, double hi = 1.0);

    int proposals_per_sweep(int dim) const { return kind == Kind::FullVector ? 1 : dim; }
};

struct ChainState {
    Vector x;
    double energy = 0.0;  // cached H(x); refresh_chains recomputes after H changes
    double step_size = 0.5;
    CounterRng rng{0};
    long long proposals = 0, accepts = 0;                // lifetime
    long long window_proposals = 0, window_accepts = 0;  // since last adaptation
};

struct SamplerConfig {
    int n_chains = 64;
    int burn_in_sweeps = 500;  // fresh chains
    int refresh_sweeps = 10;   // persistent chains, before each measurement
    int thinning = 5;          // sweeps between retained samples
    double initial_step = 0.5;
    double target_acceptance = 0.4;
    int adapt_window = 100;  // minimum proposals per step-size decision
};

/// Closed-form energy wrapped into the sampler's hamiltonian shape.
class FunctionHamiltonian {
public:
    FunctionHamiltonian(int dim, std::function<double(const Vector&)> f)
        : dim_(dim), f_(std::move(f)) {
        if (dim < 1) throw std::invalid_argument("FunctionHamiltonian: dim must be >= 1");
    }

    struct Scratch {
        Vector buf;
    };

    int input_dim() const { return dim_; }
    Scratch make_scratch() const { return Scratch{Vector(dim_)}; }
    double energy(const double* x, Scratch& s) const {
        s.buf = Eigen::Map<const Vector>(x, dim_);
        return f_(s.buf);
    }

private:
    int dim_;
    std::function<double(const Vector&)> f_;
};

/// Multiplicative step-size update toward the target acceptance rate. Returns
/// false (and changes nothing) until the window holds at least min_window
/// proposals; on success the window resets.
bool adapt_step_size(ChainState& c, double target_acceptance = 0.4, int min_window = 100);

template <class H, class Scratch>
bool metropolis_step(const H& h, const ProposalPolicy& p, ChainState& c, Scratch& scratch,
                     Vector& buf) {
    const Index d = c.x.size();
    ++c.proposals;
    ++c.window_proposals;

    buf = c.x;
    if (p.kind == ProposalPolicy::Kind::FullVector) {
        for (Index i = 0; i < d; ++i) buf(i) += c.step_size * gaussian(c.rng);
        for (Index i = 0; i < d; ++i)
            if (buf(i) < p.lo || buf(i) > p.hi) return false;  // outside the sampling box
    } else {
        const Index i = uniform_index(c.rng, static_cast<int>(d));
        buf(i) = std::clamp(buf(i) + c.step_size * gaussian(c.rng), p.lo, p.hi);
    }

    const double e_new = h.energy(buf.data(), scratch);
    if (!std::isfinite(e_new)) return false;

    if (std::isfinite(c.energy)) {
        const double log_ratio = c.energy - e_new;
        if (log_ratio < 0.0 && uniform01(c.rng) >= std::exp(log_ratio)) return false;
    }
    // A non-finite cached energy accepts any finite-energy move outright.

    c.x.swap(buf);
    c.energy = e_new;
    ++c.accepts;
    ++c.window_accepts;
    return true;
}

template <class H, class Scratch>
void sweep(const H& h, const ProposalPolicy& p, ChainState& c, Scratch& scratch, Vector& buf) {
    const int reps = p.proposals_per_sweep(static_cast<int>(c.x.size()));
    for (int r = 0; r < reps; ++r) metropolis_step(h, p, c, scratch, buf);
}

namespace detail {

inline Vector chain_start(int dim, const ProposalPolicy& p, CounterRng& rng) {
    Vector x(dim);
    if (p.kind == ProposalPolicy::Kind::SinglePixel) {
        for (int i = 0; i < dim; ++i) x(i) = uniform(rng, p.lo, p.hi);
    } else {
        // Disperse starts; keep them well inside any sampling box.
        const bool boxed = std::isfinite(p.lo) && std::isfinite(p.hi);
        const double span = boxed ? std::min(1.0, 0.05 * (p.hi - p.lo)) : 1.0;
        const double mid = boxed ? 0.5 * (p.lo + p.hi) : 0.0;
        for (int i = 0; i < dim; ++i) x(i) = mid + span * gaussian(rng);
    }
    return x;
}

}  // namespace detail

/// Fresh chains: per-chain RNG streams derived from `seed`, dispersed starts,
/// burn-in with step adaptation.
template <class H>
std::vector<ChainState> init_chains(const H& h, const ProposalPolicy& p, const SamplerConfig& cfg,
                                    std::uint64_t seed) {
    if (cfg.n_chains < 1) throw std::invalid_argument("init_chains: need at least one chain");
    auto scratch = h.make_scratch();
    Vector buf;
    std::vector<ChainState> chains(cfg.n_chains);
    for (int k = 0; k < cfg.n_chains; ++k) {
        ChainState& c = chains[k];
        c.rng = CounterRng(CounterRng::derive(seed, static_cast<std::uint64_t>(k)));
        c.x = detail::chain_start(h.input_dim(), p, c.rng);
        c.energy = h.energy(c.x.data(), scratch);
        for (int t = 0; t < 1000 && !std::isfinite(c.energy); ++t) {
            c.x = detail::chain_start(h.input_dim(), p, c.rng);
            c.energy = h.energy(c.x.data(), scratch);
        }
        c.step_size = cfg.initial_step;
        for (int s = 0; s < cfg.burn_in_sweeps; ++s) {
            sweep(h, p, c, scratch, buf);
            adapt_step_size(c, cfg.target_acceptance, cfg.adapt_window);
        }
    }
    return chains;
}

/// Re-equilibrate persistent chains after the energy changed: recompute the
/// cached energies, then run `sweeps` sweeps with adaptation enabled.
template <class H>
void refresh_chains(const H& h, const ProposalPolicy& p, std::vector<ChainState>& chains,
                    const SamplerConfig& cfg, int sweeps) {
    auto scratch = h.make_scratch();
    Vector buf;
    for (ChainState& c : chains) {
        c.energy = h.energy(c.x.data(), scratch);
        for (int s = 0; s < sweeps; ++s) {
            sweep(h, p, c, scratch, buf);
            adapt_step_size(c, cfg.target_acceptance, cfg.adapt_window);
        }
    }
}

struct Ensemble {
    Matrix samples;   // n x dim, chain-major order
    Vector energies;  // n
    Matrix f_values;  // n x n_obs when the hamiltonian carries observables, else empty
    Vector f_means;
    Vector mean_param_grad;   // ensemble average of d(lambda . f)/dtheta, when requested
    double acceptance = 0.0;  // over the collection phase
};

/// Run every chain for n_sweeps sweeps, retaining one sample per `thinning`
/// sweeps. Step sizes stay frozen while measuring (detailed balance).
template <class H>
Ensemble run_ensemble(const H& h, const ProposalPolicy& p, std::vector<ChainState>& chains,
                      int n_sweeps, int thinning, bool with_param_grads = false) {
    if (chains.empty()) throw std::invalid_argument("run_ensemble: no chains");
    if (n_sweeps < 1) throw std::invalid_argument("run_ensemble: need at least one sweep");
    if (thinning < 1) throw std::invalid_argument("run_ensemble: thinning must be >= 1");
    auto scratch = h.make_scratch();
    Vector buf;
    const int d = h.input_dim();
    const int per_chain = n_sweeps / thinning;
    if (per_chain < 1)
        throw std::invalid_argument("run_ensemble: n_sweeps below thinning retains nothing");
    const int n = per_chain * static_cast<int>(chains.size());

    constexpr bool kHasObs = requires(const H& hh) {
        hh.has_base();
        hh.observables();
    };
    int n_obs = 0;
    [[maybe_unused]] ObsWorkspace obs_ws;
    if constexpr (kHasObs) {
        if (h.has_base()) {
            n_obs = h.observables().n_obs();
            obs_ws = h.observables().make_workspace();
        }
    }

    Ensemble e;
    e.samples.resize(n, d);
    e.energies.resize(n);
    if (n_obs > 0) e.f_values.resize(n, n_obs);

    long long proposals0 = 0, accepts0 = 0;
    for (const ChainState& c : chains) {
        proposals0 += c.proposals;
        accepts0 += c.accepts;
    }

    [[maybe_unused]] Vector f(n_obs), g, grad_acc;
    if constexpr (kHasObs) {
        if (with_param_grads && n_obs > 0) {
            g.resize(h.observables().n_params());
            grad_acc = Vector::Zero(h.observables().n_params());
        }
    }

    int row = 0;
    for (ChainState& c : chains) {
        for (int s = 1; s <= per_chain * thinning; ++s) {
            sweep(h, p, c, scratch, buf);
            if (s % thinning != 0) continue;
            e.samples.row(row) = c.x;
            e.energies(row) = c.energy;
            if constexpr (kHasObs) {
                if (n_obs > 0) {
                    h.observables().evaluate(c.x, f, obs_ws);
                    e.f_values.row(row) = f;
                    if (with_param_grads && g.size() > 0) {
                        h.observables().parameter_gradients(c.x, h.lambda(), g, obs_ws);
                        grad_acc += g;
                    }
                }
            }
            ++row;
        }
    }
    if (n_obs > 0) e.f_means = e.f_values.colwise().mean();
    if (grad_acc.size() > 0) e.mean_param_grad = grad_acc / n;

    long long proposals1 = 0, accepts1 = 0;
    for (const ChainState& c : chains) {
        proposals1 += c.proposals;
        accepts1 += c.accepts;
    }
    e.acceptance = proposals1 > proposals0
                       ? static_cast<double>(accepts1 - accepts0) / (proposals1 - proposals0)
                       : 0.0;
    return e;
}

/// init_chains + run_ensemble sized to yield at least n_samples, truncated to
/// exactly n_samples rows (stateless convenience for the tools).
template <class H>
Ensemble sample_hamiltonian(const H& h, const ProposalPolicy& p, const SamplerConfig& cfg,
                            int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("sample_hamiltonian: need at least one sample");
    auto chains = init_chains(h, p, cfg, seed);
    const int per_chain = (n_samples + cfg.n_chains - 1) / cfg.n_chains;
    Ensemble e = run_ensemble(h, p, chains, per_chain * cfg.thinning, cfg.thinning);
    e.samples.conservativeResize(n_samples, Eigen::NoChange);
    e.energies.conservativeResize(n_samples);
    if (e.f_values.rows() > 0) {
        e.f_values.conservativeResize(n_samples, Eigen::NoChange);
        e.f_means = e.f_values.colwise().mean();
    }
    return e;
}

/// Normalized exp(-H) for one-dimensional hamiltonians, tabulated on [lo,hi].
template <class H>
GridDensity grid_density(const H& h, double lo, double hi, int n_points) {
    if (h.input_dim() != 1)
        throw std::invalid_argument("grid_density: hamiltonian is not one-dimensional");
    GridDensity d = GridDensity::uniform_grid(lo, hi, n_points);
    auto scratch = h.make_scratch();
    Vector energy(n_points);
    for (int i = 0; i < n_points; ++i) {
        energy(i) = h.energy(&d.x(i), scratch);
        if (!std::isfinite(energy(i)))
            throw std::runtime_error("grid_density: non-finite energy at x = " +
                                     std::to_string(d.x(i)));
    }
    const double e_min = energy.minCoeff();
    d.p = (-(energy.array() - e_min)).exp();
    d.normalize();
    return d;
}

}  // namespace mme
