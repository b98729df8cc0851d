#include "minmaxent/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "minmaxent/dataset.hpp"
#include "minmaxent/hamiltonian.hpp"
#include "minmaxent/io.hpp"
#include "minmaxent/metrics.hpp"
#include "minmaxent/nets.hpp"
#include "minmaxent/observables.hpp"
#include "minmaxent/pca.hpp"
#include "minmaxent/sampler.hpp"
#include "minmaxent/trainer.hpp"
#include "minmaxent/vae.hpp"

namespace mme {
namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using Summary = std::vector<std::pair<std::string, std::string>>;

void write_summary(const fs::path& path, const Summary& rows) {
    std::string out;
    for (const auto& [k, v] : rows) out += k + " " + v + "\n";
    io::atomic_write(path.string(), out);
}

/// Samples CSV, tolerating an optional header row.
Matrix load_numeric_csv(const std::string& path) {
    try {
        return io::read_csv(path, false);
    } catch (const std::invalid_argument&) {
        return io::read_csv(path, true);
    }
}

std::string sample_header(int dim) {
    if (dim == 1) return "x";
    std::string h;
    for (int j = 0; j < dim; ++j) h += (j ? ",x" : "x") + std::to_string(j);
    return h;
}

int image_side_of(int dim) {
    const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
    return s * s == dim ? s : 0;
}

void write_tiles(const fs::path& dir, const std::string& stem, const Matrix& samples, int side,
                 int columns) {
    io::TiledImage tile = io::tile_images(samples, side, columns);
    io::write_png_gray((dir / (stem + ".png")).string(), tile.pixels, tile.width, tile.height);
    io::write_pgm((dir / (stem + ".pgm")).string(), tile.pixels, tile.width, tile.height);
}

// ---- shared option groups --------------------------------------------------

struct CommonOpts {
    std::string out = "runs";
    std::string name;
    std::uint64_t seed = 1;
};

void add_common(CLI::App* sub, CommonOpts& o, std::uint64_t default_seed) {
    o.name = sub->get_name();
    o.seed = default_seed;
    sub->add_option("--out", o.out, "Output root directory")->envname("MINMAXENT_OUT");
    sub->add_option("--name", o.name, "Run name; artifacts go to <out>/<name>");
    sub->add_option("--seed", o.seed, "Seed for all stochastic components of this run");
}

struct MixtureOpts {
    std::string kind = "gaussian";
    double loc1 = -2.0, scale1 = 0.5, loc2 = 2.0, scale2 = 0.5;
};

void add_mixture(CLI::App* sub, MixtureOpts& m) {
    sub->add_option("--kind", m.kind, "Mixture component shape")
        ->transform(CLI::IsMember({"gaussian", "cauchy"}));
    sub->add_option("--loc1", m.loc1, "First component center");
    sub->add_option("--scale1", m.scale1, "First component sigma (gaussian) or HWHM (cauchy)");
    sub->add_option("--loc2", m.loc2, "Second component center");
    sub->add_option("--scale2", m.scale2, "Second component sigma (gaussian) or HWHM (cauchy)");
}

PeakShape shape_of(const MixtureOpts& m) {
    return m.kind == "cauchy" ? PeakShape::Cauchy : PeakShape::Gaussian;
}

struct GridOpts {
    double lo = -8.0, hi = 8.0;
    int bins = 161;
};

void add_grid(CLI::App* sub, GridOpts& g) {
    sub->add_option("--plot-lo", g.lo, "Density grid lower edge");
    sub->add_option("--plot-hi", g.hi, "Density grid upper edge");
    sub->add_option("--plot-bins", g.bins, "Density grid points / histogram bins");
}

void add_train_flags(CLI::App* sub, TrainConfig& tc) {
    sub->add_option("--epochs", tc.max_epochs, "Training epoch budget");
    sub->add_option("--lambda-steps", tc.lambda_steps_per_epoch,
                    "Multiplier updates per epoch before the observable-parameter step");
    sub->add_option("--eta-lambda", tc.eta_lambda, "Adam learning rate for the multipliers");
    sub->add_option("--eta-lambda-decay", tc.eta_lambda_decay,
                    "Per-epoch multiplicative decay of --eta-lambda");
    sub->add_option("--eta-theta", tc.eta_theta,
                    "Descent rate for the observable parameters (0 freezes them)");
    sub->add_option("--chains", tc.sampler.n_chains, "Persistent sampling chains");
    sub->add_option("--burn-in", tc.sampler.burn_in_sweeps, "Burn-in sweeps for fresh chains");
    sub->add_option("--refresh", tc.sampler.refresh_sweeps,
                    "Re-equilibration sweeps after each energy update");
    sub->add_option("--thinning", tc.sampler.thinning, "Sweeps between retained samples");
    sub->add_option("--measure-sweeps", tc.measure_sweeps,
                    "Sweeps per chain per measurement ensemble");
    sub->add_option("--step", tc.sampler.initial_step, "Initial proposal step size");
    sub->add_option("--batch", tc.train_batch,
                    "Training rows per parameter gradient (0 uses the whole set)");
    sub->add_option("--chi2-tol", tc.chi2_tol,
                    "Early-stop chi^2 tolerance (0 disables early stopping)");
    sub->add_option("--grad-tol", tc.grad_theta_tol,
                    "Early-stop entropy-gradient tolerance (used with --chi2-tol)");
    sub->add_option("--patience", tc.patience,
                    "Consecutive in-tolerance epochs required to stop early");
    sub->add_option("--checkpoint-every", tc.checkpoint_every,
                    "Epochs between model snapshots (0 disables)");
}

Summary train_summary(const TrainResult& res, const Ensemble& ens) {
    Summary s;
    s.emplace_back("status", to_string(res.status));
    s.emplace_back("epochs", std::to_string(res.report.epochs.size()));
    if (!res.report.epochs.empty()) {
        s.emplace_back("final_chi2", fmt(res.report.epochs.back().chi2));
        s.emplace_back("final_grad_theta_norm", fmt(res.report.epochs.back().grad_theta_norm));
    }
    s.emplace_back("wall_seconds", fmt(res.report.wall_seconds));
    s.emplace_back("sample_acceptance", fmt(ens.acceptance));
    s.emplace_back("sample_mean_energy", fmt(ens.energies.mean()));
    return s;
}

// ---- subcommands -----------------------------------------------------------

struct PcaDemoOpts {
    CommonOpts c;
    double s11 = 3.0, s22 = 2.0, s12 = 1.0;
    int grid = 2001;
};

void run_pca_demo(const PcaDemoOpts& o, const fs::path& dir) {
    Covariance2D cov{o.s11, o.s22, o.s12};
    cov.validate();
    if (o.grid < 3) throw std::runtime_error("pca-demo: --grid must be at least 3");

    const double quarter = std::atan(1.0);  // pi/4
    Matrix scan(o.grid, 3);
    int argmin = 0;
    for (int i = 0; i < o.grid; ++i) {
        const double t = -quarter + 2.0 * quarter * i / (o.grid - 1);
        scan(i, 0) = t;
        scan(i, 1) = entropy_at(cov, t);
        scan(i, 2) = off_diagonal(cov, t);
        if (scan(i, 1) < scan(argmin, 1)) argmin = i;
    }
    io::write_csv((dir / "entropy_scan.csv").string(), "theta,entropy,off_diagonal", scan);

    const double t_opt = optimal_angle(cov);
    const auto [v1, v2] = rotated_variances(cov, t_opt);
    write_summary(dir / "summary.txt",
                  {{"optimal_angle", fmt(t_opt)},
                   {"grid_argmin", fmt(scan(argmin, 0))},
                   {"entropy_min", fmt(entropy_at(cov, t_opt))},
                   {"entropy_axis_aligned", fmt(entropy_at(cov, 0.0))},
                   {"v1", fmt(v1)},
                   {"v2", fmt(v2)},
                   {"det", fmt(cov.det())}});
}

struct Train1dOpts {
    CommonOpts c;
    MixtureOpts mix;
    int n = 1000;
    std::string data;
    int n_obs = 2;
    std::vector<int> hidden = {16, 16};
    double box = 20.0;
    int n_sample = 20000;
    GridOpts grid;
    TrainConfig tc;
};

void run_train_1d(Train1dOpts& o, const fs::path& dir) {
    Matrix data;
    const bool synthetic = o.data.empty();
    if (synthetic) {
        data = synth_bimodal(o.n, shape_of(o.mix), o.mix.loc1, o.mix.scale1, o.mix.loc2,
                             o.mix.scale2, o.c.seed)
                   .x;
    } else {
        data = load_numeric_csv(o.data);
        if (data.cols() != 1) throw std::runtime_error("train-1d: --data must be a one-column csv");
    }
    io::write_csv((dir / "dataset.csv").string(), "x", data);

    o.tc.seed = o.c.seed;
    o.tc.proposal = ProposalPolicy::full_vector(-o.box, o.box);
    if (o.tc.checkpoint_every > 0) o.tc.checkpoint_path = (dir / "checkpoint.ckpt").string();
    TrainResult res = train(ObservableSet::mlp(1, o.hidden, o.n_obs, o.c.seed + 1), data, o.tc);

    res.report.save_csv((dir / "report.csv").string());
    EffectiveHamiltonian h = res.hamiltonian();
    h.save((dir / "model.ckpt").string());

    GridDensity gd = grid_density(h, o.grid.lo, o.grid.hi, o.grid.bins);
    Matrix dens(gd.x.size(), 2);
    dens.col(0) = gd.x;
    dens.col(1) = gd.p;
    io::write_csv((dir / "density.csv").string(), "x,p", dens);

    Ensemble ens = sample_hamiltonian(h, o.tc.proposal, o.tc.sampler, o.n_sample, o.c.seed + 2);
    io::write_csv((dir / "samples.csv").string(), "x", ens.samples);

    Summary s = train_summary(res, ens);
    s.emplace_back("modes", std::to_string(count_modes(gd)));
    if (synthetic) {
        GridDensity truth = mixture_density(gd.x, shape_of(o.mix), o.mix.loc1, o.mix.scale1,
                                            o.mix.loc2, o.mix.scale2);
        s.emplace_back("kl_true_model", fmt(kl_divergence(truth, gd)));
    }
    write_summary(dir / "summary.txt", s);
}

struct TrainImageOpts {
    CommonOpts c;
    std::string data = "data/digits.csv";
    int n_train = 200;
    int n_obs = 16, channels = 8, ksize = 3;
    int n_sample = 64, columns = 8;
    TrainConfig tc;
};

void run_train_image(TrainImageOpts& o, const fs::path& dir) {
    Dataset full = load_digits(o.data);
    Dataset tr = o.n_train > 0 && o.n_train < full.n() ? subset(full, o.n_train, o.c.seed + 3, true)
                                                       : std::move(full);
    const int side = image_side_of(tr.dim());
    if (side == 0) throw std::runtime_error("train-image: rows are not square images");
    write_tiles(dir, "train_tiles", tr.x.topRows(std::min<Index>(tr.n(), 64)), side, o.columns);

    o.tc.seed = o.c.seed;
    o.tc.proposal = ProposalPolicy::single_pixel();
    if (o.tc.checkpoint_every > 0) o.tc.checkpoint_path = (dir / "checkpoint.ckpt").string();
    TrainResult res = train(ObservableSet::cnn(side, o.n_obs, o.c.seed + 1, o.channels, o.ksize),
                            tr.x, o.tc);

    res.report.save_csv((dir / "report.csv").string());
    EffectiveHamiltonian h = res.hamiltonian();
    h.save((dir / "model.ckpt").string());

    Ensemble ens = sample_hamiltonian(h, o.tc.proposal, o.tc.sampler, o.n_sample, o.c.seed + 2);
    io::write_csv((dir / "samples.csv").string(), sample_header(tr.dim()), ens.samples);
    write_tiles(dir, "samples", ens.samples, side, o.columns);

    write_summary(dir / "summary.txt", train_summary(res, ens));
}

struct SampleOpts {
    CommonOpts c;
    std::string model;
    int n = 1000;
    std::string proposal = "gauss";
    double lo = -20.0, hi = 20.0;
    SamplerConfig sc;
    int side = -1, columns = 8;
};

void add_sampler_flags(CLI::App* sub, SampleOpts& o) {
    sub->add_option("--n", o.n, "Samples to draw");
    sub->add_option("--proposal", o.proposal,
                    "Proposal move: whole-vector gaussian, or one pixel clamped to [0,1]")
        ->transform(CLI::IsMember({"gauss", "pixel"}));
    sub->add_option("--lo", o.lo, "Sampling box lower bound (gauss proposal)");
    sub->add_option("--hi", o.hi, "Sampling box upper bound (gauss proposal)");
    sub->add_option("--chains", o.sc.n_chains, "Independent chains");
    sub->add_option("--burn-in", o.sc.burn_in_sweeps, "Burn-in sweeps per chain");
    sub->add_option("--thinning", o.sc.thinning, "Sweeps between retained samples");
    sub->add_option("--step", o.sc.initial_step, "Initial proposal step size");
    sub->add_option("--side", o.side,
                    "Tile samples as side x side images (-1 auto-detects, 0 disables)");
    sub->add_option("--columns", o.columns, "Tiling columns for image output");
}

ProposalPolicy policy_of(const SampleOpts& o) {
    return o.proposal == "pixel" ? ProposalPolicy::single_pixel()
                                 : ProposalPolicy::full_vector(o.lo, o.hi);
}

void write_sample_artifacts(const fs::path& dir, const SampleOpts& o, const Ensemble& ens,
                            Summary extra = {}) {
    const int dim = static_cast<int>(ens.samples.cols());
    io::write_csv((dir / "samples.csv").string(), sample_header(dim), ens.samples);
    io::write_csv((dir / "energies.csv").string(), "energy", ens.energies);
    const int side = o.side >= 0 ? o.side : (dim > 1 ? image_side_of(dim) : 0);
    if (side > 0) write_tiles(dir, "samples", ens.samples, side, o.columns);

    Summary s{{"n", std::to_string(ens.samples.rows())},
              {"dim", std::to_string(dim)},
              {"acceptance", fmt(ens.acceptance)},
              {"mean_energy", fmt(ens.energies.mean())}};
    s.insert(s.end(), extra.begin(), extra.end());
    write_summary(dir / "summary.txt", s);
}

void run_sample(const SampleOpts& o, const fs::path& dir) {
    EffectiveHamiltonian h = EffectiveHamiltonian::load(o.model);
    Ensemble ens = sample_hamiltonian(h, policy_of(o), o.sc, o.n, o.c.seed);
    write_sample_artifacts(dir, o, ens);
}

struct BiasSampleOpts {
    SampleOpts s;  // model + sampling; proposal defaults to pixel
    std::string discriminator, classifier;
    int target = -1;
    double alpha = 5.0;
    bool detach = false;
};

void run_bias_sample(const BiasSampleOpts& o, const fs::path& dir) {
    EffectiveHamiltonian base = EffectiveHamiltonian::load(o.s.model);
    const bool use_disc = !o.discriminator.empty();
    Network net = Network::load(use_disc ? o.discriminator : o.classifier);
    EffectiveHamiltonian h = use_disc
                                 ? base.with_discriminator_bias(net, o.alpha)
                                 : base.with_classifier_bias(net, o.target, o.alpha);
    if (o.detach) h = h.detach_base();

    Ensemble ens = sample_hamiltonian(h, policy_of(o.s), o.s.sc, o.s.n, o.s.c.seed);

    // Score every sample with the bias network, and track the base energy so
    // biased runs can be compared against the unbiased model.
    const int n = static_cast<int>(ens.samples.rows());
    ad::Workspace ws = net.make_workspace();
    Summary extra{{"alpha", fmt(o.alpha)}, {"detach", o.detach ? "1" : "0"}};
    if (use_disc) {
        Vector scores(n);
        for (int i = 0; i < n; ++i) scores(i) = net.score(ens.samples.row(i).transpose(), ws);
        io::write_csv((dir / "scores.csv").string(), "score", scores);
        const ScoreSummary sum = score_summary(scores);
        extra.emplace_back("score_mean", fmt(sum.mean));
        extra.emplace_back("score_stdev", fmt(sum.stdev));
    } else {
        Matrix probs(n, net.n_out() + 1);
        Vector p(net.n_out()), xi(ens.samples.cols());
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            xi = ens.samples.row(i);  // rows are strided in the column-major store
            net.prob(xi.data(), p, ws);
            Index arg;
            p.maxCoeff(&arg);
            probs.row(i).head(net.n_out()) = p;
            probs(i, net.n_out()) = static_cast<double>(arg);
            hits += arg == o.target;
        }
        std::string head;
        for (int j = 0; j < net.n_out(); ++j) head += "p" + std::to_string(j) + ",";
        io::write_csv((dir / "scores.csv").string(), head + "assigned", probs);
        extra.emplace_back("target", std::to_string(o.target));
        extra.emplace_back("target_fraction", fmt(static_cast<double>(hits) / n));
    }
    auto scratch = base.make_scratch();
    Vector base_energy(n), bx(ens.samples.cols());
    for (int i = 0; i < n; ++i) {
        bx = ens.samples.row(i);
        base_energy(i) = base.energy(bx, scratch);
    }
    extra.emplace_back("base_mean_energy", fmt(base_energy.mean()));
    io::write_csv((dir / "base_energies.csv").string(), "energy", base_energy);

    write_sample_artifacts(dir, o.s, ens, std::move(extra));
}

struct TrainVaeOpts {
    CommonOpts c;
    MixtureOpts mix;
    int n = 1000;
    std::string data;
    int latent = 2;
    std::vector<int> enc_hidden = {16, 16}, dec_hidden = {16, 16};
    double noise = 0.1;
    int n_sample = 20000;
    GridOpts grid;
    VaeTrainConfig vc;
};

void run_train_vae(TrainVaeOpts& o, const fs::path& dir) {
    Matrix data;
    const bool synthetic = o.data.empty();
    if (synthetic) {
        data = synth_bimodal(o.n, shape_of(o.mix), o.mix.loc1, o.mix.scale1, o.mix.loc2,
                             o.mix.scale2, o.c.seed)
                   .x;
    } else {
        data = load_numeric_csv(o.data);
    }
    io::write_csv((dir / "dataset.csv").string(), sample_header(static_cast<int>(data.cols())),
                  data);

    VaeModel model = VaeModel::make(static_cast<int>(data.cols()), o.latent, o.enc_hidden,
                                    o.dec_hidden, o.noise, o.c.seed + 1);
    o.vc.seed = o.c.seed;
    VaeTrainResult res = train_vae(model, data, o.vc);
    io::write_csv((dir / "report.csv").string(), "step,neg_elbo,recon,kl", res.record);
    model.save((dir / "vae.ckpt").string());

    Matrix samples = sample_vae(model, o.n_sample, o.c.seed + 2);
    io::write_csv((dir / "samples.csv").string(), sample_header(static_cast<int>(samples.cols())),
                  samples);

    Summary s{{"diverged", res.diverged ? "1" : "0"},
              {"neg_elbo", fmt(-res.final_elbo.total)},
              {"recon", fmt(res.final_elbo.recon)},
              {"kl_latent", fmt(res.final_elbo.kl)},
              {"n_params", std::to_string(model.n_params())}};
    if (data.cols() == 1) {
        Histogram1D hist(o.grid.lo, o.grid.hi, o.grid.bins);
        hist.add_all(samples.col(0));
        GridDensity gd = hist.density();
        Matrix dens(gd.x.size(), 2);
        dens.col(0) = gd.x;
        dens.col(1) = gd.p;
        io::write_csv((dir / "density.csv").string(), "x,p", dens);
        s.emplace_back("modes", std::to_string(count_modes(gd)));
        if (synthetic) {
            GridDensity truth = mixture_density(gd.x, shape_of(o.mix), o.mix.loc1, o.mix.scale1,
                                                o.mix.loc2, o.mix.scale2);
            s.emplace_back("kl_true_model", fmt(kl_divergence(truth, gd)));
        }
    }
    write_summary(dir / "summary.txt", s);
}

struct EvalKlOpts {
    CommonOpts c;
    std::string samples, model;
    int n = 200000;
    double lo = -20.0, hi = 20.0;
    MixtureOpts mix;
    GridOpts grid;
    SamplerConfig sc;
};

void run_eval_kl(const EvalKlOpts& o, const fs::path& dir) {
    Vector xs;
    if (!o.samples.empty()) {
        Matrix m = load_numeric_csv(o.samples);
        if (m.cols() != 1) throw std::runtime_error("eval-kl: --samples must be a one-column csv");
        xs = m.col(0);
    } else {
        EffectiveHamiltonian h = EffectiveHamiltonian::load(o.model);
        Ensemble ens = sample_hamiltonian(h, ProposalPolicy::full_vector(o.lo, o.hi), o.sc, o.n,
                                          o.c.seed);
        xs = ens.samples.col(0);
    }
    Histogram1D hist(o.grid.lo, o.grid.hi, o.grid.bins);
    hist.add_all(xs);
    GridDensity q = hist.density();
    GridDensity truth =
        mixture_density(q.x, shape_of(o.mix), o.mix.loc1, o.mix.scale1, o.mix.loc2, o.mix.scale2);
    const double kl = kl_divergence(truth, q);

    Matrix row(1, 1);
    row(0, 0) = kl;
    io::write_csv((dir / "kl.csv").string(), "kl", row);
    write_summary(dir / "summary.txt", {{"kl", fmt(kl)},
                                        {"n", std::to_string(xs.size())},
                                        {"out_of_range", std::to_string(hist.out_of_range)}});
    std::cout << "kl " << fmt(kl) << "\n";
}

struct TrainDiscOpts {
    CommonOpts c;
    std::string real;
    int n_real = 0;
    std::vector<std::string> generated;
    std::string gen_model;
    int n_gen = 0;
    int channels = 8, ksize = 3;
    NetTrainConfig nc;
    SamplerConfig sc;
};

void run_train_discriminator(TrainDiscOpts& o, const fs::path& dir) {
    Dataset real = load_digits(o.real);
    if (o.n_real > 0 && o.n_real < real.n()) real = subset(real, o.n_real, o.c.seed + 1, true);

    Matrix gen;
    if (!o.gen_model.empty()) {
        EffectiveHamiltonian h = EffectiveHamiltonian::load(o.gen_model);
        const int n = o.n_gen > 0 ? o.n_gen : real.n();
        gen = sample_hamiltonian(h, ProposalPolicy::single_pixel(), o.sc, n, o.c.seed + 2).samples;
    } else {
        for (const std::string& path : o.generated) {
            Matrix m = load_numeric_csv(path);
            if (gen.size() == 0) {
                gen = std::move(m);
            } else {
                if (m.cols() != gen.cols())
                    throw std::runtime_error("train-discriminator: generated sets disagree on dim");
                gen.conservativeResize(gen.rows() + m.rows(), Eigen::NoChange);
                gen.bottomRows(m.rows()) = m;
            }
        }
    }
    if (gen.rows() == 0) throw std::runtime_error("train-discriminator: no generated samples");

    const int side = image_side_of(real.dim());
    if (side == 0 || real.dim() != gen.cols())
        throw std::runtime_error("train-discriminator: real/generated dimensions disagree");
    o.nc.seed = o.c.seed;
    NetTrainResult res =
        train_discriminator(real.x, gen, CnnArch{side, o.channels, o.ksize, 1}, o.nc);
    res.net.save((dir / "discriminator.ckpt").string());
    write_summary(dir / "report.txt", {{"holdout_accuracy", fmt(res.holdout_accuracy)},
                                       {"final_loss", fmt(res.final_loss)},
                                       {"n_train", std::to_string(res.n_train)},
                                       {"n_holdout", std::to_string(res.n_holdout)},
                                       {"n_real", std::to_string(real.n())},
                                       {"n_generated", std::to_string(gen.rows())}});
    std::cout << "holdout_accuracy " << fmt(res.holdout_accuracy) << "\n";
}

struct TrainClassifierOpts {
    CommonOpts c;
    std::string data;
    int n = 0;
    int classes = 10;
    int channels = 8, ksize = 3;
    NetTrainConfig nc;
};

void run_train_classifier(TrainClassifierOpts& o, const fs::path& dir) {
    Dataset ds = load_digits(o.data);
    if (o.n > 0 && o.n < ds.n()) ds = subset(ds, o.n, o.c.seed + 1, false);
    const int side = image_side_of(ds.dim());
    if (side == 0) throw std::runtime_error("train-classifier: rows are not square images");
    o.nc.seed = o.c.seed;
    NetTrainResult res =
        train_classifier(ds, o.classes, CnnArch{side, o.channels, o.ksize, o.classes}, o.nc);
    res.net.save((dir / "classifier.ckpt").string());
    write_summary(dir / "report.txt", {{"holdout_accuracy", fmt(res.holdout_accuracy)},
                                       {"final_loss", fmt(res.final_loss)},
                                       {"n_train", std::to_string(res.n_train)},
                                       {"n_holdout", std::to_string(res.n_holdout)}});
    std::cout << "holdout_accuracy " << fmt(res.holdout_accuracy) << "\n";
}

void add_net_flags(CLI::App* sub, NetTrainConfig& nc, int& channels, int& ksize) {
    sub->add_option("--epochs", nc.epochs, "Supervised training epochs");
    sub->add_option("--batch", nc.batch, "Minibatch size");
    sub->add_option("--lr", nc.learning_rate, "Adam learning rate");
    sub->add_option("--holdout", nc.holdout_fraction, "Held-out fraction for the accuracy report");
    sub->add_option("--channels", channels, "Convolution channels");
    sub->add_option("--ksize", ksize, "Convolution kernel size");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Minimal-maximum-entropy generative modeling toolkit"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(0, 1);
    app.set_config("--config", "",
                   "Run configuration file (INI; one section per subcommand). Every flag below "
                   "is also a config key; flags override the file.");
    std::uint64_t force_seed = 0;
    CLI::Option* force_seed_opt =
        app.add_option("--seed", force_seed, "Override the seed of the invoked subcommand")
            ->configurable(false);

    CLI::App* picked = nullptr;
    std::function<void(const fs::path&)> runner;

    auto arm = [&](CLI::App* sub, CommonOpts& c, auto run) {
        sub->configurable();
        sub->callback([&, sub, run] {
            if (*force_seed_opt) c.seed = force_seed;
            picked = sub;
            const fs::path dir = fs::path(c.out) / c.name;
            fs::create_directories(dir);
            io::atomic_write((dir / "config.ini").string(),
                             "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false));
            run(dir);
        });
    };

    // pca-demo
    auto pca = std::make_shared<PcaDemoOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "pca-demo", "Closed-form 2D gaussian study: entropy vs frame angle");
        add_common(sub, pca->c, 1);
        sub->add_option("--s11", pca->s11, "Data covariance (1,1)");
        sub->add_option("--s22", pca->s22, "Data covariance (2,2)");
        sub->add_option("--s12", pca->s12, "Data covariance (1,2)");
        sub->add_option("--grid", pca->grid, "Angle grid points across [-pi/4, pi/4]");
        arm(sub, pca->c, [pca](const fs::path& d) { run_pca_demo(*pca, d); });
    }

    // train-1d
    auto t1 = std::make_shared<Train1dOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "train-1d", "Fit a 1D model with MLP observables on a bimodal dataset");
        add_common(sub, t1->c, 1);
        add_mixture(sub, t1->mix);
        sub->add_option("--n", t1->n, "Synthetic training samples");
        sub->add_option("--data", t1->data, "Use this one-column csv instead of synthesizing");
        sub->add_option("--obs", t1->n_obs, "Observable count (MLP outputs)");
        sub->add_option("--hidden", t1->hidden, "MLP hidden layer sizes")->delimiter(',');
        sub->add_option("--box", t1->box, "Sampling box half-width");
        sub->add_option("--n-sample", t1->n_sample, "Samples drawn from the final model");
        add_grid(sub, t1->grid);
        add_train_flags(sub, t1->tc);
        arm(sub, t1->c, [t1](const fs::path& d) { run_train_1d(*t1, d); });
    }

    // train-image
    auto ti = std::make_shared<TrainImageOpts>();
    {
        ti->tc.max_epochs = 300;
        ti->tc.sampler.burn_in_sweeps = 200;
        ti->tc.sampler.refresh_sweeps = 5;
        ti->tc.measure_sweeps = 15;
        CLI::App* sub = app.add_subcommand(
            "train-image", "Fit an image model with CNN observables on digit images");
        add_common(sub, ti->c, 1);
        sub->add_option("--data", ti->data, "Digits csv (64 pixels in 0-16 plus a label per row)");
        sub->add_option("--n-train", ti->n_train, "Training subset size (0 uses every image)");
        sub->add_option("--obs", ti->n_obs, "Observable count (CNN outputs)");
        sub->add_option("--channels", ti->channels, "CNN channels");
        sub->add_option("--ksize", ti->ksize, "CNN kernel size");
        sub->add_option("--n-sample", ti->n_sample, "Samples drawn from the final model");
        sub->add_option("--columns", ti->columns, "Tiling columns for image grids");
        add_train_flags(sub, ti->tc);
        arm(sub, ti->c, [ti](const fs::path& d) { run_train_image(*ti, d); });
    }

    auto add_sample_like = [&](CLI::App* sub, SampleOpts& so, std::uint64_t seed) {
        add_common(sub, so.c, seed);
        sub->add_option("--model", so.model, "Model checkpoint to sample")->required();
        add_sampler_flags(sub, so);
    };

    // sample
    auto sp = std::make_shared<SampleOpts>();
    {
        CLI::App* sub = app.add_subcommand("sample", "Draw samples from a saved model");
        add_sample_like(sub, *sp, 2);
        arm(sub, sp->c, [sp](const fs::path& d) { run_sample(*sp, d); });
    }

    // bias-sample
    auto bs = std::make_shared<BiasSampleOpts>();
    {
        bs->s.proposal = "pixel";
        bs->s.n = 64;
        CLI::App* sub = app.add_subcommand(
            "bias-sample", "Sample a saved model steered by a scoring network");
        add_sample_like(sub, bs->s, 3);
        CLI::Option* od = sub->add_option("--discriminator", bs->discriminator,
                                          "Add a real-vs-generated discriminator bias");
        CLI::Option* oc =
            sub->add_option("--classifier", bs->classifier, "Add a class-steering bias");
        od->excludes(oc);
        oc->excludes(od);
        sub->add_option("--target", bs->target, "Class favoured by the classifier bias");
        sub->add_option("--alpha", bs->alpha, "Bias coupling strength")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--detach", bs->detach, "Drop the base energy; sample the bias alone");
        arm(sub, bs->s.c, [bs, sub](const fs::path& d) {
            if (bs->discriminator.empty() == bs->classifier.empty())
                throw CLI::ValidationError(
                    "bias-sample", "give exactly one of --discriminator / --classifier");
            if (!bs->classifier.empty() && bs->target < 0)
                throw CLI::ValidationError("bias-sample", "--classifier needs --target");
            (void)sub;
            run_bias_sample(*bs, d);
        });
    }

    // train-vae
    auto tv = std::make_shared<TrainVaeOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "train-vae", "Fit the variational-autoencoder baseline on a 1D dataset");
        add_common(sub, tv->c, 7);
        add_mixture(sub, tv->mix);
        sub->add_option("--n", tv->n, "Synthetic training samples");
        sub->add_option("--data", tv->data, "Use this csv instead of synthesizing");
        sub->add_option("--latent", tv->latent, "Latent dimension");
        sub->add_option("--enc-hidden", tv->enc_hidden, "Encoder hidden layer sizes")
            ->delimiter(',');
        sub->add_option("--dec-hidden", tv->dec_hidden, "Decoder hidden layer sizes")
            ->delimiter(',');
        sub->add_option("--noise", tv->noise, "Fixed output noise scale");
        sub->add_option("--steps", tv->vc.max_steps, "Full-batch training steps");
        sub->add_option("--lr", tv->vc.learning_rate, "Adam learning rate");
        sub->add_option("--record-every", tv->vc.record_every, "Steps between report rows");
        sub->add_option("--n-sample", tv->n_sample, "Samples drawn from the trained model");
        add_grid(sub, tv->grid);
        arm(sub, tv->c, [tv](const fs::path& d) { run_train_vae(*tv, d); });
    }

    // eval-kl
    auto ek = std::make_shared<EvalKlOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "eval-kl", "KL divergence of a sample set against a reference mixture");
        add_common(sub, ek->c, 4);
        CLI::Option* os = sub->add_option("--samples", ek->samples, "One-column sample csv");
        CLI::Option* om =
            sub->add_option("--model", ek->model, "Sample this checkpoint instead of reading csv");
        os->excludes(om);
        om->excludes(os);
        sub->add_option("--n", ek->n, "Samples to draw when using --model");
        sub->add_option("--lo", ek->lo, "Sampling box lower bound for --model");
        sub->add_option("--hi", ek->hi, "Sampling box upper bound for --model");
        add_mixture(sub, ek->mix);
        add_grid(sub, ek->grid);
        arm(sub, ek->c, [ek](const fs::path& d) {
            if (ek->samples.empty() == ek->model.empty())
                throw CLI::ValidationError("eval-kl", "give exactly one of --samples / --model");
            run_eval_kl(*ek, d);
        });
    }

    // train-discriminator
    auto td = std::make_shared<TrainDiscOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "train-discriminator", "Train a real-vs-generated scoring network");
        add_common(sub, td->c, 11);
        sub->add_option("--real", td->real, "Real digits csv")->required();
        sub->add_option("--n-real", td->n_real, "Real subset size (0 uses every image)");
        sub->add_option("--generated", td->generated,
                        "Generated sample csv (repeat to concatenate sets)");
        sub->add_option("--gen-model", td->gen_model,
                        "Sample the generated set from this checkpoint instead");
        sub->add_option("--n-gen", td->n_gen,
                        "Generated samples to draw with --gen-model (0 matches the real count)");
        add_net_flags(sub, td->nc, td->channels, td->ksize);
        arm(sub, td->c, [td](const fs::path& d) {
            if (td->generated.empty() && td->gen_model.empty())
                throw CLI::ValidationError("train-discriminator",
                                           "give --generated csv(s) or --gen-model");
            run_train_discriminator(*td, d);
        });
    }

    // train-classifier
    auto tc = std::make_shared<TrainClassifierOpts>();
    {
        CLI::App* sub =
            app.add_subcommand("train-classifier", "Train a digit-probability network");
        add_common(sub, tc->c, 12);
        sub->add_option("--data", tc->data, "Labeled digits csv")->required();
        sub->add_option("--n", tc->n, "Subset size (0 uses every image)");
        sub->add_option("--classes", tc->classes, "Class count");
        add_net_flags(sub, tc->nc, tc->channels, tc->ksize);
        arm(sub, tc->c, [tc](const fs::path& d) { run_train_classifier(*tc, d); });
    }

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        std::cerr << "\n" << app.help();
        return code != 0 ? code : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (picked == nullptr) {
        std::cerr << app.help();
        return 1;
    }
    return 0;
}

}  // namespace mme
