#include "minmaxent/vae.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "minmaxent/adam.hpp"
#include "minmaxent/io.hpp"
#include "minmaxent/rng.hpp"

namespace mme {

namespace {

struct LayerIds {
    int w = -1, b = -1;
};

/// Declare (W, b) param nodes for a dense layer chain; returns ids per layer.
std::vector<LayerIds> declare_mlp(ad::Graph& g, int input_dim, const std::vector<int>& widths,
                                  const std::string& tag) {
    std::vector<LayerIds> ids;
    int in = input_dim;
    for (std::size_t l = 0; l < widths.size(); ++l) {
        const int out = widths[l];
        if (out < 1) throw std::invalid_argument("VaeModel: zero-width layer");
        LayerIds id;
        id.w = g.param(Shape{1, out, in}, tag + "W" + std::to_string(l));
        id.b = g.param(Shape::vec(out), tag + "b" + std::to_string(l));
        ids.push_back(id);
        in = out;
    }
    return ids;
}

/// Apply the declared chain: tanh between layers, linear last layer.
int apply_mlp(ad::Graph& g, int x, const std::vector<LayerIds>& ids) {
    int h = x;
    for (std::size_t l = 0; l < ids.size(); ++l) {
        h = g.affine(ids[l].w, ids[l].b, h);
        if (l + 1 < ids.size()) h = g.tanh(h);
    }
    return h;
}

void glorot_init_mlp(Vector& p, int& off, int input_dim, const std::vector<int>& widths,
                     CounterRng& rng) {
    int in = input_dim;
    for (int out : widths) {
        const double r = std::sqrt(6.0 / (in + out));
        for (int i = 0; i < out * in; ++i) p(off + i) = uniform(rng, -r, r);
        off += out * in + out;  // biases stay zero
        in = out;
    }
}

}  // namespace

VaeModel VaeModel::make(int data_dim, int latent_dim, const std::vector<int>& enc_hidden,
                        const std::vector<int>& dec_hidden, double noise_scale,
                        std::uint64_t seed) {
    if (data_dim < 1) throw std::invalid_argument("VaeModel: data_dim must be >= 1");
    if (latent_dim < 1) throw std::invalid_argument("VaeModel: latent_dim must be >= 1");
    if (!(noise_scale > 0.0)) throw std::invalid_argument("VaeModel: noise scale must be > 0");
    VaeModel m;
    m.data_dim_ = data_dim;
    m.latent_dim_ = latent_dim;
    m.enc_hidden_ = enc_hidden;
    m.dec_hidden_ = dec_hidden;
    m.noise_scale_ = noise_scale;
    m.seed_ = seed;
    m.build();

    m.params_ = Vector::Zero(m.graph_->n_params());
    CounterRng rng(seed);
    int off = 0;
    // Encoder trunk, mu head, logvar head, then the decoder (kept contiguous
    // at the tail so the standalone decoder graph can reuse that segment).
    std::vector<int> enc = enc_hidden;
    glorot_init_mlp(m.params_, off, data_dim, enc, rng);
    const int trunk_out = enc.empty() ? data_dim : enc.back();
    std::vector<int> head{latent_dim};
    glorot_init_mlp(m.params_, off, trunk_out, head, rng);
    glorot_init_mlp(m.params_, off, trunk_out, head, rng);
    if (off != m.dec_offset_) throw std::logic_error("VaeModel: parameter layout mismatch");
    std::vector<int> dec = dec_hidden;
    dec.push_back(data_dim);
    glorot_init_mlp(m.params_, off, latent_dim, dec, rng);
    if (off != m.n_params()) throw std::logic_error("VaeModel: parameter layout mismatch");
    return m;
}

void VaeModel::build() {
    auto g = std::make_shared<ad::Graph>();
    x_node_ = g->input(Shape::vec(data_dim_), "x");
    eps_node_ = g->input(Shape::vec(latent_dim_), "eps");

    // Parameter declaration order fixes the flat layout.
    auto enc_ids = declare_mlp(*g, data_dim_, enc_hidden_, "enc_");
    const int trunk_out = enc_hidden_.empty() ? data_dim_ : enc_hidden_.back();
    auto mu_ids = declare_mlp(*g, trunk_out, {latent_dim_}, "mu_");
    auto lv_ids = declare_mlp(*g, trunk_out, {latent_dim_}, "logvar_");
    dec_offset_ = g->n_params();
    std::vector<int> dec_widths = dec_hidden_;
    dec_widths.push_back(data_dim_);
    auto dec_ids = declare_mlp(*g, latent_dim_, dec_widths, "dec_");
    dec_count_ = g->n_params() - dec_offset_;

    int trunk = apply_mlp(*g, x_node_, enc_ids);
    if (!enc_ids.empty()) trunk = g->tanh(trunk);
    const int mu = apply_mlp(*g, trunk, mu_ids);
    const int logvar = apply_mlp(*g, trunk, lv_ids);

    const int sigma = g->exp(g->scale(logvar, 0.5));
    const int z = g->add(mu, g->mul(sigma, eps_node_));
    const int xhat = apply_mlp(*g, z, dec_ids);

    // -ln p(x|z) = sum (x - xhat)^2 / (2 s^2) + (d/2) ln(2 pi s^2).
    const double s2 = noise_scale_ * noise_scale_;
    const double log_norm = 0.5 * data_dim_ * std::log(2.0 * std::numbers::pi * s2);
    int nrecon = g->scale(g->sum(g->square(g->sub(x_node_, xhat))), 0.5 / s2);
    nrecon = g->add(nrecon, g->constant_scalar(log_norm));
    nrecon_node_ = nrecon;

    // KL(q || N(0,I)) = (1/2) sum (mu^2 + e^logvar - logvar - 1).
    int kl = g->sub(g->add(g->sum(g->square(mu)), g->sum(g->exp(logvar))),
                    g->add(g->sum(logvar), g->constant_scalar(double(latent_dim_))));
    kl_node_ = g->scale(kl, 0.5);

    loss_node_ = g->add(nrecon_node_, kl_node_);  // -elbo
    graph_ = g;

    // Decoder-only graph with an identical parameter chain, declared first so
    // its flat layout matches params.segment(dec_offset, dec_count).
    auto dg = std::make_shared<ad::Graph>();
    z_node_ = dg->input(Shape::vec(latent_dim_), "z");
    auto dec2 = declare_mlp(*dg, latent_dim_, dec_widths, "dec_");
    xhat_node_ = apply_mlp(*dg, z_node_, dec2);
    if (dg->n_params() != dec_count_) throw std::logic_error("VaeModel: decoder layout mismatch");
    dec_graph_ = dg;
}

VaeModel::Elbo VaeModel::read_elbo(const ad::Workspace& ws) const {
    Elbo e;
    e.recon = -ws.value(nrecon_node_)(0);
    e.kl = ws.value(kl_node_)(0);
    e.total = e.recon - e.kl;
    return e;
}

VaeModel::Elbo VaeModel::elbo(const Vector& x, const Vector& eps, ad::Workspace& ws) const {
    if (x.size() != data_dim_) throw std::invalid_argument("VaeModel::elbo: data size mismatch");
    if (eps.size() != latent_dim_)
        throw std::invalid_argument("VaeModel::elbo: noise draw size mismatch");
    ws.bind(x_node_, x);
    ws.bind(eps_node_, eps);
    ws.forward(params_);
    return read_elbo(ws);
}

VaeModel::Elbo VaeModel::elbo_grad(const Vector& x, const Vector& eps, ad::Workspace& ws) const {
    Elbo e = elbo(x, eps, ws);
    ws.backward(loss_node_, params_);
    return e;
}

Vector VaeModel::decode(const Vector& z, ad::Workspace& dec_ws) const {
    if (z.size() != latent_dim_) throw std::invalid_argument("VaeModel::decode: latent size mismatch");
    dec_ws.bind(z_node_, z);
    const Vector dec_params = params_.segment(dec_offset_, dec_count_);
    dec_ws.forward(dec_params);
    return dec_ws.value(xhat_node_);
}

void VaeModel::save(const std::string& path) const {
    io::Checkpoint ck;
    ck.set("kind", "vae");
    ck.set("data_dim", std::to_string(data_dim_));
    ck.set("latent_dim", std::to_string(latent_dim_));
    auto join = [](const std::vector<int>& v) {
        std::ostringstream s;
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
        return s.str();
    };
    ck.set("enc_hidden", join(enc_hidden_));
    ck.set("dec_hidden", join(dec_hidden_));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", noise_scale_);
    ck.set("noise_scale", buf);
    ck.set("seed", std::to_string(seed_));
    ck.blob = params_;
    io::save_checkpoint(path, ck);
}

VaeModel VaeModel::load(const std::string& path) {
    io::Checkpoint ck = io::load_checkpoint(path);
    if (ck.get("kind") != "vae")
        throw std::runtime_error("VaeModel::load: not a vae checkpoint: " + path);
    auto split = [](const std::string& s) {
        std::vector<int> v;
        std::istringstream in(s);
        std::string tok;
        while (std::getline(in, tok, ','))
            if (!tok.empty()) v.push_back(std::stoi(tok));
        return v;
    };
    VaeModel m = make(std::stoi(ck.get("data_dim")), std::stoi(ck.get("latent_dim")),
                      split(ck.get("enc_hidden")), split(ck.get("dec_hidden")),
                      std::stod(ck.get("noise_scale")), std::stoull(ck.get("seed")));
    if (ck.blob.size() != m.params_.size())
        throw std::runtime_error("VaeModel::load: parameter count mismatch in " + path);
    m.params_ = ck.blob;
    return m;
}

VaeTrainResult train_vae(VaeModel& model, const Matrix& data, const VaeTrainConfig& cfg) {
    if (data.rows() < 1) throw std::invalid_argument("train_vae: empty data set");
    if (data.cols() != model.data_dim())
        throw std::invalid_argument("train_vae: data dimension mismatch");
    const int n = static_cast<int>(data.rows());
    const int latent = model.latent_dim();
    const int batch = cfg.batch > 0 && cfg.batch < n ? cfg.batch : n;

    ad::Workspace ws = model.make_workspace();
    AdamState adam;
    adam.resize(model.n_params());
    AdamParams ap;
    CounterRng rng(CounterRng::derive(cfg.seed, 0xAE));

    VaeTrainResult res;
    std::vector<double> rec;
    Vector x(model.data_dim()), eps(latent);
    Vector grad(model.n_params());

    for (int step = 1; step <= cfg.max_steps; ++step) {
        grad.setZero();
        VaeModel::Elbo mean{};
        for (int k = 0; k < batch; ++k) {
            const int i = batch == n ? k : uniform_index(rng, n);
            x = data.row(i);
            for (int l = 0; l < latent; ++l) eps(l) = gaussian(rng);
            VaeModel::Elbo e = model.elbo_grad(x, eps, ws);
            grad += ws.param_grad();
            mean.total += e.total;
            mean.recon += e.recon;
            mean.kl += e.kl;
        }
        grad /= batch;
        mean.total /= batch;
        mean.recon /= batch;
        mean.kl /= batch;
        res.final_elbo = mean;

        if (!std::isfinite(mean.total) || -mean.total > cfg.divergence_loss) {
            res.diverged = true;
            break;
        }
        adam_update(model.params(), grad, adam, cfg.learning_rate, ap);
        if (cfg.on_step) cfg.on_step(step, mean);
        if (cfg.record_every > 0 && (step % cfg.record_every == 0 || step == 1)) {
            rec.push_back(step);
            rec.push_back(-mean.total);
            rec.push_back(mean.recon);
            rec.push_back(mean.kl);
        }
    }
    res.record = rec.empty()
                     ? Matrix(0, 4)
                     : Eigen::Map<Matrix>(rec.data(), 4, static_cast<Index>(rec.size() / 4))
                           .transpose();
    return res;
}

Matrix sample_vae(const VaeModel& model, int n_samples, std::uint64_t seed,
                  bool add_output_noise) {
    if (n_samples < 1) throw std::invalid_argument("sample_vae: need at least one sample");
    ad::Workspace dec_ws = model.make_decoder_workspace();
    CounterRng rng(CounterRng::derive(seed, 0x5A));
    Matrix out(n_samples, model.data_dim());
    Vector z(model.latent_dim());
    for (int i = 0; i < n_samples; ++i) {
        for (int l = 0; l < model.latent_dim(); ++l) z(l) = gaussian(rng);
        Vector x = model.decode(z, dec_ws);
        if (add_output_noise)
            for (Index d = 0; d < x.size(); ++d) x(d) += model.noise_scale() * gaussian(rng);
        out.row(i) = x;
    }
    return out;
}

}  // namespace mme
