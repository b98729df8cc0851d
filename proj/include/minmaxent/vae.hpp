#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "minmaxent/autodiff.hpp"
#include "minmaxent/types.hpp"

namespace mme {

// Gaussian variational autoencoder baseline. Encoder and decoder are small
// tanh MLPs; the output likelihood is Gaussian with a fixed noise scale, and
// the latent prior is standard normal. One reparametrized noise draw per
// example per step.

class VaeModel {
public:
    static VaeModel make(int data_dim, int latent_dim, const std::vector<int>& enc_hidden,
                         const std::vector<int>& dec_hidden, double noise_scale,
                         std::uint64_t seed);

    int data_dim() const { return data_dim_; }
    int latent_dim() const { return latent_dim_; }
    double noise_scale() const { return noise_scale_; }
    int n_params() const { return static_cast<int>(params_.size()); }
    const Vector& params() const { return params_; }
    Vector& params() { return params_; }

    struct Elbo {
        double total = 0.0;  // recon - kl
        double recon = 0.0;  // ln p(x|z), including the Gaussian normalization
        double kl = 0.0;     // KL(q(z|x) || N(0, I))
    };

    ad::Workspace make_workspace() const { return ad::Workspace(*graph_); }
    ad::Workspace make_decoder_workspace() const { return ad::Workspace(*dec_graph_); }

    /// One-sample ELBO with noise draw eps (length latent_dim).
    Elbo elbo(const Vector& x, const Vector& eps, ad::Workspace& ws) const;
    /// Same, plus d(-elbo)/dparams accumulated into ws.param_grad().
    Elbo elbo_grad(const Vector& x, const Vector& eps, ad::Workspace& ws) const;

    /// Decoder mean for one latent point (no output noise).
    Vector decode(const Vector& z, ad::Workspace& dec_ws) const;

    void save(const std::string& path) const;
    static VaeModel load(const std::string& path);

private:
    VaeModel() = default;
    void build();
    Elbo read_elbo(const ad::Workspace& ws) const;

    int data_dim_ = 1;
    int latent_dim_ = 2;
    std::vector<int> enc_hidden_, dec_hidden_;
    double noise_scale_ = 0.1;
    std::uint64_t seed_ = 0;
    Vector params_;
    int dec_offset_ = 0, dec_count_ = 0;

    std::shared_ptr<const ad::Graph> graph_;
    int x_node_ = -1, eps_node_ = -1;
    int loss_node_ = -1, nrecon_node_ = -1, kl_node_ = -1;

    std::shared_ptr<const ad::Graph> dec_graph_;
    int z_node_ = -1, xhat_node_ = -1;
};

struct VaeTrainConfig {
    int max_steps = 3000;
    int batch = 64;  // examples per Adam step, drawn at random; 0 = full batch
    double learning_rate = 1e-3;
    std::uint64_t seed = 7;
    int record_every = 10;
    double divergence_loss = 1e10;  // abort when -elbo exceeds this or turns non-finite
    std::function<void(int, const VaeModel::Elbo&)> on_step;
};

struct VaeTrainResult {
    // Rows: step, -elbo, recon, kl (batch averages).
    Matrix record;
    bool diverged = false;
    VaeModel::Elbo final_elbo;
};

/// Minibatch Adam on -ELBO.
VaeTrainResult train_vae(VaeModel& model, const Matrix& data, const VaeTrainConfig& cfg);

/// Ancestral sampling: z ~ N(0,I), x = decode(z) (+ output noise by default).
Matrix sample_vae(const VaeModel& model, int n_samples, std::uint64_t seed,
                  bool add_output_noise = true);

}  // namespace mme
