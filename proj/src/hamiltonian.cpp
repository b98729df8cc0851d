#include "minmaxent/hamiltonian.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "minmaxent/io.hpp"

namespace mme {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* bias_name(BiasField::Kind k) {
    switch (k) {
        case BiasField::Kind::Discriminator: return "discriminator";
        case BiasField::Kind::Classifier: return "classifier";
        case BiasField::Kind::Constant: return "constant";
    }
    return "?";
}

}  // namespace

EffectiveHamiltonian EffectiveHamiltonian::maxent(const ObservableSet& obs,
                                                  const Vector& lambda) {
    if (lambda.size() != obs.n_obs())
        throw std::invalid_argument("EffectiveHamiltonian: lambda size "
                                    + std::to_string(lambda.size()) + " != n_obs "
                                    + std::to_string(obs.n_obs()));
    EffectiveHamiltonian h;
    h.has_base_ = true;
    h.obs_ = obs;  // frozen copy: later parameter updates do not leak in
    h.lambda_ = lambda;
    h.input_dim_ = obs.input_dim();
    return h;
}

EffectiveHamiltonian EffectiveHamiltonian::with_discriminator_bias(const Network& net,
                                                                   double alpha) const {
    if (net.output_kind() != OutputKind::SigmoidProb)
        throw std::invalid_argument("discriminator bias requires a sigmoid-output network");
    if (net.input_dim() != input_dim_)
        throw std::invalid_argument("discriminator bias: network input size mismatch");
    if (!(alpha >= 0.0))
        throw std::invalid_argument("discriminator bias: alpha must be >= 0");
    EffectiveHamiltonian h = *this;
    BiasField b;
    b.kind = BiasField::Kind::Discriminator;
    b.alpha = alpha;
    b.net = net;
    h.biases_.push_back(std::move(b));
    return h;
}

EffectiveHamiltonian EffectiveHamiltonian::with_classifier_bias(const Network& net,
                                                                int target,
                                                                double alpha) const {
    if (net.output_kind() != OutputKind::SoftmaxProb)
        throw std::invalid_argument("classifier bias requires a softmax-output network");
    if (net.input_dim() != input_dim_)
        throw std::invalid_argument("classifier bias: network input size mismatch");
    if (target < 0 || target >= net.n_out())
        throw std::invalid_argument("classifier bias: target class " + std::to_string(target)
                                    + " outside [0, " + std::to_string(net.n_out()) + ")");
    EffectiveHamiltonian h = *this;
    BiasField b;
    b.kind = BiasField::Kind::Classifier;
    b.alpha = alpha;
    b.target = target;
    b.net = net;
    h.biases_.push_back(std::move(b));
    return h;
}

EffectiveHamiltonian EffectiveHamiltonian::with_constant_bias(double value) const {
    EffectiveHamiltonian h = *this;
    BiasField b;
    b.kind = BiasField::Kind::Constant;
    b.value = value;
    h.biases_.push_back(b);
    return h;
}

EffectiveHamiltonian EffectiveHamiltonian::detach_base() const {
    bool any_net = false;
    for (const auto& b : biases_)
        if (b.kind != BiasField::Kind::Constant) any_net = true;
    if (!any_net)
        throw std::logic_error("detach_base: no network bias present; "
                               "the remaining energy would not define a distribution");
    EffectiveHamiltonian h = *this;
    h.has_base_ = false;
    return h;
}

const ObservableSet& EffectiveHamiltonian::observables() const {
    if (!obs_) throw std::logic_error("EffectiveHamiltonian: no observable set attached");
    return *obs_;
}

EffectiveHamiltonian::Scratch EffectiveHamiltonian::make_scratch() const {
    Scratch s;
    if (obs_) s.obs.emplace(obs_->make_workspace());
    for (const auto& b : biases_) {
        if (b.net) s.bias.push_back(b.net->make_workspace());
        else s.bias.push_back(ad::Workspace());  // placeholder keeps indices aligned
    }
    return s;
}

double EffectiveHamiltonian::energy(const double* x, Scratch& s) const {
    double e = 0.0;
    if (has_base_) e += obs_->weighted_value(x, lambda_, *s.obs);
    for (std::size_t k = 0; k < biases_.size(); ++k) {
        const BiasField& b = biases_[k];
        switch (b.kind) {
            case BiasField::Kind::Constant:
                e += b.value;
                break;
            case BiasField::Kind::Discriminator:
                b.net->prob(x, s.prob, s.bias[k]);
                e += b.alpha * s.prob(0);
                break;
            case BiasField::Kind::Classifier:
                b.net->prob(x, s.prob, s.bias[k]);
                e += b.alpha * (s.prob.sum() - 2.0 * s.prob(b.target));
                break;
        }
    }
    return e;
}

double EffectiveHamiltonian::energy(const Vector& x, Scratch& s) const {
    if (x.size() != input_dim_)
        throw std::invalid_argument("EffectiveHamiltonian::energy: input size "
                                    + std::to_string(x.size()) + " != "
                                    + std::to_string(input_dim_));
    return energy(x.data(), s);
}

double EffectiveHamiltonian::energy_checked(const Vector& x, Scratch& s) const {
    if (x.size() != input_dim_)
        throw std::invalid_argument("EffectiveHamiltonian::energy_checked: input size mismatch");
    double e = 0.0;
    if (has_base_) {
        double base = obs_->weighted_value(x.data(), lambda_, *s.obs);
        if (!std::isfinite(base))
            throw std::runtime_error("non-finite energy in maxent term (lambda . f)");
        e += base;
    }
    for (std::size_t k = 0; k < biases_.size(); ++k) {
        const BiasField& b = biases_[k];
        double term = 0.0;
        switch (b.kind) {
            case BiasField::Kind::Constant: term = b.value; break;
            case BiasField::Kind::Discriminator:
                b.net->prob(x.data(), s.prob, s.bias[k]);
                term = b.alpha * s.prob(0);
                break;
            case BiasField::Kind::Classifier:
                b.net->prob(x.data(), s.prob, s.bias[k]);
                term = b.alpha * (s.prob.sum() - 2.0 * s.prob(b.target));
                break;
        }
        if (!std::isfinite(term))
            throw std::runtime_error("non-finite energy in bias term " + std::to_string(k)
                                     + " (" + bias_name(b.kind) + ")");
        e += term;
    }
    if (!std::isfinite(e))
        throw std::runtime_error("non-finite total energy (finite terms overflowed in sum)");
    return e;
}

void EffectiveHamiltonian::save(const std::string& path) const {
    namespace fs = std::filesystem;
    io::Checkpoint ck;
    ck.set("kind", "hamiltonian");
    ck.set("has_base", has_base_ ? "1" : "0");
    ck.set("input_dim", std::to_string(input_dim_));
    std::string stem = fs::path(path).filename().string();
    if (obs_) {
        ck.set("observables", stem + ".obs");
        obs_->save(path + ".obs");
    }
    ck.set("n_biases", std::to_string(biases_.size()));
    for (std::size_t k = 0; k < biases_.size(); ++k) {
        const BiasField& b = biases_[k];
        std::string pre = "bias" + std::to_string(k) + ".";
        ck.set(pre + "type", bias_name(b.kind));
        switch (b.kind) {
            case BiasField::Kind::Constant:
                ck.set(pre + "value", fmt_double(b.value));
                break;
            case BiasField::Kind::Classifier:
                ck.set(pre + "target", std::to_string(b.target));
                [[fallthrough]];
            case BiasField::Kind::Discriminator: {
                ck.set(pre + "alpha", fmt_double(b.alpha));
                std::string net_name = stem + ".bias" + std::to_string(k) + ".net";
                ck.set(pre + "net", net_name);
                b.net->save(path + ".bias" + std::to_string(k) + ".net");
                break;
            }
        }
    }
    ck.blob = lambda_;
    io::save_checkpoint(path, ck);
}

EffectiveHamiltonian EffectiveHamiltonian::load(const std::string& path) {
    namespace fs = std::filesystem;
    io::Checkpoint ck = io::load_checkpoint(path);
    if (ck.get("kind") != "hamiltonian")
        throw std::runtime_error("EffectiveHamiltonian::load: not a hamiltonian manifest: "
                                 + path);
    fs::path dir = fs::path(path).parent_path();
    EffectiveHamiltonian h;
    h.has_base_ = ck.get("has_base") == "1";
    h.input_dim_ = std::stoi(ck.get("input_dim"));
    h.lambda_ = ck.blob;
    if (ck.has("observables"))
        h.obs_ = ObservableSet::load((dir / ck.get("observables")).string());
    if (h.has_base_ && !h.obs_)
        throw std::runtime_error("hamiltonian manifest claims a base term but lists "
                                 "no observable file: " + path);
    int nb = std::stoi(ck.get("n_biases"));
    for (int k = 0; k < nb; ++k) {
        std::string pre = "bias" + std::to_string(k) + ".";
        std::string type = ck.get(pre + "type");
        BiasField b;
        if (type == "constant") {
            b.kind = BiasField::Kind::Constant;
            b.value = std::stod(ck.get(pre + "value"));
        } else {
            b.kind = (type == "discriminator") ? BiasField::Kind::Discriminator
                                               : BiasField::Kind::Classifier;
            if (type == "classifier") b.target = std::stoi(ck.get(pre + "target"));
            b.alpha = std::stod(ck.get(pre + "alpha"));
            b.net = Network::load((dir / ck.get(pre + "net")).string());
        }
        h.biases_.push_back(std::move(b));
    }
    return h;
}

}  // namespace mme
