#include "minmaxent/network.hpp"

#include <stdexcept>

#include "minmaxent/io.hpp"
#include "minmaxent/netbuild.hpp"

namespace mme {

Network Network::cnn(const CnnArch& arch, OutputKind kind, std::uint64_t seed) {
    if (arch.n_out < 1) throw std::invalid_argument("Network: n_out must be >= 1");
    if (kind == OutputKind::SigmoidProb && arch.n_out != 1)
        throw std::invalid_argument("Network: sigmoid output requires n_out == 1");
    if (kind == OutputKind::SoftmaxProb && arch.n_out < 2)
        throw std::invalid_argument("Network: softmax output requires n_out >= 2");

    Network net;
    net.arch_ = arch;
    net.kind_ = kind;
    net.seed_ = seed;

    // Inference graph: x -> logits -> probability.
    {
        auto g = std::make_shared<ad::Graph>();
        net.x_node_ = g->input(Shape::image(1, arch.image_side, arch.image_side), "x");
        int logits = detail::build_cnn(*g, net.x_node_, arch.image_side, arch.channels,
                                       arch.ksize, arch.n_out, /*tanh_activation=*/false);
        net.prob_node_ = (kind == OutputKind::SigmoidProb) ? g->sigmoid(logits)
                                                           : g->softmax(logits);
        net.infer_graph_ = g;
    }
    // Training graph, same parameter layout: (x, target) -> fused cross-entropy.
    {
        auto g = std::make_shared<ad::Graph>();
        net.tx_node_ = g->input(Shape::image(1, arch.image_side, arch.image_side), "x");
        int logits = detail::build_cnn(*g, net.tx_node_, arch.image_side, arch.channels,
                                       arch.ksize, arch.n_out, false);
        net.target_node_ = g->input(Shape::vec(arch.n_out), "target");
        net.loss_node_ = (kind == OutputKind::SigmoidProb)
                             ? g->sigmoid_xent(logits, net.target_node_)
                             : g->softmax_xent(logits, net.target_node_);
        net.train_graph_ = g;
    }
    if (net.infer_graph_->n_params() != net.train_graph_->n_params())
        throw std::logic_error("Network: graph parameter layouts diverged");

    net.params_ = detail::init_cnn(arch.image_side, arch.channels, arch.ksize, arch.n_out, seed);
    if (net.params_.size() != net.infer_graph_->n_params())
        throw std::logic_error("Network: initializer layout mismatch");
    return net;
}

void Network::prob(const double* x, Vector& out, ad::Workspace& ws) const {
    ws.bind_raw(x_node_, x, input_dim());
    ws.forward(params_);
    out = ws.value(prob_node_);
}

double Network::score(const Vector& x, ad::Workspace& ws) const {
    if (kind_ != OutputKind::SigmoidProb)
        throw std::logic_error("Network::score: only defined for sigmoid output");
    if (x.size() != input_dim())
        throw std::invalid_argument("Network::score: input size mismatch");
    ws.bind_raw(x_node_, x.data(), x.size());
    ws.forward(params_);
    return ws.value(prob_node_)(0);
}

double Network::loss_and_grad(const double* x, const Vector& target, ad::Workspace& ws) const {
    if (target.size() != arch_.n_out)
        throw std::invalid_argument("Network::loss_and_grad: target size mismatch");
    ws.bind_raw(tx_node_, x, input_dim());
    ws.bind(target_node_, target);
    ws.forward(params_);
    ws.backward(loss_node_, params_);
    return ws.value(loss_node_)(0);
}

void Network::save(const std::string& path) const {
    io::Checkpoint ck;
    ck.set("kind", "network");
    ck.set("output", kind_ == OutputKind::SigmoidProb ? "sigmoid" : "softmax");
    ck.set("image_side", std::to_string(arch_.image_side));
    ck.set("channels", std::to_string(arch_.channels));
    ck.set("ksize", std::to_string(arch_.ksize));
    ck.set("n_out", std::to_string(arch_.n_out));
    ck.set("seed", std::to_string(seed_));
    ck.blob = params_;
    io::save_checkpoint(path, ck);
}

Network Network::load(const std::string& path) {
    io::Checkpoint ck = io::load_checkpoint(path);
    if (ck.get("kind") != "network")
        throw std::runtime_error("Network::load: not a network checkpoint: " + path);
    CnnArch arch;
    arch.image_side = std::stoi(ck.get("image_side"));
    arch.channels = std::stoi(ck.get("channels"));
    arch.ksize = std::stoi(ck.get("ksize"));
    arch.n_out = std::stoi(ck.get("n_out"));
    OutputKind kind = ck.get("output") == "sigmoid" ? OutputKind::SigmoidProb
                                                    : OutputKind::SoftmaxProb;
    Network net = cnn(arch, kind, std::stoull(ck.get("seed")));
    if (ck.blob.size() != net.params_.size())
        throw std::runtime_error("Network::load: parameter count mismatch in " + path);
    net.params_ = ck.blob;
    return net;
}

}  // namespace mme
