#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "minmaxent/autodiff.hpp"
#include "minmaxent/types.hpp"

namespace mme {

/// Small CNN used for bias fields: discriminators (one logistic output) and
/// classifiers (softmax probability vector). Same convolutional shape as the
/// CNN observables, with ReLU activations.
enum class OutputKind { SigmoidProb, SoftmaxProb };

struct CnnArch {
    int image_side = 8;
    int channels = 8;
    int ksize = 3;
    int n_out = 1;
};

class Network {
public:
    static Network cnn(const CnnArch& arch, OutputKind kind, std::uint64_t seed);

    const CnnArch& arch() const { return arch_; }
    OutputKind output_kind() const { return kind_; }
    int n_out() const { return arch_.n_out; }
    int input_dim() const { return arch_.image_side * arch_.image_side; }
    int n_params() const { return static_cast<int>(params_.size()); }
    const Vector& params() const { return params_; }
    Vector& params() { return params_; }

    ad::Workspace make_workspace() const { return ad::Workspace(*infer_graph_); }
    ad::Workspace make_train_workspace() const { return ad::Workspace(*train_graph_); }

    /// Probability output: scalar in [0,1] (sigmoid) or a simplex vector (softmax).
    void prob(const double* x, Vector& out, ad::Workspace& ws) const;
    double score(const Vector& x, ad::Workspace& ws) const;  // sigmoid nets

    /// Cross-entropy loss for one example; fills param_grad via backward.
    double loss_and_grad(const double* x, const Vector& target, ad::Workspace& ws) const;

    void save(const std::string& path) const;
    static Network load(const std::string& path);

private:
    Network() = default;

    CnnArch arch_;
    OutputKind kind_ = OutputKind::SigmoidProb;
    std::uint64_t seed_ = 0;
    Vector params_;

    std::shared_ptr<const ad::Graph> infer_graph_;
    int x_node_ = -1, prob_node_ = -1;
    std::shared_ptr<const ad::Graph> train_graph_;
    int tx_node_ = -1, target_node_ = -1, loss_node_ = -1;
};

}  // namespace mme
