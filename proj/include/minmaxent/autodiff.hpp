#pragma once

#include <string>
#include <vector>

#include "minmaxent/types.hpp"

namespace mme::ad {

// Reverse-mode automatic differentiation over dense real arrays.
//
// A Graph is built once per architecture and holds only structure: operation
// kinds, shapes and input references in topological order. Parameters live
// outside the graph in one flat vector; each Param node owns a segment of it.
// Evaluation state (cached forward values, adjoints) lives in a Workspace, so
// several workspaces may evaluate the same graph concurrently as long as the
// parameter vector is not mutated underneath them.

enum class Op {
    Input,
    Param,
    Const,
    Affine,       // W x + b, dense
    Conv2d,       // 2D cross-correlation, stride 1, zero padding
    Tanh,
    Relu,
    Exp,
    Sigmoid,
    Square,
    Scale,        // c * x
    Add,
    Sub,
    Mul,          // elementwise
    Sum,
    Mean,
    Softmax,
    SoftmaxXent,  // fused softmax + cross-entropy, scalar output
    SigmoidXent,  // fused logistic + binary cross-entropy, scalar output
};

struct ConvMeta {
    int out_channels = 0;
    int in_channels = 0;
    int ksize = 0;
};

struct Node {
    Op op;
    Shape shape;
    int a = -1, b = -1, c = -1;  // upstream node references
    double factor = 1.0;         // Scale only
    ConvMeta conv;               // Conv2d only
    int param_offset = -1;       // Param only
    Vector value;                // Const only
    std::string name;
};

class Graph {
public:
    int input(Shape s, std::string name = {});
    int param(Shape s, std::string name = {});
    int constant(Vector v, Shape s);
    int constant_scalar(double v) { return constant(Vector::Constant(1, v), Shape::scalar()); }

    /// y = W x + b with W a Param/Const of shape {1, out, in} (row-major) and b of length out.
    int affine(int w, int b, int x);

    /// Cross-correlation with square kernels, stride 1, zero padding (ksize-1)/2.
    /// Kernel layout is flat [out_c][in_c][ki][kj]; bias has out_channels entries.
    int conv2d(int kernel, int bias, int x, int out_channels, int ksize = 3);

    int tanh(int x);
    int relu(int x);
    int exp(int x);
    int sigmoid(int x);
    int square(int x);
    int scale(int x, double factor);
    int add(int x, int y);
    int sub(int x, int y);
    int mul(int x, int y);
    int sum(int x);
    int mean(int x);
    int softmax(int x);
    int softmax_xent(int logits, int target);
    int sigmoid_xent(int logits, int target);

    int n_nodes() const { return static_cast<int>(nodes_.size()); }
    int n_params() const { return n_params_; }
    const Node& node(int i) const { return nodes_[i]; }
    const std::vector<int>& input_nodes() const { return inputs_; }

private:
    int push(Node n);
    const Node& ref(int i, const char* who) const;

    std::vector<Node> nodes_;
    std::vector<int> inputs_;
    int n_params_ = 0;
};

/// Per-evaluation state for one Graph. Inputs stay bound across forward calls,
/// so a graph is re-executed by rebinding only what changed.
class Workspace {
public:
    Workspace() = default;  // empty placeholder; any use before rebinding to a graph throws
    explicit Workspace(const Graph& g);

    void bind(int input_node, const Vector& v);
    void bind_scalar(int input_node, double v) { bind_raw(input_node, &v, 1); }
    void bind_raw(int input_node, const double* data, Index n);

    /// Populate every node's cached value. `params` must match Graph::n_params().
    void forward(const Vector& params);

    /// Seed the (scalar) node with adjoint 1 and propagate. Adjoints of nodes
    /// the seed does not reach stay exactly zero. `params` must be the same
    /// vector forward() ran with.
    void backward(int seed_node, const Vector& params);

    const Vector& value(int node) const { return val_[node]; }
    const Vector& adjoint(int node) const { return adj_[node]; }
    const Vector& param_grad() const { return pgrad_; }

private:
    const double* in_ptr(int node, const Vector& params) const;
    double* adj_ptr(int node);

    const Graph* g_ = nullptr;
    std::vector<Vector> val_;
    std::vector<Vector> adj_;
    std::vector<char> bound_;
    Vector pgrad_;
    bool forward_done_ = false;
};

}  // namespace mme::ad
