#include "minmaxent/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace mme::ad {

namespace {

[[noreturn]] void fail(const std::string& who, int node, const std::string& msg) {
    throw std::invalid_argument(who + ": node " + std::to_string(node) + ": " + msg);
}

std::string shape_str(const Shape& s) {
    return "{" + std::to_string(s.channels) + "," + std::to_string(s.height) + "," +
           std::to_string(s.width) + "}";
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Vector>;
using MapVecC = Eigen::Map<const Vector>;

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Node make(Op op, Shape s) {
    Node n;
    n.op = op;
    n.shape = s;
    return n;
}

}  // namespace

const Node& Graph::ref(int i, const char* who) const {
    if (i < 0 || i >= n_nodes()) fail(who, i, "no such node");
    return nodes_[i];
}

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return n_nodes() - 1;
}

int Graph::input(Shape s, std::string name) {
    Node n = make(Op::Input, s);
    n.name = std::move(name);
    int id = push(std::move(n));
    inputs_.push_back(id);
    return id;
}

int Graph::param(Shape s, std::string name) {
    Node n = make(Op::Param, s);
    n.param_offset = n_params_;
    n.name = std::move(name);
    n_params_ += s.size();
    return push(std::move(n));
}

int Graph::constant(Vector v, Shape s) {
    if (v.size() != s.size()) fail("constant", n_nodes(), "value length does not match shape");
    Node n = make(Op::Const, s);
    n.value = std::move(v);
    return push(std::move(n));
}

int Graph::affine(int w, int b, int x) {
    const Node& wn = ref(w, "affine");
    const Node& bn = ref(b, "affine");
    const Node& xn = ref(x, "affine");
    const int out = wn.shape.height, in = wn.shape.width;
    if (wn.shape.channels != 1) fail("affine", w, "weight shape must be {1,out,in}, got " + shape_str(wn.shape));
    if (bn.shape.size() != out) fail("affine", b, "bias length " + std::to_string(bn.shape.size()) + " != rows " + std::to_string(out));
    if (xn.shape.size() != in) fail("affine", x, "input size " + std::to_string(xn.shape.size()) + " != cols " + std::to_string(in));
    Node n = make(Op::Affine, Shape::vec(out));
    n.a = w; n.b = b; n.c = x;
    return push(std::move(n));
}

int Graph::conv2d(int kernel, int bias, int x, int out_channels, int ksize) {
    const Node& kn = ref(kernel, "conv2d");
    const Node& bn = ref(bias, "conv2d");
    const Node& xn = ref(x, "conv2d");
    if (ksize % 2 != 1 || ksize < 1) fail("conv2d", kernel, "kernel size must be odd");
    const int ci = xn.shape.channels;
    if (kn.shape.size() != out_channels * ci * ksize * ksize)
        fail("conv2d", kernel, "kernel has " + std::to_string(kn.shape.size()) + " entries, expected " +
                                   std::to_string(out_channels * ci * ksize * ksize));
    if (bn.shape.size() != out_channels) fail("conv2d", bias, "bias length != out_channels");
    Node n = make(Op::Conv2d, Shape::image(out_channels, xn.shape.height, xn.shape.width));
    n.a = kernel; n.b = bias; n.c = x;
    n.conv = {out_channels, ci, ksize};
    return push(std::move(n));
}

#define MME_UNARY(fn, OPK)                      \
    int Graph::fn(int x) {                      \
        const Node& xn = ref(x, #fn);           \
        Node n = make(Op::OPK, xn.shape);              \
        n.a = x;                                \
        return push(std::move(n));              \
    }

MME_UNARY(tanh, Tanh)
MME_UNARY(relu, Relu)
MME_UNARY(exp, Exp)
MME_UNARY(sigmoid, Sigmoid)
MME_UNARY(square, Square)
#undef MME_UNARY

int Graph::scale(int x, double factor) {
    const Node& xn = ref(x, "scale");
    Node n = make(Op::Scale, xn.shape);
    n.a = x;
    n.factor = factor;
    return push(std::move(n));
}

#define MME_BINARY(fn, OPK)                                                          \
    int Graph::fn(int x, int y) {                                                    \
        const Node& xn = ref(x, #fn);                                                \
        const Node& yn = ref(y, #fn);                                                \
        if (xn.shape.size() != yn.shape.size())                                      \
            fail(#fn, y, "shape " + shape_str(yn.shape) + " does not match node " +  \
                             std::to_string(x) + " shape " + shape_str(xn.shape));   \
        Node n = make(Op::OPK, xn.shape);                                                   \
        n.a = x; n.b = y;                                                            \
        return push(std::move(n));                                                   \
    }

MME_BINARY(add, Add)
MME_BINARY(sub, Sub)
MME_BINARY(mul, Mul)
#undef MME_BINARY

int Graph::sum(int x) {
    ref(x, "sum");
    Node n = make(Op::Sum, Shape::scalar());
    n.a = x;
    return push(std::move(n));
}

int Graph::mean(int x) {
    ref(x, "mean");
    Node n = make(Op::Mean, Shape::scalar());
    n.a = x;
    return push(std::move(n));
}

int Graph::softmax(int x) {
    const Node& xn = ref(x, "softmax");
    Node n = make(Op::Softmax, xn.shape);
    n.a = x;
    return push(std::move(n));
}

int Graph::softmax_xent(int logits, int target) {
    const Node& ln = ref(logits, "softmax_xent");
    const Node& tn = ref(target, "softmax_xent");
    if (ln.shape.size() != tn.shape.size()) fail("softmax_xent", target, "target length != logits length");
    Node n = make(Op::SoftmaxXent, Shape::scalar());
    n.a = logits; n.b = target;
    return push(std::move(n));
}

int Graph::sigmoid_xent(int logits, int target) {
    const Node& ln = ref(logits, "sigmoid_xent");
    const Node& tn = ref(target, "sigmoid_xent");
    if (ln.shape.size() != tn.shape.size()) fail("sigmoid_xent", target, "target length != logits length");
    Node n = make(Op::SigmoidXent, Shape::scalar());
    n.a = logits; n.b = target;
    return push(std::move(n));
}

Workspace::Workspace(const Graph& g) : g_(&g) {
    const int n = g.n_nodes();
    val_.resize(n);
    adj_.resize(n);
    bound_.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        const Node& node = g.node(i);
        // Param values live in the external flat vector; Const values in the graph.
        if (node.op != Op::Param && node.op != Op::Const) val_[i] = Vector::Zero(node.shape.size());
        if (node.op != Op::Param) adj_[i] = Vector::Zero(node.shape.size());
    }
    pgrad_ = Vector::Zero(g.n_params());
}

void Workspace::bind(int input_node, const Vector& v) { bind_raw(input_node, v.data(), v.size()); }

void Workspace::bind_raw(int input_node, const double* data, Index n) {
    if (!g_) throw std::logic_error("Workspace: not attached to a graph");
    if (input_node < 0 || input_node >= g_->n_nodes() || g_->node(input_node).op != Op::Input)
        fail("bind", input_node, "not an input node");
    if (n != g_->node(input_node).shape.size())
        fail("bind", input_node,
             "bound length " + std::to_string(n) + " != declared size " +
                 std::to_string(g_->node(input_node).shape.size()));
    val_[input_node] = MapVecC(data, n);
    bound_[input_node] = 1;
}

const double* Workspace::in_ptr(int node, const Vector& params) const {
    const Node& n = g_->node(node);
    if (n.op == Op::Param) return params.data() + n.param_offset;
    if (n.op == Op::Const) return n.value.data();
    return val_[node].data();
}

double* Workspace::adj_ptr(int node) {
    const Node& n = g_->node(node);
    if (n.op == Op::Param) return pgrad_.data() + n.param_offset;
    return adj_[node].data();
}

void Workspace::forward(const Vector& params) {
    if (!g_) throw std::logic_error("Workspace: not attached to a graph");
    if (params.size() != g_->n_params())
        throw std::invalid_argument("forward: parameter vector length " + std::to_string(params.size()) +
                                    " != graph parameter count " + std::to_string(g_->n_params()));
    const int n = g_->n_nodes();
    for (int i = 0; i < n; ++i) {
        const Node& node = g_->node(i);
        const int sz = node.shape.size();
        switch (node.op) {
            case Op::Input:
                if (!bound_[i]) fail("forward", i, "input '" + node.name + "' not bound");
                break;
            case Op::Param:
            case Op::Const:
                break;
            case Op::Affine: {
                const int out = node.shape.size();
                const int in = g_->node(node.c).shape.size();
                MapRowC w(in_ptr(node.a, params), out, in);
                MapVecC b(in_ptr(node.b, params), out);
                MapVecC x(in_ptr(node.c, params), in);
                val_[i].noalias() = w * x;
                val_[i] += b;
                break;
            }
            case Op::Conv2d: {
                const ConvMeta& cm = node.conv;
                const int h = node.shape.height, w = node.shape.width;
                const int p = (cm.ksize - 1) / 2;
                const double* k = in_ptr(node.a, params);
                const double* b = in_ptr(node.b, params);
                const double* x = in_ptr(node.c, params);
                double* y = val_[i].data();
                for (int oc = 0; oc < cm.out_channels; ++oc) {
                    for (int r = 0; r < h; ++r)
                        for (int col = 0; col < w; ++col) {
                            double acc = b[oc];
                            for (int ic = 0; ic < cm.in_channels; ++ic) {
                                const double* xc = x + (ic * h) * w;
                                const double* kc = k + ((oc * cm.in_channels + ic) * cm.ksize) * cm.ksize;
                                for (int ki = 0; ki < cm.ksize; ++ki) {
                                    const int rr = r + ki - p;
                                    if (rr < 0 || rr >= h) continue;
                                    for (int kj = 0; kj < cm.ksize; ++kj) {
                                        const int cc = col + kj - p;
                                        if (cc < 0 || cc >= w) continue;
                                        acc += kc[ki * cm.ksize + kj] * xc[rr * w + cc];
                                    }
                                }
                            }
                            y[(oc * h + r) * w + col] = acc;
                        }
                }
                break;
            }
            case Op::Tanh:
                val_[i] = MapVecC(in_ptr(node.a, params), sz).array().tanh();
                break;
            case Op::Relu:
                val_[i] = MapVecC(in_ptr(node.a, params), sz).array().max(0.0);
                break;
            case Op::Exp:
                val_[i] = MapVecC(in_ptr(node.a, params), sz).array().exp();
                break;
            case Op::Sigmoid: {
                MapVecC x(in_ptr(node.a, params), sz);
                for (Index j = 0; j < sz; ++j) val_[i][j] = stable_sigmoid(x[j]);
                break;
            }
            case Op::Square:
                val_[i] = MapVecC(in_ptr(node.a, params), sz).array().square();
                break;
            case Op::Scale:
                val_[i] = node.factor * MapVecC(in_ptr(node.a, params), sz);
                break;
            case Op::Add:
                val_[i] = MapVecC(in_ptr(node.a, params), sz) + MapVecC(in_ptr(node.b, params), sz);
                break;
            case Op::Sub:
                val_[i] = MapVecC(in_ptr(node.a, params), sz) - MapVecC(in_ptr(node.b, params), sz);
                break;
            case Op::Mul:
                val_[i] = MapVecC(in_ptr(node.a, params), sz).cwiseProduct(
                    MapVecC(in_ptr(node.b, params), sz));
                break;
            case Op::Sum:
                val_[i][0] = MapVecC(in_ptr(node.a, params), g_->node(node.a).shape.size()).sum();
                break;
            case Op::Mean:
                val_[i][0] = MapVecC(in_ptr(node.a, params), g_->node(node.a).shape.size()).mean();
                break;
            case Op::Softmax: {
                MapVecC z(in_ptr(node.a, params), sz);
                const double zmax = z.maxCoeff();
                val_[i] = (z.array() - zmax).exp();
                val_[i] /= val_[i].sum();
                break;
            }
            case Op::SoftmaxXent: {
                const int m = g_->node(node.a).shape.size();
                MapVecC z(in_ptr(node.a, params), m);
                MapVecC t(in_ptr(node.b, params), m);
                const double zmax = z.maxCoeff();
                const double lse = std::log((z.array() - zmax).exp().sum()) + zmax;
                val_[i][0] = t.sum() * lse - t.dot(z);
                break;
            }
            case Op::SigmoidXent: {
                const int m = g_->node(node.a).shape.size();
                MapVecC z(in_ptr(node.a, params), m);
                MapVecC t(in_ptr(node.b, params), m);
                double acc = 0.0;
                for (Index j = 0; j < m; ++j)
                    acc += std::max(z[j], 0.0) - z[j] * t[j] + std::log1p(std::exp(-std::abs(z[j])));
                val_[i][0] = acc;
                break;
            }
        }
    }
    forward_done_ = true;
}

void Workspace::backward(int seed_node, const Vector& params) {
    if (!forward_done_) throw std::logic_error("backward: forward has not run");
    if (seed_node < 0 || seed_node >= g_->n_nodes()) fail("backward", seed_node, "no such node");
    if (g_->node(seed_node).shape.size() != 1) fail("backward", seed_node, "seed node is not scalar");

    for (auto& a : adj_)
        if (a.size() > 0) a.setZero();
    pgrad_.setZero();
    adj_[seed_node][0] = 1.0;

    for (int i = seed_node; i >= 0; --i) {
        const Node& node = g_->node(i);
        if (node.op == Op::Input || node.op == Op::Param || node.op == Op::Const) continue;
        const Vector& dy = adj_[i];
        const int sz = node.shape.size();
        switch (node.op) {
            case Op::Affine: {
                const int out = sz;
                const int in = g_->node(node.c).shape.size();
                MapRowC w(in_ptr(node.a, params), out, in);
                MapVecC x(in_ptr(node.c, params), in);
                MapRow dw(adj_ptr(node.a), out, in);
                MapVec db(adj_ptr(node.b), out);
                MapVec dx(adj_ptr(node.c), in);
                dw.noalias() += dy * x.transpose();
                db += dy;
                dx.noalias() += w.transpose() * dy;
                break;
            }
            case Op::Conv2d: {
                const ConvMeta& cm = node.conv;
                const int h = node.shape.height, w = node.shape.width;
                const int p = (cm.ksize - 1) / 2;
                const double* k = in_ptr(node.a, params);
                const double* x = in_ptr(node.c, params);
                double* dk = adj_ptr(node.a);
                double* db = adj_ptr(node.b);
                double* dx = adj_ptr(node.c);
                const double* dyp = dy.data();
                for (int oc = 0; oc < cm.out_channels; ++oc) {
                    for (int r = 0; r < h; ++r)
                        for (int col = 0; col < w; ++col) {
                            const double g = dyp[(oc * h + r) * w + col];
                            if (g == 0.0) continue;
                            db[oc] += g;
                            for (int ic = 0; ic < cm.in_channels; ++ic) {
                                const double* xc = x + (ic * h) * w;
                                double* dxc = dx + (ic * h) * w;
                                const int kbase = ((oc * cm.in_channels + ic) * cm.ksize) * cm.ksize;
                                for (int ki = 0; ki < cm.ksize; ++ki) {
                                    const int rr = r + ki - p;
                                    if (rr < 0 || rr >= h) continue;
                                    for (int kj = 0; kj < cm.ksize; ++kj) {
                                        const int cc = col + kj - p;
                                        if (cc < 0 || cc >= w) continue;
                                        dk[kbase + ki * cm.ksize + kj] += g * xc[rr * w + cc];
                                        dxc[rr * w + cc] += g * k[kbase + ki * cm.ksize + kj];
                                    }
                                }
                            }
                        }
                }
                break;
            }
            case Op::Tanh:
                MapVec(adj_ptr(node.a), sz).array() += dy.array() * (1.0 - val_[i].array().square());
                break;
            case Op::Relu: {
                MapVecC x(in_ptr(node.a, params), sz);
                MapVec(adj_ptr(node.a), sz).array() +=
                    dy.array() * (x.array() > 0.0).cast<double>();
                break;
            }
            case Op::Exp:
                MapVec(adj_ptr(node.a), sz).array() += dy.array() * val_[i].array();
                break;
            case Op::Sigmoid:
                MapVec(adj_ptr(node.a), sz).array() +=
                    dy.array() * val_[i].array() * (1.0 - val_[i].array());
                break;
            case Op::Square: {
                MapVecC x(in_ptr(node.a, params), sz);
                MapVec(adj_ptr(node.a), sz).array() += 2.0 * dy.array() * x.array();
                break;
            }
            case Op::Scale:
                MapVec(adj_ptr(node.a), sz) += node.factor * dy;
                break;
            case Op::Add:
                MapVec(adj_ptr(node.a), sz) += dy;
                MapVec(adj_ptr(node.b), sz) += dy;
                break;
            case Op::Sub:
                MapVec(adj_ptr(node.a), sz) += dy;
                MapVec(adj_ptr(node.b), sz) -= dy;
                break;
            case Op::Mul:
                MapVec(adj_ptr(node.a), sz).array() +=
                    dy.array() * MapVecC(in_ptr(node.b, params), sz).array();
                MapVec(adj_ptr(node.b), sz).array() +=
                    dy.array() * MapVecC(in_ptr(node.a, params), sz).array();
                break;
            case Op::Sum: {
                const int m = g_->node(node.a).shape.size();
                MapVec(adj_ptr(node.a), m).array() += dy[0];
                break;
            }
            case Op::Mean: {
                const int m = g_->node(node.a).shape.size();
                MapVec(adj_ptr(node.a), m).array() += dy[0] / m;
                break;
            }
            case Op::Softmax: {
                const Vector& pv = val_[i];
                const double dot = dy.dot(pv);
                MapVec(adj_ptr(node.a), sz).array() += pv.array() * (dy.array() - dot);
                break;
            }
            case Op::SoftmaxXent: {
                const int m = g_->node(node.a).shape.size();
                MapVecC z(in_ptr(node.a, params), m);
                MapVecC t(in_ptr(node.b, params), m);
                const double zmax = z.maxCoeff();
                Vector pv = (z.array() - zmax).exp();
                const double norm = pv.sum();
                pv /= norm;
                const double lse = std::log(norm) + zmax;
                const double g = dy[0];
                MapVec(adj_ptr(node.a), m) += g * (t.sum() * pv - t);
                MapVec(adj_ptr(node.b), m).array() += g * (lse - z.array());
                break;
            }
            case Op::SigmoidXent: {
                const int m = g_->node(node.a).shape.size();
                MapVecC z(in_ptr(node.a, params), m);
                MapVecC t(in_ptr(node.b, params), m);
                const double g = dy[0];
                double* dz = adj_ptr(node.a);
                double* dt = adj_ptr(node.b);
                for (Index j = 0; j < m; ++j) {
                    dz[j] += g * (stable_sigmoid(z[j]) - t[j]);
                    dt[j] += g * (-z[j]);
                }
                break;
            }
            default:
                break;
        }
    }
}

}  // namespace mme::ad
