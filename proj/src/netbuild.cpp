#include "minmaxent/netbuild.hpp"

#include <stdexcept>

namespace mme::detail {

namespace {

void glorot_fill(double* dst, int count, int fan_in, int fan_out, CounterRng& rng) {
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < count; ++i) dst[i] = uniform(rng, -r, r);
}

}  // namespace

int build_mlp(ad::Graph& g, int x, int input_dim, const std::vector<int>& hidden, int out_dim,
              bool tanh_activation) {
    if (out_dim < 1) throw std::invalid_argument("build_mlp: output width must be >= 1");
    int h = x;
    int in = input_dim;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
        const int width = hidden[l];
        if (width < 1) throw std::invalid_argument("build_mlp: zero-width hidden layer");
        const int w = g.param(Shape{1, width, in}, "W" + std::to_string(l));
        const int b = g.param(Shape::vec(width), "b" + std::to_string(l));
        h = g.affine(w, b, h);
        h = tanh_activation ? g.tanh(h) : g.relu(h);
        in = width;
    }
    const int w = g.param(Shape{1, out_dim, in}, "Wout");
    const int b = g.param(Shape::vec(out_dim), "bout");
    return g.affine(w, b, h);
}

int build_cnn(ad::Graph& g, int x, int side, int channels, int ksize, int out_dim,
              bool tanh_activation) {
    if (side < 4) throw std::invalid_argument("build_cnn: image side must be >= 4");
    if (out_dim < 1) throw std::invalid_argument("build_cnn: output width must be >= 1");
    const int k1 = g.param(Shape::vec(channels * 1 * ksize * ksize), "K1");
    const int b1 = g.param(Shape::vec(channels), "bc1");
    int h = g.conv2d(k1, b1, x, channels, ksize);
    h = tanh_activation ? g.tanh(h) : g.relu(h);
    const int k2 = g.param(Shape::vec(channels * channels * ksize * ksize), "K2");
    const int b2 = g.param(Shape::vec(channels), "bc2");
    h = g.conv2d(k2, b2, h, channels, ksize);
    h = tanh_activation ? g.tanh(h) : g.relu(h);
    // Flatten is implicit: affine consumes the conv stack as one flat vector.
    const int flat = channels * side * side;
    const int w = g.param(Shape{1, out_dim, flat}, "Wout");
    const int b = g.param(Shape::vec(out_dim), "bout");
    return g.affine(w, b, h);
}

int mlp_param_count(int input_dim, const std::vector<int>& hidden, int out_dim) {
    int n = 0, in = input_dim;
    for (int width : hidden) {
        n += width * in + width;
        in = width;
    }
    return n + out_dim * in + out_dim;
}

int cnn_param_count(int side, int channels, int ksize, int out_dim) {
    const int c1 = channels * ksize * ksize + channels;
    const int c2 = channels * channels * ksize * ksize + channels;
    const int fc = out_dim * channels * side * side + out_dim;
    return c1 + c2 + fc;
}

Vector init_mlp(int input_dim, const std::vector<int>& hidden, int out_dim, std::uint64_t seed) {
    Vector theta = Vector::Zero(mlp_param_count(input_dim, hidden, out_dim));
    CounterRng rng(seed);
    int off = 0, in = input_dim;
    // Randomized biases break the odd symmetry of zero-bias tanh stacks and
    // spread the unit thresholds over the input range, so the initial outputs
    // already vary across the data.
    auto layer = [&](int out) {
        glorot_fill(theta.data() + off, out * in, in, out, rng);
        off += out * in;
        glorot_fill(theta.data() + off, out, in, out, rng);
        off += out;
        in = out;
    };
    for (int width : hidden) layer(width);
    layer(out_dim);
    return theta;
}

Vector init_cnn(int side, int channels, int ksize, int out_dim, std::uint64_t seed) {
    Vector theta = Vector::Zero(cnn_param_count(side, channels, ksize, out_dim));
    CounterRng rng(seed);
    int off = 0;
    const int kk = ksize * ksize;
    glorot_fill(theta.data() + off, channels * kk, 1 * kk, channels * kk, rng);
    off += channels * kk + channels;
    glorot_fill(theta.data() + off, channels * channels * kk, channels * kk, channels * kk, rng);
    off += channels * channels * kk + channels;
    const int flat = channels * side * side;
    glorot_fill(theta.data() + off, out_dim * flat, flat, out_dim, rng);
    return theta;
}

}  // namespace mme::detail
