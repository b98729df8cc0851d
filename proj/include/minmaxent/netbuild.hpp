#pragma once

#include <cstdint>
#include <vector>

#include "minmaxent/autodiff.hpp"
#include "minmaxent/rng.hpp"
#include "minmaxent/types.hpp"

namespace mme::detail {

// Shared layer construction. Parameter nodes are declared in a fixed order
// (W then b per layer), so two graphs built with the same calls share one
// flat parameter layout.

/// Dense layers: hidden widths with activation, then a linear output layer.
/// Returns the output (logits) node.
int build_mlp(ad::Graph& g, int x, int input_dim, const std::vector<int>& hidden, int out_dim,
              bool tanh_activation);

/// Two conv(ksize, channels) + activation blocks, flatten, dense to out_dim.
int build_cnn(ad::Graph& g, int x, int side, int channels, int ksize, int out_dim,
              bool tanh_activation);

/// Glorot-uniform initial parameters matching build_mlp's layout; biases are
/// randomized to the same range to diversify the unit thresholds.
Vector init_mlp(int input_dim, const std::vector<int>& hidden, int out_dim, std::uint64_t seed);

/// Glorot-uniform initial parameters matching build_cnn's layout. Biases zero.
Vector init_cnn(int side, int channels, int ksize, int out_dim, std::uint64_t seed);

int mlp_param_count(int input_dim, const std::vector<int>& hidden, int out_dim);
int cnn_param_count(int side, int channels, int ksize, int out_dim);

}  // namespace mme::detail
