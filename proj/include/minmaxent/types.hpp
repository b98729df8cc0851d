#pragma once

#include <Eigen/Core>

namespace mme {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Eigen::Index;

/// Dense value shape: channels x height x width. Plain vectors are {1, 1, n}.
struct Shape {
    int channels = 1;
    int height = 1;
    int width = 1;

    constexpr int size() const { return channels * height * width; }
    constexpr bool operator==(const Shape&) const = default;

    static constexpr Shape vec(int n) { return {1, 1, n}; }
    static constexpr Shape scalar() { return {1, 1, 1}; }
    static constexpr Shape image(int c, int h, int w) { return {c, h, w}; }
};

}  // namespace mme
