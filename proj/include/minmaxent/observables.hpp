#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "minmaxent/autodiff.hpp"
#include "minmaxent/types.hpp"

namespace mme {

// Parametric observable families f_i[theta](x) whose training-set averages act
// as the model's constraints. Two closed-form families (moments in 1D, a
// rotated quadratic pair in 2D) and two neural ones (MLP, CNN) share a single
// interface: values, the weighted combination sum_j w_j f_j, and its gradient
// with respect to theta.

enum class Family { Moments, RotatedQuadratic, Mlp, Cnn };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

/// Evaluation scratch; holds the autodiff workspace for neural families.
struct ObsWorkspace {
    std::optional<ad::Workspace> ws;
};

/// Values plus optional derivatives at one configuration.
struct ObservableEval {
    Vector values;        // length n_obs
    Matrix jacobian_x;    // n_obs x dim, when requested
    Matrix param_grads;   // n_obs x n_params, when requested
};

class ObservableSet {
public:
    /// f1 = x, f2 = x^2 on scalar configurations. No theta parameters.
    static ObservableSet moments();

    /// f1 = (cos t x + sin t y)^2, f2 = (-sin t x + cos t y)^2; theta = {t}.
    static ObservableSet rotated_quadratic(double angle = 0.0);

    static ObservableSet mlp(int input_dim, const std::vector<int>& hidden, int n_obs,
                             std::uint64_t seed);

    /// conv(ksize, channels) -> tanh -> conv -> tanh -> flatten -> affine.
    static ObservableSet cnn(int image_side, int n_obs, std::uint64_t seed, int channels = 8,
                             int ksize = 3);

    Family family() const { return family_; }
    int input_dim() const { return input_dim_; }
    int n_obs() const { return n_obs_; }
    int n_params() const { return static_cast<int>(theta_.size()); }
    const Vector& theta() const { return theta_; }
    Vector& theta() { return theta_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<int>& hidden_layout() const { return hidden_; }

    ObsWorkspace make_workspace() const;

    /// f(x); values are finite for finite input.
    void evaluate(const Vector& x, Vector& out, ObsWorkspace& ws) const;
    Vector evaluate(const Vector& x, ObsWorkspace& ws) const;

    /// sum_j w_j f_j(x) in one pass (the effective energy when w = lambda).
    double weighted_value(const double* x, const Vector& w, ObsWorkspace& ws) const;

    /// d(sum_j w_j f_j)/dtheta, flat layout matching theta.
    void parameter_gradients(const Vector& x, const Vector& w, Vector& grad, ObsWorkspace& ws) const;

    /// d(sum_j w_j f_j)/dx.
    void input_gradient(const Vector& x, const Vector& w, Vector& grad, ObsWorkspace& ws) const;

    ObservableEval evaluate_full(const Vector& x, bool want_jacobian, bool want_param_grads,
                                 ObsWorkspace& ws) const;

    void save(const std::string& path) const;
    static ObservableSet load(const std::string& path);

private:
    ObservableSet() = default;
    void build_graph();
    void check_input(const Vector& x) const;

    Family family_ = Family::Moments;
    int input_dim_ = 1;
    int n_obs_ = 2;
    std::uint64_t seed_ = 0;
    Vector theta_;

    // Neural families only.
    std::vector<int> hidden_;
    int image_side_ = 0;
    int channels_ = 0;
    int ksize_ = 3;
    std::shared_ptr<const ad::Graph> graph_;  // shared across copies; structure is immutable
    int x_node_ = -1, w_node_ = -1, f_node_ = -1, weighted_node_ = -1;
    Vector zero_w_;
};

}  // namespace mme
