#include "minmaxent/observables.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "minmaxent/io.hpp"
#include "minmaxent/netbuild.hpp"

namespace mme {

std::string family_name(Family f) {
    switch (f) {
        case Family::Moments: return "moments";
        case Family::RotatedQuadratic: return "rotated-quadratic";
        case Family::Mlp: return "mlp";
        case Family::Cnn: return "cnn";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "moments") return Family::Moments;
    if (name == "rotated-quadratic") return Family::RotatedQuadratic;
    if (name == "mlp") return Family::Mlp;
    if (name == "cnn") return Family::Cnn;
    throw std::invalid_argument("unknown observable family '" + name + "'");
}

ObservableSet ObservableSet::moments() {
    ObservableSet s;
    s.family_ = Family::Moments;
    s.input_dim_ = 1;
    s.n_obs_ = 2;
    s.theta_ = Vector();
    return s;
}

ObservableSet ObservableSet::rotated_quadratic(double angle) {
    ObservableSet s;
    s.family_ = Family::RotatedQuadratic;
    s.input_dim_ = 2;
    s.n_obs_ = 2;
    s.theta_ = Vector::Constant(1, angle);
    return s;
}

ObservableSet ObservableSet::mlp(int input_dim, const std::vector<int>& hidden, int n_obs,
                                 std::uint64_t seed) {
    if (n_obs < 1) throw std::invalid_argument("mlp observables: n_obs must be >= 1");
    if (input_dim < 1) throw std::invalid_argument("mlp observables: input_dim must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("mlp observables: hidden layout is empty");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("mlp observables: zero-width hidden layer");
    ObservableSet s;
    s.family_ = Family::Mlp;
    s.input_dim_ = input_dim;
    s.n_obs_ = n_obs;
    s.seed_ = seed;
    s.hidden_ = hidden;
    s.theta_ = detail::init_mlp(input_dim, hidden, n_obs, seed);
    s.build_graph();
    return s;
}

ObservableSet ObservableSet::cnn(int image_side, int n_obs, std::uint64_t seed, int channels,
                                 int ksize) {
    if (image_side < 4) throw std::invalid_argument("cnn observables: image_side must be >= 4");
    if (n_obs < 1) throw std::invalid_argument("cnn observables: n_obs must be >= 1");
    ObservableSet s;
    s.family_ = Family::Cnn;
    s.input_dim_ = image_side * image_side;
    s.n_obs_ = n_obs;
    s.seed_ = seed;
    s.image_side_ = image_side;
    s.channels_ = channels;
    s.ksize_ = ksize;
    s.theta_ = detail::init_cnn(image_side, channels, ksize, n_obs, seed);
    s.build_graph();
    return s;
}

void ObservableSet::build_graph() {
    auto g = std::make_shared<ad::Graph>();
    if (family_ == Family::Mlp) {
        x_node_ = g->input(Shape::vec(input_dim_), "x");
        w_node_ = g->input(Shape::vec(n_obs_), "w");
        f_node_ = detail::build_mlp(*g, x_node_, input_dim_, hidden_, n_obs_, /*tanh=*/true);
    } else {
        x_node_ = g->input(Shape::image(1, image_side_, image_side_), "x");
        w_node_ = g->input(Shape::vec(n_obs_), "w");
        f_node_ = detail::build_cnn(*g, x_node_, image_side_, channels_, ksize_, n_obs_, /*tanh=*/true);
    }
    weighted_node_ = g->sum(g->mul(f_node_, w_node_));
    zero_w_ = Vector::Zero(n_obs_);
    graph_ = std::move(g);
}

ObsWorkspace ObservableSet::make_workspace() const {
    ObsWorkspace ws;
    if (graph_) ws.ws.emplace(*graph_);
    return ws;
}

void ObservableSet::check_input(const Vector& x) const {
    if (x.size() != input_dim_)
        throw std::invalid_argument("observables: input length " + std::to_string(x.size()) +
                                    " != dimensionality " + std::to_string(input_dim_));
    if (!x.allFinite()) throw std::invalid_argument("observables: non-finite input configuration");
}

void ObservableSet::evaluate(const Vector& x, Vector& out, ObsWorkspace& ws) const {
    check_input(x);
    out.resize(n_obs_);
    switch (family_) {
        case Family::Moments:
            out[0] = x[0];
            out[1] = x[0] * x[0];
            return;
        case Family::RotatedQuadratic: {
            const double c = std::cos(theta_[0]), s = std::sin(theta_[0]);
            const double u = c * x[0] + s * x[1];
            const double v = -s * x[0] + c * x[1];
            out[0] = u * u;
            out[1] = v * v;
            return;
        }
        default: {
            ws.ws->bind(x_node_, x);
            ws.ws->bind(w_node_, zero_w_);
            ws.ws->forward(theta_);
            out = ws.ws->value(f_node_);
            return;
        }
    }
}

Vector ObservableSet::evaluate(const Vector& x, ObsWorkspace& ws) const {
    Vector out;
    evaluate(x, out, ws);
    return out;
}

double ObservableSet::weighted_value(const double* x, const Vector& w, ObsWorkspace& ws) const {
    if (w.size() != n_obs_)
        throw std::invalid_argument("observables: weight length != n_obs");
    switch (family_) {
        case Family::Moments:
            return w[0] * x[0] + w[1] * x[0] * x[0];
        case Family::RotatedQuadratic: {
            const double c = std::cos(theta_[0]), s = std::sin(theta_[0]);
            const double u = c * x[0] + s * x[1];
            const double v = -s * x[0] + c * x[1];
            return w[0] * u * u + w[1] * v * v;
        }
        default: {
            ws.ws->bind_raw(x_node_, x, input_dim_);
            ws.ws->bind(w_node_, w);
            ws.ws->forward(theta_);
            return ws.ws->value(weighted_node_)[0];
        }
    }
}

void ObservableSet::parameter_gradients(const Vector& x, const Vector& w, Vector& grad,
                                        ObsWorkspace& ws) const {
    check_input(x);
    if (w.size() != n_obs_)
        throw std::invalid_argument("observables: weight length " + std::to_string(w.size()) +
                                    " != n_obs " + std::to_string(n_obs_));
    grad.resize(n_params());
    switch (family_) {
        case Family::Moments:
            return;  // no parameters
        case Family::RotatedQuadratic: {
            const double c = std::cos(theta_[0]), s = std::sin(theta_[0]);
            const double u = c * x[0] + s * x[1];
            const double v = -s * x[0] + c * x[1];
            // df1/dt = 2uv, df2/dt = -2uv
            grad[0] = (w[0] - w[1]) * 2.0 * u * v;
            return;
        }
        default: {
            ws.ws->bind(x_node_, x);
            ws.ws->bind(w_node_, w);
            ws.ws->forward(theta_);
            ws.ws->backward(weighted_node_, theta_);
            grad = ws.ws->param_grad();
            return;
        }
    }
}

void ObservableSet::input_gradient(const Vector& x, const Vector& w, Vector& grad,
                                   ObsWorkspace& ws) const {
    check_input(x);
    if (w.size() != n_obs_) throw std::invalid_argument("observables: weight length != n_obs");
    grad.resize(input_dim_);
    switch (family_) {
        case Family::Moments:
            grad[0] = w[0] + 2.0 * w[1] * x[0];
            return;
        case Family::RotatedQuadratic: {
            const double c = std::cos(theta_[0]), s = std::sin(theta_[0]);
            const double u = c * x[0] + s * x[1];
            const double v = -s * x[0] + c * x[1];
            grad[0] = 2.0 * (w[0] * u * c - w[1] * v * s);
            grad[1] = 2.0 * (w[0] * u * s + w[1] * v * c);
            return;
        }
        default: {
            ws.ws->bind(x_node_, x);
            ws.ws->bind(w_node_, w);
            ws.ws->forward(theta_);
            ws.ws->backward(weighted_node_, theta_);
            grad = ws.ws->adjoint(x_node_);
            return;
        }
    }
}

ObservableEval ObservableSet::evaluate_full(const Vector& x, bool want_jacobian,
                                            bool want_param_grads, ObsWorkspace& ws) const {
    ObservableEval ev;
    evaluate(x, ev.values, ws);
    Vector w = Vector::Zero(n_obs_), g;
    if (want_jacobian) ev.jacobian_x.resize(n_obs_, input_dim_);
    if (want_param_grads) ev.param_grads.resize(n_obs_, n_params());
    for (int j = 0; j < n_obs_ && (want_jacobian || want_param_grads); ++j) {
        w.setZero();
        w[j] = 1.0;
        if (want_jacobian) {
            input_gradient(x, w, g, ws);
            ev.jacobian_x.row(j) = g;
        }
        if (want_param_grads) {
            parameter_gradients(x, w, g, ws);
            ev.param_grads.row(j) = g;
        }
    }
    return ev;
}

void ObservableSet::save(const std::string& path) const {
    io::Checkpoint ck;
    ck.set("format", "minmaxent-observables 1");
    ck.set("family", family_name(family_));
    ck.set("input_dim", std::to_string(input_dim_));
    ck.set("n_obs", std::to_string(n_obs_));
    ck.set("seed", std::to_string(seed_));
    if (family_ == Family::Mlp) {
        std::ostringstream h;
        for (std::size_t i = 0; i < hidden_.size(); ++i) h << (i ? " " : "") << hidden_[i];
        ck.set("hidden", h.str());
    }
    if (family_ == Family::Cnn) {
        ck.set("image_side", std::to_string(image_side_));
        ck.set("channels", std::to_string(channels_));
        ck.set("ksize", std::to_string(ksize_));
    }
    ck.blob = theta_;
    io::save_checkpoint(path, ck);
}

ObservableSet ObservableSet::load(const std::string& path) {
    const io::Checkpoint ck = io::load_checkpoint(path);
    const Family fam = family_from_name(ck.get("family"));
    ObservableSet s;
    switch (fam) {
        case Family::Moments:
            s = moments();
            break;
        case Family::RotatedQuadratic:
            s = rotated_quadratic();
            break;
        case Family::Mlp: {
            std::vector<int> hidden;
            std::istringstream h(ck.get("hidden"));
            int v;
            while (h >> v) hidden.push_back(v);
            s = mlp(std::stoi(ck.get("input_dim")), hidden, std::stoi(ck.get("n_obs")),
                    std::stoull(ck.get("seed")));
            break;
        }
        case Family::Cnn:
            s = cnn(std::stoi(ck.get("image_side")), std::stoi(ck.get("n_obs")),
                    std::stoull(ck.get("seed")), std::stoi(ck.get("channels")),
                    std::stoi(ck.get("ksize")));
            break;
    }
    if (ck.blob.size() != s.theta_.size())
        throw std::runtime_error("observables checkpoint " + path + ": parameter count mismatch");
    s.theta_ = ck.blob;
    return s;
}

}  // namespace mme
