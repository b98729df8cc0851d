#include "minmaxent/nets.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "minmaxent/adam.hpp"
#include "minmaxent/rng.hpp"

namespace mme {

namespace {

struct Shuffled {
    Matrix x;              // holdout rows at the tail
    std::vector<int> label;
    int n_train = 0, n_holdout = 0;
};

Shuffled split(const Matrix& x, const std::vector<int>& label, double holdout_fraction,
               std::uint64_t seed) {
    const int n = static_cast<int>(x.rows());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    CounterRng rng(CounterRng::derive(seed, 0x57));
    for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[uniform_index(rng, i + 1)]);

    Shuffled s;
    s.n_holdout = std::clamp(static_cast<int>(holdout_fraction * n), n > 1 ? 1 : 0, n - 1);
    s.n_train = n - s.n_holdout;
    s.x.resize(n, x.cols());
    s.label.resize(n);
    for (int i = 0; i < n; ++i) {
        s.x.row(i) = x.row(idx[i]);
        s.label[i] = label[idx[i]];
    }
    return s;
}

NetTrainResult fit(Network net, const Shuffled& data, const NetTrainConfig& cfg) {
    const int n_out = net.n_out();
    ad::Workspace train_ws = net.make_train_workspace();
    ad::Workspace infer_ws = net.make_workspace();
    AdamState adam;
    adam.resize(net.n_params());
    AdamParams ap;
    CounterRng rng(CounterRng::derive(cfg.seed, 0xF1));

    auto one_hot = [&](int label) {
        Vector t = Vector::Zero(n_out);
        if (n_out == 1)
            t(0) = label;  // sigmoid target is the raw 0/1 label
        else
            t(label) = 1.0;
        return t;
    };

    std::vector<int> order(data.n_train);
    std::iota(order.begin(), order.end(), 0);
    Vector grad(net.n_params());
    Vector x(net.input_dim());
    double epoch_loss = 0.0;
    NetTrainResult res{std::move(net), 0.0, 0.0, data.n_train, data.n_holdout};

    auto holdout_accuracy = [&]() {
        if (data.n_holdout == 0) return 0.0;
        int correct = 0;
        Vector prob(n_out);
        for (int i = data.n_train; i < data.n_train + data.n_holdout; ++i) {
            x = data.x.row(i);
            res.net.prob(x.data(), prob, infer_ws);
            int pred;
            if (n_out == 1)
                pred = prob(0) >= 0.5 ? 1 : 0;
            else
                prob.maxCoeff(&pred);
            if (pred == data.label[i]) ++correct;
        }
        return static_cast<double>(correct) / data.n_holdout;
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int i = data.n_train - 1; i > 0; --i)
            std::swap(order[i], order[uniform_index(rng, i + 1)]);
        epoch_loss = 0.0;
        for (int start = 0; start < data.n_train; start += cfg.batch) {
            const int stop = std::min(start + cfg.batch, data.n_train);
            grad.setZero();
            for (int i = start; i < stop; ++i) {
                x = data.x.row(order[i]);
                epoch_loss += res.net.loss_and_grad(x.data(), one_hot(data.label[order[i]]),
                                                    train_ws);
                grad += train_ws.param_grad();
            }
            grad /= stop - start;
            adam_update(res.net.params(), grad, adam, cfg.learning_rate, ap);
        }
        epoch_loss /= data.n_train;
        if (cfg.on_epoch) cfg.on_epoch(epoch, epoch_loss, holdout_accuracy());
    }

    res.final_loss = epoch_loss;
    res.holdout_accuracy = holdout_accuracy();
    return res;
}

}  // namespace

NetTrainResult train_discriminator(const Matrix& real, const Matrix& generated,
                                   const CnnArch& arch, const NetTrainConfig& cfg) {
    if (real.rows() < 1 || generated.rows() < 1)
        throw std::invalid_argument("train_discriminator: both sample sets must be non-empty");
    if (real.cols() != generated.cols())
        throw std::invalid_argument("train_discriminator: sample dimensions differ");
    const double ratio = static_cast<double>(std::max(real.rows(), generated.rows())) /
                         static_cast<double>(std::min(real.rows(), generated.rows()));
    if (ratio > 10.0)
        std::cerr << "train_discriminator: warning: class imbalance " << real.rows() << " real vs "
                  << generated.rows() << " generated (ratio " << ratio << ")\n";

    Matrix x(real.rows() + generated.rows(), real.cols());
    x.topRows(real.rows()) = real;
    x.bottomRows(generated.rows()) = generated;
    std::vector<int> label(static_cast<std::size_t>(x.rows()), 0);
    std::fill(label.begin() + real.rows(), label.end(), 1);

    Network net = Network::cnn(arch, OutputKind::SigmoidProb, cfg.seed);
    return fit(std::move(net), split(x, label, cfg.holdout_fraction, cfg.seed), cfg);
}

NetTrainResult train_classifier(const Dataset& labeled, int n_classes, const CnnArch& arch,
                                const NetTrainConfig& cfg) {
    if (!labeled.labeled()) throw std::invalid_argument("train_classifier: dataset has no labels");
    if (n_classes < 2) throw std::invalid_argument("train_classifier: need at least two classes");
    std::vector<int> seen(n_classes, 0);
    for (int l : labeled.labels) {
        if (l < 0 || l >= n_classes)
            throw std::invalid_argument("train_classifier: label " + std::to_string(l) +
                                        " outside [0, " + std::to_string(n_classes) + ")");
        ++seen[l];
    }
    for (int c = 0; c < n_classes; ++c)
        if (seen[c] == 0)
            throw std::invalid_argument("train_classifier: class " + std::to_string(c) +
                                        " has no training rows");

    CnnArch a = arch;
    a.n_out = n_classes;
    Network net = Network::cnn(a, OutputKind::SoftmaxProb, cfg.seed);
    return fit(std::move(net), split(labeled.x, labeled.labels, cfg.holdout_fraction, cfg.seed),
               cfg);
}

}  // namespace mme
