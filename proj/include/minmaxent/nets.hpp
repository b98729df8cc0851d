#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "minmaxent/dataset.hpp"
#include "minmaxent/network.hpp"
#include "minmaxent/types.hpp"

namespace mme {

// Supervised training for the bias-field networks: a real-vs-generated
// discriminator and a class-probability network, both minibatch Adam on
// cross-entropy with a held-out accuracy estimate.

struct NetTrainConfig {
    int epochs = 30;
    int batch = 64;
    double learning_rate = 1e-3;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 11;
    std::function<void(int, double, double)> on_epoch;  // epoch, train loss, holdout accuracy
};

struct NetTrainResult {
    Network net;
    double holdout_accuracy = 0.0;
    double final_loss = 0.0;
    int n_train = 0, n_holdout = 0;
};

/// Targets: real rows 0, generated rows 1 (so the score rises on generated
/// input and an energy bias + alpha * score(x) suppresses it). Warns on
/// stderr when the class ratio exceeds 10:1.
NetTrainResult train_discriminator(const Matrix& real, const Matrix& generated,
                                   const CnnArch& arch, const NetTrainConfig& cfg);

/// Softmax class-probability network; every class in [0, n_classes) must
/// appear in the training rows.
NetTrainResult train_classifier(const Dataset& labeled, int n_classes, const CnnArch& arch,
                                const NetTrainConfig& cfg);

}  // namespace mme
