#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minmaxent/metrics.hpp"
#include "minmaxent/types.hpp"

namespace mme {

struct Dataset {
    Matrix x;                 // n x dim
    std::vector<int> labels;  // one per row, or empty for unlabeled data

    int n() const { return static_cast<int>(x.rows()); }
    int dim() const { return static_cast<int>(x.cols()); }
    bool labeled() const { return !labels.empty(); }
};

/// Equal-weight two-component mixture in one dimension, drawn by inverse CDF.
Dataset synth_bimodal(int n, PeakShape shape, double loc1, double scale1, double loc2,
                      double scale2, std::uint64_t seed);

/// 8x8 digit images as CSV rows of 64 integer pixels in [0,16] plus a label
/// in [0,9]. Pixels are scaled to [0,1]. Malformed rows are reported with
/// their line number.
Dataset load_digits(const std::string& path);

/// Deterministic random subset without replacement.
Dataset subset(const Dataset& ds, int count, std::uint64_t seed, bool drop_labels = false);

/// Rows with the given label only.
Dataset filter_label(const Dataset& ds, int label);

Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace mme
