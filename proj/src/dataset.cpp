#include "minmaxent/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "minmaxent/rng.hpp"

namespace mme {

Dataset synth_bimodal(int n, PeakShape shape, double loc1, double scale1, double loc2,
                      double scale2, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("synth_bimodal: need at least one sample");
    if (!(scale1 > 0.0) || !(scale2 > 0.0))
        throw std::invalid_argument("synth_bimodal: scales must be positive");
    Dataset ds;
    ds.x.resize(n, 1);
    CounterRng rng(CounterRng::derive(seed, 0xB1));
    for (int i = 0; i < n; ++i) {
        const bool first = uniform01(rng) < 0.5;
        const double loc = first ? loc1 : loc2;
        const double scale = first ? scale1 : scale2;
        if (shape == PeakShape::Gaussian) {
            ds.x(i, 0) = loc + scale * gaussian(rng);
        } else {
            // Cauchy by inverse CDF; nudge u off the endpoints to keep tan finite.
            double u = uniform01(rng);
            u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
            ds.x(i, 0) = loc + scale * std::tan(std::numbers::pi * (u - 0.5));
        }
    }
    return ds;
}

namespace {

[[noreturn]] void bad_row(const std::string& path, int line, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

Dataset load_digits(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_digits: cannot open " + path);

    constexpr int kPixels = 64;
    std::vector<double> pixels;
    std::vector<int> labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<long> values;
        while (std::getline(row, cell, ',')) {
            std::size_t pos = 0;
            long v = 0;
            try {
                v = std::stol(cell, &pos);
            } catch (const std::exception&) {
                bad_row(path, line_no, "non-integer cell '" + cell + "'");
            }
            while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
            if (pos != cell.size()) bad_row(path, line_no, "non-integer cell '" + cell + "'");
            values.push_back(v);
        }
        if (static_cast<int>(values.size()) != kPixels + 1)
            bad_row(path, line_no, "expected " + std::to_string(kPixels + 1) + " columns, found " +
                                       std::to_string(values.size()));
        for (int i = 0; i < kPixels; ++i) {
            if (values[i] < 0 || values[i] > 16)
                bad_row(path, line_no, "pixel value " + std::to_string(values[i]) +
                                           " outside [0, 16] at column " + std::to_string(i + 1));
            pixels.push_back(static_cast<double>(values[i]) / 16.0);
        }
        if (values[kPixels] < 0 || values[kPixels] > 9)
            bad_row(path, line_no,
                    "label " + std::to_string(values[kPixels]) + " outside [0, 9]");
        labels.push_back(static_cast<int>(values[kPixels]));
    }
    if (labels.empty()) throw std::runtime_error("load_digits: " + path + " holds no rows");

    Dataset ds;
    const int n = static_cast<int>(labels.size());
    ds.x.resize(n, kPixels);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kPixels; ++j) ds.x(i, j) = pixels[static_cast<std::size_t>(i) * kPixels + j];
    ds.labels = std::move(labels);
    return ds;
}

Dataset subset(const Dataset& ds, int count, std::uint64_t seed, bool drop_labels) {
    if (count < 1 || count > ds.n())
        throw std::invalid_argument("subset: count " + std::to_string(count) +
                                    " outside [1, " + std::to_string(ds.n()) + "]");
    std::vector<int> idx(ds.n());
    std::iota(idx.begin(), idx.end(), 0);
    CounterRng rng(CounterRng::derive(seed, 0x5B));
    Dataset out;
    out.x.resize(count, ds.dim());
    if (ds.labeled() && !drop_labels) out.labels.resize(count);
    for (int i = 0; i < count; ++i) {
        const int j = i + uniform_index(rng, static_cast<int>(idx.size()) - i);
        std::swap(idx[i], idx[j]);
        out.x.row(i) = ds.x.row(idx[i]);
        if (ds.labeled() && !drop_labels) out.labels[i] = ds.labels[idx[i]];
    }
    return out;
}

Dataset filter_label(const Dataset& ds, int label) {
    if (!ds.labeled()) throw std::invalid_argument("filter_label: dataset has no labels");
    std::vector<int> keep;
    for (int i = 0; i < ds.n(); ++i)
        if (ds.labels[i] == label) keep.push_back(i);
    if (keep.empty())
        throw std::invalid_argument("filter_label: no rows with label " + std::to_string(label));
    Dataset out;
    out.x.resize(static_cast<int>(keep.size()), ds.dim());
    out.labels.resize(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.x.row(static_cast<int>(i)) = ds.x.row(keep[i]);
        out.labels[i] = label;
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("concat: dimension mismatch");
    if (a.labeled() != b.labeled())
        throw std::invalid_argument("concat: cannot mix labeled and unlabeled data");
    Dataset out;
    out.x.resize(a.n() + b.n(), a.dim());
    out.x.topRows(a.n()) = a.x;
    out.x.bottomRows(b.n()) = b.x;
    if (a.labeled()) {
        out.labels = a.labels;
        out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    }
    return out;
}

}  // namespace mme
