#include "minmaxent/metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mme {

GridDensity GridDensity::uniform_grid(double lo, double hi, int n) {
    if (n < 2) throw std::invalid_argument("GridDensity: need at least 2 grid points");
    if (!(hi > lo)) throw std::invalid_argument("GridDensity: hi must exceed lo");
    GridDensity d;
    d.x = Vector::LinSpaced(n, lo, hi);
    d.p = Vector::Zero(n);
    d.dx = (hi - lo) / (n - 1);
    return d;
}

double GridDensity::integral() const {
    const auto n = p.size();
    if (n < 2) return 0.0;
    return dx * (p.sum() - 0.5 * (p(0) + p(n - 1)));
}

void GridDensity::normalize() {
    double z = integral();
    if (!(z > 0.0) || !std::isfinite(z))
        throw std::runtime_error("GridDensity::normalize: non-positive or non-finite mass");
    p /= z;
}

Histogram1D::Histogram1D(double lo_, double hi_, int n_bins) : lo(lo_), hi(hi_) {
    if (n_bins < 1) throw std::invalid_argument("Histogram1D: need at least one bin");
    if (!(hi > lo)) throw std::invalid_argument("Histogram1D: hi must exceed lo");
    counts.assign(n_bins, 0);
}

void Histogram1D::add(double x) {
    ++total;
    if (x < lo || x >= hi) {
        // Points exactly at hi land in the last bin; everything else outside is tallied apart.
        if (x == hi) {
            ++counts.back();
            return;
        }
        ++out_of_range;
        return;
    }
    auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * counts.size());
    if (b >= counts.size()) b = counts.size() - 1;
    ++counts[b];
}

void Histogram1D::add_all(const Vector& xs) {
    for (Index i = 0; i < xs.size(); ++i) add(xs(i));
}

GridDensity Histogram1D::density() const {
    const int n = static_cast<int>(counts.size());
    const double width = (hi - lo) / n;
    GridDensity d;
    d.x = Vector::LinSpaced(n, lo + 0.5 * width, hi - 0.5 * width);
    d.p = Vector::Zero(n);
    d.dx = width;
    if (total > 0)
        for (int i = 0; i < n; ++i) d.p(i) = static_cast<double>(counts[i]) / (total * width);
    return d;
}

double kl_divergence(const GridDensity& p, const GridDensity& q, double eps) {
    if (p.x.size() != q.x.size())
        throw std::invalid_argument("kl_divergence: grids have different sizes");
    if (p.x.size() < 2) throw std::invalid_argument("kl_divergence: grid too small");
    if ((p.x - q.x).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + p.x.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("kl_divergence: grids do not match");
    double kl = 0.0;
    for (Index i = 0; i < p.x.size(); ++i) {
        const double pi = std::max(p.p(i), eps);
        const double qi = std::max(q.p(i), eps);
        kl += pi * std::log(pi / qi);
    }
    return kl * p.dx;
}

double gaussian_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double cauchy_pdf(double x, double median, double hwhm) {
    const double z = (x - median) / hwhm;
    return 1.0 / (std::numbers::pi * hwhm * (1.0 + z * z));
}

GridDensity mixture_density(const Vector& grid_x, PeakShape shape, double loc1, double scale1,
                            double loc2, double scale2) {
    if (grid_x.size() < 2) throw std::invalid_argument("mixture_density: grid too small");
    GridDensity d;
    d.x = grid_x;
    d.p.resize(grid_x.size());
    d.dx = grid_x(1) - grid_x(0);
    for (Index i = 0; i < grid_x.size(); ++i) {
        const double x = grid_x(i);
        d.p(i) = shape == PeakShape::Gaussian
                     ? 0.5 * (gaussian_pdf(x, loc1, scale1) + gaussian_pdf(x, loc2, scale2))
                     : 0.5 * (cauchy_pdf(x, loc1, scale1) + cauchy_pdf(x, loc2, scale2));
    }
    return d;
}

int count_modes(const GridDensity& d, double rel_prominence) {
    const Index n = d.p.size();
    if (n < 3) return 0;
    const double pmax = d.p.maxCoeff();
    if (!(pmax > 0.0)) return 0;
    const double threshold = rel_prominence * pmax;

    int modes = 0;
    for (Index i = 1; i + 1 < n; ++i) {
        if (!(d.p(i) > d.p(i - 1) && d.p(i) >= d.p(i + 1))) continue;
        // Prominence: drop to the lowest col before terrain rises above this peak.
        double left_min = d.p(i);
        for (Index j = i - 1; j >= 0; --j) {
            if (d.p(j) > d.p(i)) break;
            left_min = std::min(left_min, d.p(j));
            if (j == 0) break;
        }
        double right_min = d.p(i);
        for (Index j = i + 1; j < n; ++j) {
            if (d.p(j) > d.p(i)) break;
            right_min = std::min(right_min, d.p(j));
        }
        const double prominence = d.p(i) - std::max(left_min, right_min);
        if (prominence >= threshold) ++modes;
    }
    // A maximum sitting on the boundary still counts if the interior dips enough.
    for (Index i : {Index(0), n - 1}) {
        const Index step = (i == 0) ? 1 : -1;
        if (!(d.p(i) > d.p(i + step))) continue;
        double run_min = d.p(i);
        bool rises = false;
        for (Index j = i + step; j >= 0 && j < n; j += step) {
            if (d.p(j) > d.p(i)) {
                rises = true;
                break;
            }
            run_min = std::min(run_min, d.p(j));
        }
        const double prominence = d.p(i) - (rises ? run_min : d.p.minCoeff());
        if (prominence >= threshold) ++modes;
    }
    return modes;
}

ScoreSummary score_summary(const Vector& scores) {
    ScoreSummary s;
    s.n = static_cast<int>(scores.size());
    if (s.n == 0) return s;
    s.mean = scores.mean();
    s.min = scores.minCoeff();
    s.max = scores.maxCoeff();
    if (s.n > 1) s.stdev = std::sqrt((scores.array() - s.mean).square().sum() / (s.n - 1));
    return s;
}

}  // namespace mme
