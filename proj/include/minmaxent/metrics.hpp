#pragma once

#include <vector>

#include "minmaxent/types.hpp"

namespace mme {

/// Probability density tabulated on a uniform 1D grid.
struct GridDensity {
    Vector x;   // grid points, ascending, uniform spacing
    Vector p;   // density values, trapezoid-normalized to unit mass
    double dx = 0.0;

    static GridDensity uniform_grid(double lo, double hi, int n);
    void normalize();  // trapezoid rule
    double integral() const;
};

struct Histogram1D {
    double lo = 0.0, hi = 1.0;
    std::vector<long long> counts;
    long long total = 0;
    long long out_of_range = 0;

    Histogram1D(double lo, double hi, int n_bins);
    void add(double x);
    void add_all(const Vector& xs);

    /// Density estimate at bin centers (count / (total * width)).
    GridDensity density() const;
};

/// sum_i p_i ln(p_i / q_i) dx over matching grids; densities are floored at
/// a small epsilon so empty bins do not produce infinities.
double kl_divergence(const GridDensity& p, const GridDensity& q, double eps = 1e-12);

double gaussian_pdf(double x, double mean, double sigma);
double cauchy_pdf(double x, double median, double hwhm);

enum class PeakShape { Gaussian, Cauchy };

/// Equal-weight two-component mixture evaluated on a grid.
GridDensity mixture_density(const Vector& grid_x, PeakShape shape, double loc1, double scale1,
                            double loc2, double scale2);

/// Local maxima whose topographic prominence exceeds rel_prominence * max(p).
int count_modes(const GridDensity& d, double rel_prominence = 0.1);

struct ScoreSummary {
    double mean = 0.0, stdev = 0.0, min = 0.0, max = 0.0;
    int n = 0;
};
ScoreSummary score_summary(const Vector& scores);

}  // namespace mme
