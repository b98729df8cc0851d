#include "minmaxent/sampler.hpp"

namespace mme {

ProposalPolicy ProposalPolicy::full_vector(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("ProposalPolicy: hi must exceed lo");
    ProposalPolicy p;
    p.kind = Kind::FullVector;
    p.lo = lo;
    p.hi = hi;
    return p;
}

ProposalPolicy ProposalPolicy::single_pixel(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("ProposalPolicy: hi must exceed lo");
    ProposalPolicy p;
    p.kind = Kind::SinglePixel;
    p.lo = lo;
    p.hi = hi;
    return p;
}

bool adapt_step_size(ChainState& c, double target_acceptance, int min_window) {
    if (c.window_proposals < min_window) return false;
    const double rate = static_cast<double>(c.window_accepts) / c.window_proposals;
    // Smooth multiplicative nudge; a full-rate mismatch scales the step by ~ e^0.6.
    c.step_size *= std::exp(rate - target_acceptance);
    c.step_size = std::clamp(c.step_size, 1e-6, 1e3);
    c.window_proposals = 0;
    c.window_accepts = 0;
    return true;
}

}  // namespace mme
