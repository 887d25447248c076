#pragma once

#include <functional>
#include <span>
#include <vector>

namespace fdemm::quad {

struct Options {
    double rel_tol = 1e-10;     // contract: failure above this
    double abs_floor = 1e-14;
    double target_rel = 1e-13;  // refinement keeps going until this, if panels allow
    int max_panels = 6000;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
    int panels = 0;
};

/// One integration segment. Infinite endpoints are mapped by an exponential
/// substitution y = a - scale*ln(u) (or y = b + scale*ln(u)), u in (0, 1].
struct Segment {
    double lo;
    double hi;
    double tail_scale = 1.0;
};

/// Globally adaptive Gauss-Kronrod (7/15) over a union of segments.
/// Throws ToleranceNotMet if the error estimate stays above the contract,
/// DivergentIntegral if the integrand returns a non-finite value.
Result integrate(const std::function<double(double)>& f, std::span<const Segment> segments,
                 const Options& opts = {});

Result integrate(const std::function<double(double)>& f, double lo, double hi,
                 const Options& opts = {});

/// Segments between consecutive sorted, deduplicated breakpoints; the first and
/// last entries may be -inf / +inf.
std::vector<Segment> segments_from_breakpoints(std::vector<double> breakpoints,
                                               double tail_scale_lo = 1.0,
                                               double tail_scale_hi = 1.0);

}  // namespace fdemm::quad
