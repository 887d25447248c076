#pragma once

#include <functional>

namespace fdemm::roots {

struct Options {
    double f_tol_requested = 1e-12;
    double f_tol_accepted = 1e-10;
    int max_iterations = 300;
};

struct Result {
    double x;
    double fx;
    int iterations;
};

/// Brent's method on a sign-changing bracket [a, b] (fa, fb already known).
/// Stops when |f| <= f_tol_requested or the bracket collapses to adjacent
/// doubles; throws ToleranceNotMet if |f| is then still above f_tol_accepted.
Result brent(const std::function<double(double)>& f, double a, double b, double fa, double fb,
             const Options& opts = {});

}  // namespace fdemm::roots
