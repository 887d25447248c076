#include "fdemm/roots.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "fdemm/errors.hpp"

namespace fdemm::roots {

Result brent(const std::function<double(double)>& f, double a, double b, double fa, double fb,
             const Options& opts) {
    if (fa == 0.0) return {a, fa, 0};
    if (fb == 0.0) return {b, fb, 0};
    if ((fa > 0.0) == (fb > 0.0)) throw NoRoot("brent: bracket does not change sign");

    double c = a;
    double fc = fa;
    double d = b - a;
    double e = d;
    const double eps = std::numeric_limits<double>::epsilon();

    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol = 2.0 * eps * std::abs(b) + std::numeric_limits<double>::min();
        const double m = 0.5 * (c - b);
        if (std::abs(fb) <= opts.f_tol_requested || std::abs(m) <= tol || fb == 0.0) break;

        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            const double s = fb / fa;
            double p;
            double q;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) {
                q = -q;
            } else {
                p = -p;
            }
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
    }

    if (!(std::abs(fb) <= opts.f_tol_accepted)) {
        std::ostringstream os;
        os << "root residual " << std::abs(fb) << " above accepted " << opts.f_tol_accepted;
        throw ToleranceNotMet(os.str(), std::abs(fb));
    }
    return {b, fb, it};
}

}  // namespace fdemm::roots
