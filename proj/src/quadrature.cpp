#include "fdemm/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "fdemm/errors.hpp"

namespace fdemm::quad {
namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Maps the parameter of a panel back to y and returns the Jacobian.
struct Transform {
    enum class Kind { Finite, UpperTail, LowerTail } kind;
    double anchor;
    double scale;

    double operator()(const std::function<double(double)>& f, double s) const {
        switch (kind) {
            case Kind::Finite:
                return f(s);
            case Kind::UpperTail: {
                const double y = anchor - scale * std::log(s);
                return f(y) * scale / s;
            }
            case Kind::LowerTail: {
                const double y = anchor + scale * std::log(s);
                return f(y) * scale / s;
            }
        }
        return 0.0;
    }
};

struct Panel {
    double a;
    double b;
    double value;
    double error;
    int transform;

    bool operator<(const Panel& other) const { return error < other.error; }
};

double checked(double v, double s) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite integrand value at parameter " << s;
        throw DivergentIntegral(os.str());
    }
    return v;
}

Panel gauss_kronrod(const std::function<double(double)>& f, const Transform& tr, int tr_index,
                    double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = checked(tr(f, center), center);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double f1 = checked(tr(f, center - dx), center - dx);
        const double f2 = checked(tr(f, center + dx), center + dx);
        kronrod += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
    }
    kronrod *= half;
    gauss *= half;
    return Panel{a, b, kronrod, std::abs(kronrod - gauss), tr_index};
}

}  // namespace

Result integrate(const std::function<double(double)>& f, std::span<const Segment> segments,
                 const Options& opts) {
    std::vector<Segment> expanded;
    for (const auto& seg : segments) {
        if (!(seg.lo < seg.hi)) continue;
        if (std::isinf(seg.lo) && std::isinf(seg.hi)) {
            expanded.push_back(Segment{seg.lo, 0.0, seg.tail_scale});
            expanded.push_back(Segment{0.0, seg.hi, seg.tail_scale});
        } else {
            expanded.push_back(seg);
        }
    }

    std::vector<Transform> transforms;
    std::vector<Panel> panels;
    for (const auto& seg : expanded) {
        const int idx = static_cast<int>(transforms.size());
        if (std::isinf(seg.hi)) {
            transforms.push_back({Transform::Kind::UpperTail, seg.lo, seg.tail_scale});
            panels.push_back(gauss_kronrod(f, transforms.back(), idx, 0.0, 1.0));
        } else if (std::isinf(seg.lo)) {
            transforms.push_back({Transform::Kind::LowerTail, seg.hi, seg.tail_scale});
            panels.push_back(gauss_kronrod(f, transforms.back(), idx, 0.0, 1.0));
        } else {
            transforms.push_back({Transform::Kind::Finite, 0.0, 1.0});
            panels.push_back(gauss_kronrod(f, transforms.back(), idx, seg.lo, seg.hi));
        }
    }

    double value = 0.0;
    double error = 0.0;
    for (const auto& p : panels) {
        value += p.value;
        error += p.error;
    }
    std::priority_queue<Panel> queue(panels.begin(), panels.end());

    while (!queue.empty()) {
        const double target = std::max(opts.abs_floor, opts.target_rel * std::abs(value));
        if (error <= target || static_cast<int>(queue.size()) >= opts.max_panels) break;
        const Panel worst = queue.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;  // panel no longer divisible
        queue.pop();
        const auto& tr = transforms[static_cast<std::size_t>(worst.transform)];
        const Panel left = gauss_kronrod(f, tr, worst.transform, worst.a, mid);
        const Panel right = gauss_kronrod(f, tr, worst.transform, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }

    // Re-sum in a fixed order (transform, then left endpoint) so the result does
    // not depend on heap layout or on the running-sum history.
    panels.clear();
    while (!queue.empty()) {
        panels.push_back(queue.top());
        queue.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) {
        return x.transform != y.transform ? x.transform < y.transform : x.a < y.a;
    });
    double sum = 0.0;
    double err = 0.0;
    for (const auto& p : panels) {
        sum += p.value;
        err += p.error;
    }

    const double contract = std::max(opts.abs_floor, opts.rel_tol * std::abs(sum));
    if (err > contract) {
        std::ostringstream os;
        os << "quadrature tolerance not met: error estimate " << err << " vs required " << contract;
        throw ToleranceNotMet(os.str(), err);
    }
    return Result{sum, err, static_cast<int>(panels.size())};
}

Result integrate(const std::function<double(double)>& f, double lo, double hi, const Options& opts) {
    const std::array<Segment, 1> seg{Segment{lo, hi, 1.0}};
    return integrate(f, seg, opts);
}

std::vector<Segment> segments_from_breakpoints(std::vector<double> breakpoints, double tail_scale_lo,
                                               double tail_scale_hi) {
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    std::vector<Segment> out;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double lo = breakpoints[i];
        const double hi = breakpoints[i + 1];
        const double scale = std::isinf(lo) ? tail_scale_lo : tail_scale_hi;
        out.push_back(Segment{lo, hi, scale});
    }
    return out;
}

}  // namespace fdemm::quad
