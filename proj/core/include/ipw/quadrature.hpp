#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <sstream>
#include <vector>

#include "ipw/errors.hpp"

namespace ipw::quad {

struct Options {
    double abs_tol = 1e-10;
    int max_subdivisions = 4000;
};

template <std::size_t N>
struct Result {
    std::array<double, N> value{};
    double error = 0.0;  // max over components
    int evaluations = 0;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15 nodes).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights at kKronrodNodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
struct Segment {
    double a;
    double b;
    std::array<double, N> value;
    double error;
    friend bool operator<(const Segment& x, const Segment& y) { return x.error < y.error; }
};

template <std::size_t N, class F>
Segment<N> gauss_kronrod15(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    std::array<double, N> kronrod{};
    std::array<double, N> gauss{};

    auto accumulate = [&](const std::array<double, N>& y, double wk, double wg) {
        for (std::size_t c = 0; c < N; ++c) {
            kronrod[c] += wk * y[c];
            gauss[c] += wg * y[c];
        }
    };
    accumulate(f(center), kKronrodWeights[7], kGaussWeights[3]);
    for (std::size_t i = 0; i < 7; ++i) {
        const double dx = half * kKronrodNodes[i];
        const double wg = (i % 2 == 1) ? kGaussWeights[i / 2] : 0.0;
        accumulate(f(center - dx), kKronrodWeights[i], wg);
        accumulate(f(center + dx), kKronrodWeights[i], wg);
    }
    Segment<N> seg{a, b, {}, 0.0};
    for (std::size_t c = 0; c < N; ++c) {
        seg.value[c] = kronrod[c] * half;
        seg.error = std::max(seg.error, std::abs((kronrod[c] - gauss[c]) * half));
    }
    return seg;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) integration of a vector-valued
/// integrand `f(x) -> std::array<double, N>` over [a, b]. Bisects the segment
/// with the largest error estimate until the summed estimate is below
/// `opts.abs_tol`. Throws NumericalError when the subdivision budget runs out.
template <std::size_t N, class F>
Result<N> integrate(F&& f, double a, double b, const Options& opts) {
    Result<N> result;
    if (b <= a) return result;

    std::priority_queue<detail::Segment<N>> work;
    work.push(detail::gauss_kronrod15<N>(f, a, b));
    result.evaluations = 15;
    double total_error = work.top().error;

    int subdivisions = 0;
    while (total_error > opts.abs_tol) {
        if (subdivisions >= opts.max_subdivisions) {
            std::ostringstream os;
            os << "adaptive quadrature did not converge on [" << a << ", " << b << "]: error estimate "
               << total_error << " > tolerance " << opts.abs_tol << " after " << subdivisions << " subdivisions";
            throw NumericalError(os.str());
        }
        const auto worst = work.top();
        work.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            throw NumericalError("adaptive quadrature exhausted floating-point resolution");
        }
        auto left = detail::gauss_kronrod15<N>(f, worst.a, mid);
        auto right = detail::gauss_kronrod15<N>(f, mid, worst.b);
        total_error += left.error + right.error - worst.error;
        work.push(std::move(left));
        work.push(std::move(right));
        result.evaluations += 30;
        ++subdivisions;
    }

    // Re-sum from scratch to avoid drift in the running totals.
    result.error = 0.0;
    while (!work.empty()) {
        const auto& seg = work.top();
        for (std::size_t c = 0; c < N; ++c) result.value[c] += seg.value[c];
        result.error += seg.error;
        work.pop();
    }
    return result;
}

/// Scalar convenience wrapper around integrate<1>.
template <class F>
Result<1> integrate_scalar(F&& f, double a, double b, const Options& opts) {
    auto wrapped = [&f](double x) { return std::array<double, 1>{f(x)}; };
    return integrate<1>(wrapped, a, b, opts);
}

/// Nested adaptive integration over {outer_lo <= x <= outer_hi, lo(x) <= y <= hi(x)}.
/// The inner tolerance is a fixed fraction of the outer one per unit length.
template <std::size_t N, class F, class Lo, class Hi>
Result<N> integrate_nested(F&& f, double outer_lo, double outer_hi, Lo&& lo, Hi&& hi, const Options& opts) {
    const double span = std::max(outer_hi - outer_lo, 1e-300);
    Options inner_opts = opts;
    inner_opts.abs_tol = 0.1 * opts.abs_tol / span;
    Options outer_opts = opts;
    outer_opts.abs_tol = 0.5 * opts.abs_tol;

    int inner_evaluations = 0;
    double inner_error = 0.0;
    auto outer = [&](double x) {
        const double y0 = lo(x);
        const double y1 = hi(x);
        if (!(y1 > y0)) return std::array<double, N>{};
        auto row = [&](double y) { return f(x, y); };
        const auto r = integrate<N>(row, y0, y1, inner_opts);
        inner_evaluations += r.evaluations;
        inner_error = std::max(inner_error, r.error);
        return r.value;
    };
    Result<N> result = integrate<N>(outer, outer_lo, outer_hi, outer_opts);
    result.error += inner_error * span;
    result.evaluations += inner_evaluations;
    return result;
}

}  // namespace ipw::quad
