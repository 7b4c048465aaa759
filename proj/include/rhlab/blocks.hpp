#pragma once

// Transform blocks and assembled operators.
//
// A transform block of dyadic scale s is the odd kernel
//     B_s(x) = sum_{m >= 1} phi_s(m^alpha / s) * (delta_{[m^alpha]} - delta_{-[m^alpha]})(x) / m,
// where [.] is the integer part and phi_s is the scaled band bump wt (the
// plateau bump w for the lowest scale of a full-mode family, which must cover
// small |x|). Coefficients of colliding integer parts accumulate additively.
//
// The assembled operator sums blocks over the mode's scale set; in gap mode
// the two bands give kernels with disjoint supports (validated).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rhlab/bumps.hpp"
#include "rhlab/kernel.hpp"
#include "rhlab/params.hpp"

namespace rhlab {

namespace detail {

// m^alpha in extended precision. For the default alpha = 1.5 use m*sqrt(m):
// exact whenever m is a perfect square (there m^1.5 is an exact integer and a
// naive pow-then-floor can come out one low).
inline long double pow_alpha(long long m, double alpha) {
    if (alpha == 1.5) {
        long double lm = static_cast<long double>(m);
        return lm * sqrtl(lm);
    }
    return powl(static_cast<long double>(m), static_cast<long double>(alpha));
}

} // namespace detail

// One transform block of scale s. first_scale selects the plateau cutoff w.
inline Kernel block_kernel(long long s, const Params& p, bool first_scale = false) {
    if (!is_dyadic(s)) throw ValidationError("block scale must be dyadic, got " + std::to_string(s));
    const double sd = static_cast<double>(s);
    // enumerate m with phi(m^alpha/s) != 0: m^alpha < 2s (both cutoffs vanish
    // at and beyond argument 2); the band bump also vanishes for m^alpha <= s/2.
    long long m_hi = static_cast<long long>(floorl(powl(2.0L * s, 1.0L / p.alpha))) + 2;
    long long m_lo = 1;
    if (!first_scale) {
        m_lo = std::max<long long>(1, static_cast<long long>(floorl(powl(0.5L * s, 1.0L / p.alpha))) - 1);
    }
    long long R = static_cast<long long>(floorl(detail::pow_alpha(m_hi, p.alpha)));
    R = std::max<long long>(R, 2);
    check_window_points(2 * R + 1);
    Kernel k;
    k.base = -R;
    k.values.assign(static_cast<size_t>(2 * R + 1), 0.0);
    for (long long m = m_lo; m <= m_hi; ++m) {
        long double ma = detail::pow_alpha(m, p.alpha);
        double t = static_cast<double>(ma / sd);
        double w = first_scale ? cutoff_w(t) : cutoff_wt(t);
        if (w == 0.0) continue;
        long long x = static_cast<long long>(floorl(ma));
        double c = w / static_cast<double>(m);
        k.ref(x) += c;
        k.ref(-x) -= c;   // same magnitude: oddness is exact by construction
    }
    k.trim();
    return k;
}

struct Assembly {
    Kernel H;        // the full assembled kernel
    Kernel Hminus;   // gap mode: minus-band part (empty in full mode)
    Kernel Hplus;    // gap mode: plus-band part (empty in full mode)
};

inline Assembly assemble(const Params& p) {
    Assembly a;
    if (p.mode == Mode::gap) {
        for (long long s : minus_band(p).scales)
            a.Hminus = add(a.Hminus, block_kernel(s, p, false));
        for (long long s : plus_band(p).scales)
            a.Hplus = add(a.Hplus, block_kernel(s, p, false));
        a.H = add(a.Hminus, a.Hplus);
    } else {
        ScaleGrid g = full_band(p);
        for (size_t i = 0; i < g.scales.size(); ++i)
            a.H = add(a.H, block_kernel(g.scales[i], p, i == 0));
    }
    a.H.trim();
    a.Hminus.trim();
    a.Hplus.trim();
    return a;
}

// ---------------------------------------------------------------------------
// Symbols (Fourier transforms on the circle) and the l2 -> l2 operator norm.

struct SymbolGrid {
    size_t N = 0;
    std::vector<cplx> values;   // values[k] = sum_x K(x) exp(-2 pi i x k / N)
};

template <class T>
SymbolGrid symbol(const BasicKernel<T>& K, size_t N) {
    if (!is_pow2(N)) throw std::invalid_argument("symbol: N must be a power of two");
    if (N < 4 * K.len())
        throw std::invalid_argument("symbol: N must be at least 4x the support length for "
                                    "reliable norm estimation (got N=" + std::to_string(N) +
                                    ", len=" + std::to_string(K.len()) + ")");
    SymbolGrid g;
    g.N = N;
    g.values.assign(N, cplx(0, 0));
    detail::load_padded(g.values, K);
    fft(g.values);
    // shift by the window base: K^(k/N) = e^{-2 pi i base k / N} * FFT(values)[k]
    const double pi = 3.14159265358979323846264338327950288;
    const long long rb = ((K.base % static_cast<long long>(N)) + static_cast<long long>(N)) %
                         static_cast<long long>(N);
    for (size_t k = 0; k < N; ++k) {
        long long prod = (rb * static_cast<long long>(k)) % static_cast<long long>(N);
        double ang = -2.0 * pi * static_cast<double>(prod) / static_cast<double>(N);
        g.values[k] *= std::polar(1.0, ang);
    }
    return g;
}

// Direct symbol evaluation at an arbitrary frequency xi (cycles per sample).
template <class T>
cplx symbol_at(const BasicKernel<T>& K, double xi) {
    const double pi = 3.14159265358979323846264338327950288;
    cplx s(0, 0);
    for (long long x = K.lo(); x <= K.hi(); ++x) {
        double ang = -2.0 * pi * static_cast<double>(x) * xi;
        s += cplx(K.at(x)) * std::polar(1.0, ang);
    }
    return s;
}

// Exact l2(Z) -> l2(Z) norm of convolution by K: sup over frequencies of the
// symbol modulus. Coarse grid at 8x oversampling, then golden-section
// refinement of |K^| around the grid argmax (the modulus is smooth there).
template <class T>
double op_norm(const BasicKernel<T>& K) {
    if (K.empty()) return 0.0;
    if (K.len() == 1) return std::abs(K.values[0]);
    const size_t N = next_pow2(8 * K.len());
    SymbolGrid g = symbol(K, N);
    size_t kbest = 0;
    double best = 0.0;
    for (size_t k = 0; k < N; ++k) {
        double a = std::abs(g.values[k]);
        if (a > best) { best = a; kbest = k; }
    }
    double lo = (static_cast<double>(kbest) - 1.0) / static_cast<double>(N);
    double hi = (static_cast<double>(kbest) + 1.0) / static_cast<double>(N);
    const double gr = 0.6180339887498948482;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = std::abs(symbol_at(K, x1)), f2 = std::abs(symbol_at(K, x2));
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = std::abs(symbol_at(K, x2));
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = std::abs(symbol_at(K, x1));
        }
    }
    return std::max(best, std::max(f1, f2));
}

// ---------------------------------------------------------------------------
// Smooth truncations K -> K*cutoff.

// First scale of the full-mode cutoff family: smallest dyadic >= M^theta.
inline long long family_first_scale(const Params& p) {
    ScaleGrid g = band_range(p.M, p.theta, 1.0);
    if (g.empty()) throw ValidationError("cutoff family has no scales");
    return g.lowest();
}

// cumulative=false: K * phi_s (plateau w at the family's first scale, band
// bump wt after). cumulative=true: the telescoped sum of truncations up to s,
// which collapses to K * w(./s) exactly.
template <class T>
BasicKernel<T> truncate(const BasicKernel<T>& K, long long s, const Params& p, bool cumulative) {
    if (!is_dyadic(s)) throw ValidationError("truncation scale must be dyadic");
    const bool plateau = cumulative || s == family_first_scale(p);
    BasicKernel<T> r = K;
    for (long long x = r.lo(); x <= r.hi(); ++x) {
        double t = static_cast<double>(x) / static_cast<double>(s);
        r.ref(x) *= plateau ? cutoff_w(t) : cutoff_wt(t);
    }
    r.trim();
    return r;
}

} // namespace rhlab
