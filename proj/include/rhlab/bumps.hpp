#pragma once

// Smooth cutoff family used by every kernel construction and re-blocking
// routine. The family is fixed once and for all so that every measured
// constant in the lab is reproducible:
//
//   g(u)  = exp(-1/u) for u > 0, else 0                (smooth step seed)
//   w(t)  = 1 on |t| <= 1, 0 on |t| >= 2,
//           g(2-|t|) / (g(2-|t|) + g(|t|-1)) between   (C-infinity plateau)
//   wt(t) = w(t) - w(2t)                               (band bump, supp [1/2, 2])
//
// Scaled evaluations divide x by a dyadic scale s; with integer x and dyadic
// s both divisions are exact in IEEE arithmetic, which makes the telescoping
// identity  w(x/s0) + sum_{s0 < s <= S} wt(x/s) = w(x/S)  hold bitwise.

#include <cmath>
#include <cstdint>

namespace rhlab {

inline double smooth_step_seed(double u) {
    return u > 0.0 ? std::exp(-1.0 / u) : 0.0;
}

// Plateau cutoff: 1 on [-1,1], 0 outside (-2,2), smooth ramp between.
inline double cutoff_w(double t) {
    double a = std::fabs(t);
    if (a <= 1.0) return 1.0;
    if (a >= 2.0) return 0.0;
    double up = smooth_step_seed(2.0 - a);
    double dn = smooth_step_seed(a - 1.0);
    return up / (up + dn);
}

// Band bump supported on 1/2 <= |t| <= 2.
inline double cutoff_wt(double t) {
    return cutoff_w(t) - cutoff_w(2.0 * t);
}

enum class BumpKind { w, wtilde, psi_normalized };

// Sum of the plateau cutoff over the integers; normalizer for psi_normalized.
inline double psi_mass(long long s) {
    // psi = w, supported on |x| < 2s; the plateau alone contributes 2s+1.
    double c = 0.0;
    for (long long y = -2 * s; y <= 2 * s; ++y)
        c += cutoff_w(static_cast<double>(y) / static_cast<double>(s));
    return c;
}

// Scaled evaluation at a point. psi_normalized integrates (sums) to 1 over Z.
inline double bump(BumpKind kind, long long s, double x) {
    double t = x / static_cast<double>(s);
    switch (kind) {
        case BumpKind::w: return cutoff_w(t);
        case BumpKind::wtilde: return cutoff_wt(t);
        case BumpKind::psi_normalized: return cutoff_w(t) / psi_mass(s);
    }
    return 0.0;
}

} // namespace rhlab
