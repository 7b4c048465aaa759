#pragma once

// Validated parameter sets and dyadic scale grids.
//
// A parameter set fixes the rough-exponent alpha > 1, the band-narrowing
// delta > 0 (with theta = alpha - 1 - delta derived), the truncation level M,
// and the operating mode:
//   full: one transform block per dyadic scale s with M^theta <= s <= M;
//   gap:  blocks only for s in [M^theta, M^(alpha-1)] ("minus band") and
//         [M^(1-delta), M] ("plus band").
// The standing smallness condition (alpha-1)/alpha + delta < alpha-1-delta
// is enforced at validation time, as is non-emptiness of both gap bands and
// support-disjointness of the two band kernels.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rhlab {

enum class Mode { full, gap };

inline const char* mode_name(Mode m) { return m == Mode::full ? "full" : "gap"; }

struct Params {
    double alpha = 1.5;
    double delta = 0.05;
    double theta = 0.45;        // derived: alpha - 1 - delta
    long long M = 1 << 14;
    Mode mode = Mode::gap;
    double omega = 0.5;         // Hoelder exponent for the regularity axiom
    double gamma_resc = 0.25;   // scale-doubling bookkeeping exponent (omega/2)
};

struct ScaleGrid {
    std::vector<long long> scales;  // ascending powers of two, each >= 2

    bool empty() const { return scales.empty(); }
    long long lowest() const { return scales.front(); }
    long long highest() const { return scales.back(); }
};

inline bool is_dyadic(long long s) { return s >= 2 && (s & (s - 1)) == 0; }

// All s = 2^j with lo <= s <= hi, ascending. Endpoints are honored exactly;
// an empty result is a valid grid.
inline ScaleGrid dyadic_range(double lo, double hi) {
    ScaleGrid g;
    if (!(lo > 0.0) || !(lo <= hi)) return g;
    for (long long s = 2; ; s <<= 1) {
        if (static_cast<double>(s) > hi) break;
        if (static_cast<double>(s) >= lo) g.scales.push_back(s);
        if (s > (1LL << 61)) break;
    }
    return g;
}

// Band endpoints are powers of reals; compute in extended precision and widen
// by one part in 1e9 so a last-ulp error in pow cannot drop an endpoint that
// is an exact power of two (e.g. M = 2^14, exponent 1/2 -> 128).
inline double band_pow(long long base, double expo) {
    long double v = powl(static_cast<long double>(base), static_cast<long double>(expo));
    return static_cast<double>(v);
}

inline ScaleGrid band_range(long long M, double lo_exp, double hi_exp) {
    double lo = band_pow(M, lo_exp) * (1.0 - 1e-9);
    double hi = band_pow(M, hi_exp) * (1.0 + 1e-9);
    return dyadic_range(lo, hi);
}

// Scale bands of a parameter set.
inline ScaleGrid minus_band(const Params& p) { return band_range(p.M, p.theta, p.alpha - 1.0); }
inline ScaleGrid plus_band(const Params& p)  { return band_range(p.M, 1.0 - p.delta, 1.0); }
inline ScaleGrid full_band(const Params& p)  { return band_range(p.M, p.theta, 1.0); }

// The mode's complete scale set, ascending.
inline ScaleGrid scale_set(const Params& p) {
    if (p.mode == Mode::full) return full_band(p);
    ScaleGrid g = minus_band(p);
    ScaleGrid hi = plus_band(p);
    for (long long s : hi.scales) g.scales.push_back(s);
    return g;
}

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raw record as read from config/CLI before validation.
struct RawParams {
    double alpha = 1.5;
    double delta = 0.05;
    long long M = 1 << 14;
    Mode mode = Mode::gap;
    double omega = 0.5;
    double gamma_resc = -1.0;   // < 0 means "derive as omega/2"
};

inline Params validate(const RawParams& r) {
    if (!(r.alpha > 1.0))
        throw ValidationError("alpha must exceed 1 (got " + std::to_string(r.alpha) + ")");
    if (!(r.delta > 0.0))
        throw ValidationError("delta must be positive (got " + std::to_string(r.delta) + ")");
    double theta = r.alpha - 1.0 - r.delta;
    double lhs = (r.alpha - 1.0) / r.alpha + r.delta;
    if (!(lhs < theta))
        throw ValidationError(
            "smallness condition violated: (alpha-1)/alpha + delta = " + std::to_string(lhs) +
            " must be < alpha-1-delta = " + std::to_string(theta));
    if (!(theta > 0.0 && theta < 1.0))
        throw ValidationError("derived band exponent alpha-1-delta = " + std::to_string(theta) +
                              " must lie in (0,1)");
    if (r.M < 2) throw ValidationError("M must be at least 2");
    if (!(r.omega > 0.0 && r.omega <= 1.0))
        throw ValidationError("omega must lie in (0,1]");

    Params p;
    p.alpha = r.alpha;
    p.delta = r.delta;
    p.theta = theta;
    p.M = r.M;
    p.mode = r.mode;
    p.omega = r.omega;
    p.gamma_resc = r.gamma_resc < 0.0 ? r.omega / 2.0 : r.gamma_resc;

    if (p.mode == Mode::gap) {
        ScaleGrid lo = minus_band(p), hi = plus_band(p);
        if (lo.empty())
            throw ValidationError("gap mode: no dyadic scale in the band [M^(alpha-1-delta), M^(alpha-1)] = [" +
                                  std::to_string(band_pow(p.M, p.theta)) + ", " +
                                  std::to_string(band_pow(p.M, p.alpha - 1.0)) + "]");
        if (hi.empty())
            throw ValidationError("gap mode: no dyadic scale in the band [M^(1-delta), M] = [" +
                                  std::to_string(band_pow(p.M, 1.0 - p.delta)) + ", " +
                                  std::to_string((double)p.M) + "]");
        // Support disjointness of the two band kernels: the minus band reaches
        // out to 2*M^(alpha-1) while the plus band starts at M^(1-delta)/2.
        if (!(2.0 * band_pow(p.M, p.alpha - 1.0) < band_pow(p.M, 1.0 - p.delta) / 2.0))
            throw ValidationError("gap mode: bands overlap in space (2*M^(alpha-1) >= M^(1-delta)/2); "
                                  "increase M or shrink delta");
    } else {
        if (full_band(p).empty())
            throw ValidationError("full mode: no dyadic scale in [M^(alpha-1-delta), M]");
    }
    return p;
}

// Revalidate an already-validated record after a field change (e.g. a sweep
// stepping M): round-trips through the raw form.
inline Params revalidate(const Params& p) {
    RawParams r;
    r.alpha = p.alpha;
    r.delta = p.delta;
    r.M = p.M;
    r.mode = p.mode;
    r.omega = p.omega;
    r.gamma_resc = p.gamma_resc;
    return validate(r);
}

// Memory guard for kernel windows (dense storage of ~2*C*M^alpha points).
inline void check_window_points(long long pts) {
    if (pts < 0 || pts > (1LL << 31))
        throw ValidationError("kernel window of " + std::to_string(pts) +
                              " points exceeds the 2^31 dense-storage budget");
}

} // namespace rhlab
