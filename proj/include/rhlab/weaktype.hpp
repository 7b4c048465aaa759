#pragma once

// Weak-l1 quasinorms, the dyadic Calderon-Zygmund stopping-time decomposition
// with invariant verifiers, the maximal truncation of partial-sum operators,
// and weak-type sweeps across M.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhlab/blocks.hpp"
#include "rhlab/kernel.hpp"
#include "rhlab/params.hpp"
#include "rhlab/resolvent.hpp"

namespace rhlab {

// sup over lambda of lambda * #{x : |K(x)| > lambda}. Sorting |K| descending,
// the sup is attained just below some kernel value, so it equals
// max_r (r-th largest |value|) * r over 1-based ranks.
inline double weak_l1(const Kernel& K) {
    std::vector<double> a;
    a.reserve(K.len());
    for (double v : K.values)
        if (v != 0.0) a.push_back(std::fabs(v));
    std::sort(a.begin(), a.end(), std::greater<double>());
    double best = 0.0;
    for (size_t r = 0; r < a.size(); ++r)
        best = std::max(best, a[r] * static_cast<double>(r + 1));
    return best;
}

// ---------------------------------------------------------------------------
// Dyadic cubes [start, start + len) with len a power of two and start a
// multiple of len (grid anchored at 0; no cube straddles 0).

struct DyadicCube {
    long long start = 0;
    long long len = 1;
    long long end() const { return start + len; }
    bool contains(long long x) const { return x >= start && x < end(); }
};

namespace detail {

inline long long floor_div(long long a, long long b) {
    long long q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

inline DyadicCube parent_cube(const DyadicCube& q) {
    long long plen = 2 * q.len;
    return DyadicCube{floor_div(q.start, plen) * plen, plen};
}

inline double cube_l1(const Kernel& f, const DyadicCube& q) {
    double s = 0.0;
    long long lo = std::max(q.start, f.lo()), hi = std::min(q.end() - 1, f.hi());
    for (long long x = lo; x <= hi; ++x) s += std::fabs(f.at(x));
    return s;
}

inline double cube_avg(const Kernel& f, const DyadicCube& q) {
    return cube_l1(f, q) / static_cast<double>(q.len);
}

// Stopping-time recursion: q has average <= lam; select maximal children
// with average > lam, descend into the rest.
inline void collect_cubes(const Kernel& f, double lam, const DyadicCube& q,
                          std::vector<DyadicCube>& out) {
    if (q.len == 1) return;
    long long half = q.len / 2;
    for (int side = 0; side < 2; ++side) {
        DyadicCube c{q.start + side * half, half};
        if (c.end() <= f.lo() || c.start > f.hi()) continue;
        if (cube_avg(f, c) > lam) out.push_back(c);
        else collect_cubes(f, lam, c, out);
    }
}

} // namespace detail

// Maximal dyadic intervals with average |f| above lam. The construction runs
// per half-line (the anchored grid has no interval straddling 0): smallest
// anchored cube covering that half of the support, doubled until its average
// drops to lam or below, then the standard stopping-time descent.
inline std::vector<DyadicCube> cz_cubes(const Kernel& f, double lam) {
    if (!(lam > 0.0)) throw ValidationError("cz_cubes: level must be positive");
    if (norm_l1(f) <= 0.0) throw ValidationError("cz_cubes: input must carry l1 mass");
    std::vector<DyadicCube> out;
    auto run_side = [&](long long lo, long long hi) {
        // trim to actual support on this side
        while (lo <= hi && f.at(lo) == 0.0) ++lo;
        while (hi >= lo && f.at(hi) == 0.0) --hi;
        if (lo > hi) return;
        long long len = 1;
        while (detail::floor_div(lo, len) != detail::floor_div(hi, len)) len <<= 1;
        DyadicCube top{detail::floor_div(lo, len) * len, len};
        // Doubling at the top: the cube's l1 mass is fixed once it covers the
        // side, so the average halves with each doubling and must reach lam.
        while (detail::cube_avg(f, top) > lam) top = detail::parent_cube(top);
        if (top.len == 1) {
            // single point with |f| <= lam: nothing selected on this side
            return;
        }
        detail::collect_cubes(f, lam, top, out);
    };
    if (f.hi() >= 0) run_side(std::max<long long>(f.lo(), 0), f.hi());
    if (f.lo() < 0) run_side(f.lo(), std::min<long long>(f.hi(), -1));
    std::sort(out.begin(), out.end(),
              [](const DyadicCube& a, const DyadicCube& b) { return a.start < b.start; });
    return out;
}

// ---------------------------------------------------------------------------
// Level-lam decomposition at scale s:
//   f = g + sum_k b_k^(s) + sum_k B_k^(s) + sum_k E_k^(s),
// where g lives off the cubes with |g| <= lam, b collects the part of f above
// the height threshold lam*s^(1/alpha) on the cubes, E the cube averages of
// the part at-or-below it, and B the mean-free remainder per cube.

struct CZDecomposition {
    double lambda_level = 0.0;
    long long s = 2;
    double height_threshold = 0.0;          // lam * s^(1/alpha)
    std::vector<DyadicCube> cubes;
    Kernel g;
    std::map<int, Kernel> b_parts, B_parts, E_parts;   // keyed by log2(cube len)
    double mean_free_C = 0.0;               // max_j ||B on Q_j||_1 / (lam |Q_j|)
    double parent_mass = 0.0;               // sum_j |parent(Q_j)|
};

inline CZDecomposition cz_decompose(const Kernel& f, double lam, long long s, const Params& p) {
    if (!(lam > 0.0)) throw ValidationError("cz_decompose: level must be positive");
    if (!is_dyadic(s)) throw ValidationError("cz_decompose: scale must be dyadic");
    CZDecomposition d;
    d.lambda_level = lam;
    d.s = s;
    d.height_threshold = lam * std::pow(static_cast<double>(s), 1.0 / p.alpha);
    d.cubes = cz_cubes(f, lam);

    // The part windows must cover the cubes (the E averages live on whole
    // cubes, which can extend past the support of f).
    long long lo_all = f.lo(), hi_all = f.hi();
    for (const auto& q : d.cubes) {
        lo_all = std::min(lo_all, q.start);
        hi_all = std::max(hi_all, q.end() - 1);
    }
    auto zero_like = [&]() {
        Kernel k;
        k.base = lo_all;
        k.values.assign(static_cast<size_t>(hi_all - lo_all + 1), 0.0);
        return k;
    };
    d.g = f;
    for (const auto& q : d.cubes) {
        int k = 0;
        while ((1ll << k) < q.len) ++k;
        auto ins = [&](std::map<int, Kernel>& m) -> Kernel& {
            auto it = m.find(k);
            if (it == m.end()) it = m.emplace(k, zero_like()).first;
            return it->second;
        };
        Kernel& bk = ins(d.b_parts);
        Kernel& Bk = ins(d.B_parts);
        Kernel& Ek = ins(d.E_parts);
        // Split f on the cube by height; ties (|f| equal to the threshold) go
        // to the low branch.
        double low_sum = 0.0;
        for (long long x = q.start; x < q.end(); ++x) {
            double v = f.at(x);
            if (x >= d.g.lo() && x <= d.g.hi()) d.g.ref(x) = 0.0;
            if (std::fabs(v) > d.height_threshold) bk.ref(x) += v;
            else low_sum += v;
        }
        double avg = low_sum / static_cast<double>(q.len);
        double Bl1 = 0.0;
        for (long long x = q.start; x < q.end(); ++x) {
            double v = f.at(x);
            Ek.ref(x) += avg;
            double low = std::fabs(v) > d.height_threshold ? 0.0 : v;
            double Bv = low - avg;
            Bk.ref(x) += Bv;
            Bl1 += std::fabs(Bv);
        }
        d.mean_free_C = std::max(d.mean_free_C, Bl1 / (lam * static_cast<double>(q.len)));
        d.parent_mass += 2.0 * static_cast<double>(q.len);
    }
    d.g.trim();
    for (auto* m : {&d.b_parts, &d.B_parts, &d.E_parts})
        for (auto& [k, ker] : *m) ker.trim();

    // Invariant verification (failures are bugs, not data conditions).
    for (size_t i = 0; i + 1 < d.cubes.size(); ++i)
        if (d.cubes[i].end() > d.cubes[i + 1].start)
            throw std::logic_error("cz_decompose: cubes overlap");
    for (const auto& q : d.cubes) {
        if (!(detail::cube_avg(f, q) > lam))
            throw std::logic_error("cz_decompose: selected cube average not above the level");
        if (detail::cube_avg(f, detail::parent_cube(q)) > lam * (1.0 + 1e-12))
            throw std::logic_error("cz_decompose: cube not maximal (parent average above the level)");
    }
    for (long long x = d.g.lo(); x <= d.g.hi(); ++x)
        if (std::fabs(d.g.at(x)) > lam)
            throw std::logic_error("cz_decompose: off-cube part exceeds the level");
    if (d.parent_mass > 2.0 * norm_l1(f) / lam * (1.0 + 1e-9))
        throw std::logic_error("cz_decompose: parent mass bound violated");
    Kernel recon = d.g;
    for (const auto* m : {&d.b_parts, &d.B_parts, &d.E_parts})
        for (const auto& [k, ker] : *m) recon = add(recon, ker);
    for (long long x = std::min(recon.lo(), f.lo()); x <= std::max(recon.hi(), f.hi()); ++x) {
        double diff = std::fabs(recon.at(x) - f.at(x));
        if (diff > 1e-12 * std::max(1.0, std::fabs(f.at(x))))
            throw std::logic_error("cz_decompose: reconstruction mismatch at x=" + std::to_string(x));
    }
    for (const auto& [k, Bk] : d.B_parts) {
        for (const auto& q : d.cubes) {
            if (q.len != (1ll << k)) continue;
            double m = 0.0, l1 = 0.0;
            for (long long x = q.start; x < q.end(); ++x) {
                m += Bk.at(x);
                l1 += std::fabs(Bk.at(x));
            }
            // Relative to the cube's natural mass scale: on a cube where f is
            // an exact plateau the part is pure rounding noise and its own l1
            // cannot serve as the yardstick.
            double scale_q = std::max(l1, lam * static_cast<double>(q.len));
            if (std::fabs(m) > 1e-12 * std::max(scale_q, 1e-300))
                throw std::logic_error("cz_decompose: mean-free part has mean on a cube");
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Maximal truncation of the partial sums S_s = sum_{scales <= s} B_nu applied
// to h: returns || sup_s |S_s * h| ||_2 divided by ||h||_2.

inline double maximal_truncation_norm(const Params& p, const Kernel& h) {
    double h2 = norm_l2(h);
    if (h2 == 0.0) throw ValidationError("maximal_truncation_norm: input must be nonzero");
    ScaleGrid scales = scale_set(p);
    Kernel sup_abs;       // running sup of |S_s * h|
    Kernel running;       // running S_s * h
    for (size_t i = 0; i < scales.scales.size(); ++i) {
        Kernel Bs = block_kernel(scales.scales[i], p, p.mode == Mode::full && i == 0);
        running = add(running, convolve(Bs, h));
        Kernel abs_here = running;
        for (auto& v : abs_here.values) v = std::fabs(v);
        if (sup_abs.empty()) {
            sup_abs = abs_here;
        } else {
            long long lo = std::min(sup_abs.lo(), abs_here.lo());
            long long hi = std::max(sup_abs.hi(), abs_here.hi());
            Kernel merged;
            merged.base = lo;
            merged.values.assign(static_cast<size_t>(hi - lo + 1), 0.0);
            for (long long x = lo; x <= hi; ++x)
                merged.ref(x) = std::max(sup_abs.at(x), abs_here.at(x));
            sup_abs = std::move(merged);
        }
    }
    return norm_l2(sup_abs) / h2;
}

// ---------------------------------------------------------------------------
// Weak-type sweep across M for a kernel family.

enum class WeakFamily { H, Hsquared, resolvent_residual };

inline const char* family_name(WeakFamily f) {
    switch (f) {
        case WeakFamily::H: return "H";
        case WeakFamily::Hsquared: return "Hsq";
        default: return "residual";
    }
}

inline WeakFamily parse_family(const std::string& s) {
    if (s == "h" || s == "H") return WeakFamily::H;
    if (s == "hsq" || s == "Hsq" || s == "hsquared") return WeakFamily::Hsquared;
    if (s == "residual" || s == "resolvent_residual") return WeakFamily::resolvent_residual;
    throw ValidationError("unknown kernel family '" + s + "' (expected h, hsq, or residual)");
}

struct WeakRow {
    long long M = 0;
    std::string family;
    bool ok = true;
    double weak_l1 = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    long long support_radius = 0;
};

using WeakTable = std::vector<WeakRow>;

inline WeakTable weak_sweep(WeakFamily family, std::complex<double> lam, const Params& proto,
                            const std::vector<long long>& M_list, double margin_tol = 1e-3) {
    WeakTable table;
    for (long long M : M_list) {
        WeakRow row;
        row.M = M;
        row.family = family_name(family);
        Params p = proto;
        p.M = M;
        try {
            p = revalidate(p);
            Kernel K;
            if (family == WeakFamily::H) {
                K = assemble(p).H;
            } else if (family == WeakFamily::Hsquared) {
                Kernel H = assemble(p).H;
                K = convolve(H, H);
            } else {
                Kernel H = assemble(p).H;
                ResolventKernel rk = resolvent_of(lam, H, 0, margin_tol);
                ResolventExpansion e = fit_expansion_against(rk.R, H, convolve(H, H), p);
                K = real_part(e.residual);
                K.trim();
            }
            row.weak_l1 = weak_l1(K);
            row.l1 = norm_l1(K);
            row.l2 = norm_l2(K);
            row.support_radius = K.support_radius();
        } catch (const std::exception&) {
            row.ok = false;
        }
        table.push_back(row);
    }
    return table;
}

} // namespace rhlab
