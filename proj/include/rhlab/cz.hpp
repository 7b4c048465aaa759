#pragma once

// Building-block verification and re-blocking.
//
// A building block of dyadic scale s is a kernel K with
//   (i)   sum K = 0,
//   (ii)  supp K in [-s, s],
//   (iii) sum |K|^2        <= D^2 / s,
//   (iv)  sum |K(.+h)-K|^2 <= (D^2/s) (|h|/s)^omega  for shifts h,
// and the block constant D is the smallest constant passing (iii) and (iv).
// A kernel represented as a dyadic family of blocks carries the norm
// max_s D_s over the family ("canonical representation": this lab never
// searches over alternative representations).
//
// The telescoping re-blocker turns a family of possibly mean-carrying
// candidate blocks into mean-free blocks plus one mean-carrying tail, moving
// each scale's accumulated mass up the dyadic chain with normalized plateau
// bumps. The identity
//     Ktil_s = K_s - psi_s * S_s + psi_{s/2} * S_{s/2},   S_s = sum_{j<=s} mass_j
// telescopes: sum_s Ktil_s + psi_TOP * S_TOP = sum_s K_s pointwise.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhlab/blocks.hpp"
#include "rhlab/bumps.hpp"
#include "rhlab/kernel.hpp"
#include "rhlab/params.hpp"

namespace rhlab {

struct CZBlock {
    Kernel kernel;
    long long scale = 2;
    double D = 0.0;          // measured block constant at `scale`
    double omega = 0.5;
    bool mean_free = true;
};

struct CZReport {
    bool pass_i = false, pass_ii = false, pass_iii = false, pass_iv = false;
    double D_iii = 0.0;      // minimal D from the size axiom
    double D_iv = 0.0;       // minimal D from the regularity axiom
    double D_min = 0.0;      // max of the two
    long long worst_h = 1;   // shift attaining the regularity constant
    double mean = 0.0;
    double overhang = 0.0;   // l1 mass outside [-s, s]
};

struct CZKernelProfile {
    std::vector<CZBlock> blocks;
    double cz_norm = 0.0;
};

// Measure the axiom constants of K at scale s. A caller-supplied budget turns
// pass_iii/pass_iv into real checks; the default budget accepts any finite D.
inline CZReport check_block(const Kernel& K, long long s, double omega,
                            double D_budget = std::numeric_limits<double>::infinity()) {
    if (!is_dyadic(s)) throw ValidationError("check_block: scale must be dyadic");
    CZReport r;
    r.mean = total_mass(K);
    double l1 = norm_l1(K);
    r.pass_i = std::fabs(r.mean) <= 1e-12 * std::max(l1, 1e-300);
    for (long long x = K.lo(); x <= K.hi(); ++x)
        if (std::llabs(x) > s) r.overhang += std::fabs(K.at(x));
    r.pass_ii = r.overhang == 0.0;
    r.D_iii = std::sqrt(static_cast<double>(s) * norm_l2sq(K));
    r.D_iv = 0.0;
    for (long long h = 1; h <= s; h <<= 1) {
        double d2 = 0.0;
        for (long long x = K.lo() - h; x <= K.hi(); ++x) {
            double d = K.at(x + h) - K.at(x);
            d2 += d * d;
        }
        double D = std::sqrt(static_cast<double>(s) *
                             std::pow(static_cast<double>(s) / static_cast<double>(h), omega) * d2);
        if (D > r.D_iv) { r.D_iv = D; r.worst_h = h; }
    }
    r.D_min = std::max(r.D_iii, r.D_iv);
    r.pass_iii = r.D_iii <= D_budget;
    r.pass_iv = r.D_iv <= D_budget;
    return r;
}

// Normalized plateau bump as a kernel: sums to 1 over the integers.
inline Kernel psi_normalized_kernel(long long s) {
    Kernel k;
    k.base = -2 * s;
    k.values.assign(static_cast<size_t>(4 * s + 1), 0.0);
    double c = psi_mass(s);
    for (long long y = -2 * s; y <= 2 * s; ++y)
        k.ref(y) = cutoff_w(static_cast<double>(y) / static_cast<double>(s)) / c;
    k.trim();
    return k;
}

// Telescoping re-blocker. Inputs are (kernel, scale) candidates with scales
// dyadic and >= J; inputs at equal scales are merged. Output: one mean-free
// block for every dyadic scale J..TOP that carries anything, labeled at twice
// its nominal scale (the correction bumps live on [-2s, 2s]), plus a tail
// block psi_TOP * (total mass) at scale 4*TOP when the total mass is not
// negligible. tail_at chooses TOP explicitly (0: the largest input scale).
inline std::vector<CZBlock> telescope(const std::vector<std::pair<Kernel, long long>>& inputs,
                                      long long J, double omega, long long tail_at = 0) {
    if (!is_dyadic(J)) throw ValidationError("telescope: lowest scale must be dyadic");
    std::map<long long, Kernel> by_scale;
    double total_l1 = 0.0;
    long long top_in = J;
    for (const auto& [k, s] : inputs) {
        if (!is_dyadic(s)) throw ValidationError("telescope: non-dyadic input scale " + std::to_string(s));
        if (s < J) throw ValidationError("telescope: input scale " + std::to_string(s) +
                                         " below the declared lowest scale " + std::to_string(J));
        auto it = by_scale.find(s);
        if (it == by_scale.end()) by_scale.emplace(s, k);
        else it->second = add(it->second, k);
        total_l1 += norm_l1(k);
        top_in = std::max(top_in, s);
    }
    long long TOP = tail_at > 0 ? tail_at : top_in;
    if (!is_dyadic(TOP)) throw ValidationError("telescope: tail scale must be dyadic");
    if (TOP < top_in)
        throw ValidationError("telescope: tail scale " + std::to_string(TOP) +
                              " below the largest input scale " + std::to_string(top_in));

    std::vector<CZBlock> out;
    double S_prev = 0.0;   // accumulated mass strictly below the current scale
    Kernel psi_prev;       // normalized bump at the previous scale (s/2)
    for (long long s = J; s <= TOP; s <<= 1) {
        Kernel Ks;
        auto it = by_scale.find(s);
        if (it != by_scale.end()) Ks = it->second;
        double S_here = S_prev + total_mass(Ks);
        Kernel psi_here = psi_normalized_kernel(s);
        Kernel corr = scaled(psi_here, -S_here);
        if (S_prev != 0.0 && !psi_prev.empty()) corr = add(corr, scaled(psi_prev, S_prev));
        Kernel Kt = add(Ks, corr);
        Kt.trim();
        if (!Kt.empty()) {
            CZBlock b;
            b.kernel = Kt;
            b.scale = 2 * s;
            b.omega = omega;
            b.mean_free = true;
            b.D = check_block(Kt, b.scale, omega).D_min;
            out.push_back(std::move(b));
        }
        S_prev = S_here;
        psi_prev = std::move(psi_here);
    }
    // Mean-carrying tail: the moved mass parked at the top of the chain.
    if (std::fabs(S_prev) > 1e-12 * std::max(total_l1, 1e-300)) {
        CZBlock tail;
        tail.kernel = scaled(psi_prev, S_prev);
        tail.scale = 4 * TOP;
        tail.omega = omega;
        tail.mean_free = false;
        tail.D = check_block(tail.kernel, tail.scale, omega).D_min;
        out.push_back(std::move(tail));
    }
    return out;
}

// Partition a kernel into candidate blocks K*phi_s over a consecutive dyadic
// grid: the lowest scale uses the plateau cutoff (covering small |x|), later
// scales the band bump. Requires the top scale to reach the support radius so
// the plateau at the top reconstructs K exactly.
inline std::vector<std::pair<Kernel, long long>> window_decompose(const Kernel& K,
                                                                  const ScaleGrid& grid) {
    if (grid.empty()) throw ValidationError("window_decompose: empty scale grid");
    for (size_t i = 0; i + 1 < grid.scales.size(); ++i)
        if (grid.scales[i + 1] != 2 * grid.scales[i])
            throw ValidationError("window_decompose: grid must be consecutive dyadic scales");
    long long radius = K.support_radius();
    if (grid.highest() < radius) {
        long long need = 2;
        while (need < radius) need <<= 1;
        throw ValidationError("window_decompose: largest grid scale " +
                              std::to_string(grid.highest()) +
                              " does not cover the support radius " + std::to_string(radius) +
                              "; the grid must reach " + std::to_string(need));
    }
    std::vector<std::pair<Kernel, long long>> out;
    for (size_t i = 0; i < grid.scales.size(); ++i) {
        long long s = grid.scales[i];
        Kernel piece = K;
        for (long long x = piece.lo(); x <= piece.hi(); ++x) {
            double t = static_cast<double>(x) / static_cast<double>(s);
            piece.ref(x) *= (i == 0) ? cutoff_w(t) : cutoff_wt(t);
        }
        piece.trim();
        out.emplace_back(std::move(piece), s);
    }
    return out;
}

// Norm of a canonical block family: max of the block constants, with every
// block's D recomputed at the stated omega. Mean-carrying blocks are rejected
// unless they are flagged tails and allow_tail is set (profiles produced by
// the telescoping re-blocker park residual mass in such a tail).
inline double cz_norm(const std::vector<CZBlock>& blocks, double omega, bool allow_tail = false) {
    double n = 0.0;
    for (const auto& b : blocks) {
        if (!b.mean_free && !allow_tail)
            throw ValidationError("cz_norm: block at scale " + std::to_string(b.scale) +
                                  " carries mean; run the telescoping re-blocker first");
        CZReport r = check_block(b.kernel, b.scale, omega);
        if (b.mean_free && !r.pass_i)
            throw ValidationError("cz_norm: block at scale " + std::to_string(b.scale) +
                                  " flagged mean-free has mean " + std::to_string(r.mean));
        n = std::max(n, r.D_min);
    }
    return n;
}

// Canonical profile of an arbitrary kernel: window partition on a consecutive
// dyadic grid, telescoped mean-free, measured. The grid starts at `lo_scale`
// (clamped up to cover at least one scale) and reaches the support radius.
inline CZKernelProfile profile_kernel(const Kernel& K, long long lo_scale, double omega) {
    CZKernelProfile prof;
    if (K.empty()) return prof;
    long long radius = std::max<long long>(K.support_radius(), 2);
    long long top = 2;
    while (top < radius) top <<= 1;
    long long lo = std::min(lo_scale, top);
    ScaleGrid grid;
    for (long long s = lo; s <= top; s <<= 1) grid.scales.push_back(s);
    auto pieces = window_decompose(K, grid);
    prof.blocks = telescope(pieces, lo, omega);
    prof.cz_norm = cz_norm(prof.blocks, omega, /*allow_tail=*/true);
    return prof;
}

// ---------------------------------------------------------------------------
// Commutator of a plus-band block's smooth truncation against the minus band:
//   C_s = (B_s * Hminus) . phi_s - (B_s . phi_s) * Hminus.
// Small in l2: norm_sq * s^{3/2} stays bounded across the band.

struct CommutatorResult {
    Kernel C;
    double norm_sq = 0.0;
    double bound_const = 0.0;   // norm_sq * s^(1 + 1/2)
    double mean = 0.0;
};

// Test hook: the inner kernel is pluggable (a point mass gives C identically 0).
inline CommutatorResult commutator_with(long long s, const Kernel& inner, const Params& p) {
    Kernel Bs = block_kernel(s, p, false);
    Kernel conv_first = convolve(Bs, inner);
    Kernel C1 = truncate(conv_first, s, p, false);
    Kernel C2 = convolve(truncate(Bs, s, p, false), inner);
    CommutatorResult r;
    r.C = add(C1, scaled(C2, -1.0));
    r.C.trim();
    r.norm_sq = norm_l2sq(r.C);
    r.bound_const = r.norm_sq * std::pow(static_cast<double>(s), 1.5);
    r.mean = total_mass(r.C);
    return r;
}

inline CommutatorResult commutator(long long s, const Params& p) {
    if (p.mode != Mode::gap) throw ValidationError("commutator: gap mode only");
    ScaleGrid plus = plus_band(p);
    if (std::find(plus.scales.begin(), plus.scales.end(), s) == plus.scales.end())
        throw ValidationError("commutator: scale " + std::to_string(s) +
                              " is not in the plus band of M=" + std::to_string(p.M));
    Assembly a = assemble(p);
    return commutator_with(s, a.Hminus, p);
}

// ---------------------------------------------------------------------------
// Near/far split of a product of two blocks.
//
// P = B_{s1} * B_{s2} splits into: a diagonal point mass at 0 (removed and
// reported when s1 = s2), the near part k supported in the window
// |x| <= C_split * s2^(1 - 1/alpha + delta), and the far part rho. Entries of
// the near part below 1e-10 * sup|P| are floored to exact zero (cutoff-tail
// dust; the floored mass is reported), which makes "the near part vanishes
// when s1/s2 <= 1/4" a clean measurable statement.

struct RhoKSplit {
    Kernel rho, k;
    double diag = 0.0;
    double window = 0.0;        // the split radius actually used
    double sup_rho = 0.0;
    double sup_rho_s2 = 0.0;    // sup|rho| * s2
    double sup_k_s2 = 0.0;      // sup|k| * s2
    double supp_const = 0.0;    // max |x| over supp(rho), divided by s2
    double hoelder_D = 0.0;     // regularity constant of rho at its covering scale
    double zeroed_mass = 0.0;
};

inline RhoKSplit rho_k_split(long long s1, long long s2, const Params& p, double c_split = 8.0) {
    if (!is_dyadic(s1) || !is_dyadic(s2)) throw ValidationError("rho_k_split: scales must be dyadic");
    if (s1 > s2) throw ValidationError("rho_k_split: require s1 <= s2");
    double lo_guard = band_pow(p.M, p.theta) * (1.0 - 1e-9);
    if (static_cast<double>(s1) < lo_guard || s2 > p.M)
        throw ValidationError("rho_k_split: scales must satisfy M^theta <= s1 <= s2 <= M");
    Kernel P = convolve(block_kernel(s1, p, false), block_kernel(s2, p, false));
    RhoKSplit r;
    if (s1 == s2) {
        r.diag = P.at(0);
        if (P.at(0) != 0.0) P.ref(0) = 0.0;
    }
    r.window = c_split * std::pow(static_cast<double>(s2), 1.0 - 1.0 / p.alpha + p.delta);
    double sup_all = norm_sup(P);
    double floor_level = 1e-10 * sup_all;
    Kernel near = P, far = P;
    for (long long x = P.lo(); x <= P.hi(); ++x) {
        bool in_window = std::fabs(static_cast<double>(x)) <= r.window;
        if (in_window) {
            far.ref(x) = 0.0;
            if (std::fabs(near.at(x)) < floor_level) {
                r.zeroed_mass += std::fabs(near.at(x));
                near.ref(x) = 0.0;
            }
        } else {
            near.ref(x) = 0.0;
        }
    }
    near.trim();
    far.trim();
    r.sup_rho = norm_sup(far);
    r.sup_rho_s2 = r.sup_rho * static_cast<double>(s2);
    r.sup_k_s2 = norm_sup(near) * static_cast<double>(s2);
    r.supp_const = far.empty() ? 0.0
                               : static_cast<double>(far.support_radius()) / static_cast<double>(s2);
    if (!far.empty()) {
        long long cover = 2;
        while (cover < far.support_radius()) cover <<= 1;
        r.hoelder_D = check_block(far, cover, p.omega).D_iv;
    }
    r.rho = std::move(far);
    r.k = std::move(near);
    return r;
}

} // namespace rhlab
