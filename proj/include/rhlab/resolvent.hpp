#pragma once

// Resolvent kernels of lambda*I + H by symbol inversion, Neumann-series
// cross-checks, the three-term expansion fit
//     R = lambda' delta_0 + beta H + gamma H^2 + residual,
// algebra-norm accounting for elements of that shape, and coefficient
// asymptotics across M-sweeps.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhlab/blocks.hpp"
#include "rhlab/cz.hpp"
#include "rhlab/kernel.hpp"
#include "rhlab/params.hpp"

namespace rhlab {

inline CKernel to_complex(const Kernel& k) {
    CKernel c;
    c.base = k.base;
    c.values.assign(k.values.begin(), k.values.end());
    return c;
}

inline Kernel real_part(const CKernel& k) {
    Kernel r;
    r.base = k.base;
    r.values.resize(k.values.size());
    for (size_t i = 0; i < k.values.size(); ++i) r.values[i] = k.values[i].real();
    return r;
}

inline Kernel imag_part(const CKernel& k) {
    Kernel r;
    r.base = k.base;
    r.values.resize(k.values.size());
    for (size_t i = 0; i < k.values.size(); ++i) r.values[i] = k.values[i].imag();
    return r;
}

// ---------------------------------------------------------------------------
// Invertibility margin: min over frequencies of |lam + K^(xi)|, grid scan
// followed by one golden-section refinement around the grid argmin. The
// reciprocal bounds the l2 operator norm of the resolvent.

template <class T>
double margin_of(std::complex<double> lam, const BasicKernel<T>& K, size_t N) {
    if (K.empty()) return std::abs(lam);
    SymbolGrid g = symbol(K, N);
    size_t kbest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < N; ++k) {
        double a = std::abs(lam + g.values[k]);
        if (a < best) { best = a; kbest = k; }
    }
    double lo = (static_cast<double>(kbest) - 1.0) / static_cast<double>(N);
    double hi = (static_cast<double>(kbest) + 1.0) / static_cast<double>(N);
    const double gr = 0.6180339887498948482;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = std::abs(lam + symbol_at(K, x1)), f2 = std::abs(lam + symbol_at(K, x2));
    for (int it = 0; it < 80; ++it) {
        if (f1 > f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = std::abs(lam + symbol_at(K, x2));
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = std::abs(lam + symbol_at(K, x1));
        }
    }
    return std::min(best, std::min(f1, f2));
}

inline double resolvent_set_margin(std::complex<double> lam, const Params& p, size_t N) {
    Kernel H = assemble(p).H;
    if (N < 8 * H.len())
        throw ValidationError("resolvent_set_margin: N must be at least 8x the support length (need >= " +
                              std::to_string(next_pow2(8 * H.len())) + ")");
    return margin_of(lam, H, N);
}

// ---------------------------------------------------------------------------
// Resolvent kernel: inverse transform of 1/(lam + symbol), with an aliasing
// check at twice the transform size and a window truncation at relative
// 1e-13 (truncated mass reported).

struct ResolventKernel {
    CKernel R;
    double margin = 0.0;
    double aliasing_err = 0.0;      // max abs deviation against the 2N recomputation
    double truncated_mass = 0.0;    // l1 mass dropped by the window truncation
    size_t N = 0;
};

namespace detail {

// One period of the inverse transform of 1/(lam + symbol), centered at 0.
template <class T>
std::vector<cplx> resolvent_period(std::complex<double> lam, const BasicKernel<T>& K, size_t N) {
    SymbolGrid g = symbol(K, N);
    std::vector<cplx> rhat(N);
    for (size_t k = 0; k < N; ++k) rhat[k] = 1.0 / (lam + g.values[k]);
    ifft(rhat);
    return rhat;   // rhat[x mod N] for x in [-N/2, N/2)
}

} // namespace detail

template <class T>
ResolventKernel resolvent_of(std::complex<double> lam, const BasicKernel<T>& K, size_t N = 0,
                             double margin_tol = 1e-3) {
    ResolventKernel out;
    if (K.empty()) {
        if (std::abs(lam) < margin_tol)
            throw ValidationError("resolvent: margin " + std::to_string(std::abs(lam)) +
                                  " below tolerance " + std::to_string(margin_tol));
        out.R = delta_kernel<std::complex<double>>(0, 1.0 / lam);
        out.margin = std::abs(lam);
        out.N = 0;
        return out;
    }
    if (N == 0) N = next_pow2(16 * K.len());
    if (!is_pow2(N)) throw ValidationError("resolvent: N must be a power of two");
    out.N = N;
    out.margin = margin_of(lam, K, N);
    if (out.margin < margin_tol)
        throw ValidationError("resolvent: invertibility margin " + std::to_string(out.margin) +
                              " below tolerance " + std::to_string(margin_tol));
    std::vector<cplx> r = detail::resolvent_period(lam, K, N);
    std::vector<cplx> r2 = detail::resolvent_period(lam, K, 2 * N);
    double max_abs = 0.0;
    for (const auto& v : r) max_abs = std::max(max_abs, std::abs(v));
    const long long half = static_cast<long long>(N) / 2;
    for (long long x = -half; x < half; ++x) {
        size_t i = static_cast<size_t>((x + static_cast<long long>(N)) % static_cast<long long>(N));
        size_t j = static_cast<size_t>((x + 2 * static_cast<long long>(N)) % (2 * static_cast<long long>(N)));
        out.aliasing_err = std::max(out.aliasing_err, std::abs(r[i] - r2[j]));
    }
    if (out.aliasing_err > 1e-9 * max_abs)
        throw ValidationError("resolvent: aliasing check failed (deviation " +
                              std::to_string(out.aliasing_err) + " vs max " + std::to_string(max_abs) +
                              "); increase the transform size to " + std::to_string(4 * N));
    // Window truncation from the edges inward.
    const double floor_level = 1e-13 * max_abs;
    long long xlo = -half, xhi = half - 1;
    auto at = [&](long long x) {
        return r[static_cast<size_t>((x + static_cast<long long>(N)) % static_cast<long long>(N))];
    };
    while (xlo < xhi && std::abs(at(xlo)) < floor_level) { out.truncated_mass += std::abs(at(xlo)); ++xlo; }
    while (xhi > xlo && std::abs(at(xhi)) < floor_level) { out.truncated_mass += std::abs(at(xhi)); --xhi; }
    out.R.base = xlo;
    out.R.values.resize(static_cast<size_t>(xhi - xlo + 1));
    for (long long x = xlo; x <= xhi; ++x)
        out.R.values[static_cast<size_t>(x - xlo)] = at(x);
    // A real lam with a real kernel gives a conjugate-symmetric symbol, so the
    // resolvent is real; strip transform noise from the imaginary part then.
    if (lam.imag() == 0.0) {
        bool real_input = true;
        if constexpr (std::is_same_v<T, std::complex<double>>) {
            for (const auto& v : K.values)
                if (v.imag() != 0.0) { real_input = false; break; }
        }
        if (real_input)
            for (auto& v : out.R.values) v = cplx(v.real(), 0.0);
    }
    return out;
}

inline ResolventKernel resolvent_kernel(std::complex<double> lam, const Params& p, size_t N = 0,
                                        double margin_tol = 1e-3) {
    Kernel H = assemble(p).H;
    return resolvent_of(lam, H, N, margin_tol);
}

// ---------------------------------------------------------------------------
// Neumann partial sum: sum_{n=0..order} (-1)^n lam^{-n-1} H^{*n}.

template <class T>
CKernel neumann_of(std::complex<double> lam, const BasicKernel<T>& K, int order) {
    if (lam == std::complex<double>(0.0, 0.0))
        throw ValidationError("neumann: lam must be nonzero");
    CKernel power = delta_kernel<std::complex<double>>();
    CKernel acc;
    std::complex<double> coeff = 1.0 / lam;
    for (int n = 0; n <= order; ++n) {
        acc = add(acc, scaled(power, coeff));
        if (n < order) {
            power = convolve(power, K);
            coeff *= -1.0 / lam;
        }
    }
    acc.trim();
    return acc;
}

inline CKernel neumann_kernel(std::complex<double> lam, const Params& p, int order) {
    Kernel H = assemble(p).H;
    return neumann_of(lam, H, order);
}

// ---------------------------------------------------------------------------
// Least-squares fit of a kernel against {delta_0, H, H^2} in l2, residual
// re-blocked into a canonical profile. The Gram matrix is nearly diagonal
// (delta_0 _|_ H since H(0)=0; H _|_ H^2 since odd x even), which keeps the
// system well conditioned; the condition number is still measured and a
// collinearity error names the offending pair.

struct ResolventExpansion {
    std::complex<double> lambda_prime{0.0, 0.0};
    std::complex<double> beta{0.0, 0.0};
    std::complex<double> gamma{0.0, 0.0};
    CKernel residual;
    double fit_gram_cond = 1.0;
    CZKernelProfile residual_profile;
    double cz_norm_residual = 0.0;
    // Point-matching cross-check (coefficients read off at distinguished
    // points instead of projected): reported alongside, never canonical.
    std::complex<double> lambda_prime_pt{0.0, 0.0};
    std::complex<double> beta_pt{0.0, 0.0};
    std::complex<double> gamma_pt{0.0, 0.0};
};

namespace detail {

// Eigenvalue-based condition number of a symmetric positive semidefinite 3x3.
inline double sym3_cond(const std::array<std::array<double, 3>, 3>& G) {
    const double p1 = G[0][1] * G[0][1] + G[0][2] * G[0][2] + G[1][2] * G[1][2];
    const double tr = G[0][0] + G[1][1] + G[2][2];
    if (p1 == 0.0) {
        double mx = std::max({G[0][0], G[1][1], G[2][2]});
        double mn = std::min({G[0][0], G[1][1], G[2][2]});
        return mn > 0.0 ? mx / mn : std::numeric_limits<double>::infinity();
    }
    const double q = tr / 3.0;
    const double p2 = (G[0][0] - q) * (G[0][0] - q) + (G[1][1] - q) * (G[1][1] - q) +
                      (G[2][2] - q) * (G[2][2] - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    std::array<std::array<double, 3>, 3> B{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) B[i][j] = (G[i][j] - (i == j ? q : 0.0)) / p;
    double detB = B[0][0] * (B[1][1] * B[2][2] - B[1][2] * B[2][1]) -
                  B[0][1] * (B[1][0] * B[2][2] - B[1][2] * B[2][0]) +
                  B[0][2] * (B[1][0] * B[2][1] - B[1][1] * B[2][0]);
    double rr = std::clamp(detB / 2.0, -1.0, 1.0);
    const double pi = 3.14159265358979323846264338327950288;
    double phi = std::acos(rr) / 3.0;
    double e1 = q + 2.0 * p * std::cos(phi);
    double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
    return e3 > 0.0 ? e1 / e3 : std::numeric_limits<double>::infinity();
}

// Solve the symmetric 3x3 system G c = b by Gaussian elimination with
// partial pivoting (tiny, fixed size).
inline std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> G, std::array<double, 3> b) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int rrow = col + 1; rrow < 3; ++rrow)
            if (std::fabs(G[rrow][col]) > std::fabs(G[piv][col])) piv = rrow;
        std::swap(G[col], G[piv]);
        std::swap(b[col], b[piv]);
        for (int rrow = col + 1; rrow < 3; ++rrow) {
            double f = G[rrow][col] / G[col][col];
            for (int c2 = col; c2 < 3; ++c2) G[rrow][c2] -= f * G[col][c2];
            b[rrow] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (int rrow = 2; rrow >= 0; --rrow) {
        double s = b[rrow];
        for (int c2 = rrow + 1; c2 < 3; ++c2) s -= G[rrow][c2] * x[c2];
        x[rrow] = s / G[rrow][rrow];
    }
    return x;
}

template <class T>
double dot_real(const Kernel& a, const BasicKernel<T>& b, bool imag) {
    double s = 0.0;
    long long lo = std::max(a.lo(), b.lo()), hi = std::min(a.hi(), b.hi());
    for (long long x = lo; x <= hi; ++x) {
        if constexpr (std::is_same_v<T, std::complex<double>>)
            s += a.at(x) * (imag ? b.at(x).imag() : b.at(x).real());
        else
            s += a.at(x) * b.at(x);
    }
    return s;
}

} // namespace detail

// Core fit against a caller-supplied basis pair (H, H2 = H*H).
inline ResolventExpansion fit_expansion_against(const CKernel& R, const Kernel& H,
                                                const Kernel& H2, const Params& p) {
    std::array<std::array<double, 3>, 3> G{};
    G[0][0] = 1.0;
    G[0][1] = G[1][0] = H.at(0);
    G[0][2] = G[2][0] = H2.at(0);
    G[1][1] = norm_l2sq(H);
    G[1][2] = G[2][1] = detail::dot_real(H, H2, false);
    G[2][2] = norm_l2sq(H2);
    ResolventExpansion e;
    e.fit_gram_cond = detail::sym3_cond(G);
    if (e.fit_gram_cond > 1e12) {
        // Name the closest-to-collinear pair via normalized off-diagonal size.
        const char* names[3] = {"delta_0", "H", "H^2"};
        int bi = 0, bj = 1;
        double bc = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                double denom = std::sqrt(G[i][i] * G[j][j]);
                double c = denom > 0.0 ? std::fabs(G[i][j]) / denom : 1.0;
                if (c >= bc) { bc = c; bi = i; bj = j; }
            }
        throw ValidationError(std::string("fit_expansion: Gram condition ") +
                              std::to_string(e.fit_gram_cond) + " exceeds 1e12; basis pair (" +
                              names[bi] + ", " + names[bj] + ") is nearly collinear");
    }
    const bool has_imag = [&] {
        for (const auto& v : R.values)
            if (v.imag() != 0.0) return true;
        return false;
    }();
    auto rhs = [&](bool imag) {
        std::array<double, 3> b{};
        long long lo = R.lo(), hi = R.hi();
        for (long long x = lo; x <= hi; ++x) {
            double rv = imag ? R.at(x).imag() : R.at(x).real();
            if (x == 0) b[0] += rv;
            b[1] += H.at(x) * rv;
            b[2] += H2.at(x) * rv;
        }
        return b;
    };
    std::array<double, 3> cr = detail::solve3(G, rhs(false));
    std::array<double, 3> ci{0.0, 0.0, 0.0};
    if (has_imag) ci = detail::solve3(G, rhs(true));
    e.lambda_prime = {cr[0], ci[0]};
    e.beta = {cr[1], ci[1]};
    e.gamma = {cr[2], ci[2]};
    CKernel recon = add(scaled(to_complex(H), e.beta), scaled(to_complex(H2), e.gamma));
    recon = add(recon, delta_kernel<std::complex<double>>(0, e.lambda_prime));
    e.residual = add(R, scaled(recon, std::complex<double>(-1.0, 0.0)));
    e.residual.trim();
    // Re-block the residual over the dyadic grid starting at the first scale
    // above the low band edge; the imaginary part (when present) is profiled
    // separately and the norms are combined by max.
    long long lo_scale = 2;
    long double edge = band_pow(p.M, p.theta) * (1.0L - 1e-9L);
    while (static_cast<long double>(lo_scale) < edge) lo_scale <<= 1;
    Kernel res_re = real_part(e.residual);
    res_re.trim();
    e.residual_profile = profile_kernel(res_re, lo_scale, p.omega);
    e.cz_norm_residual = e.residual_profile.cz_norm;
    if (has_imag) {
        Kernel res_im = imag_part(e.residual);
        res_im.trim();
        CZKernelProfile pim = profile_kernel(res_im, lo_scale, p.omega);
        e.cz_norm_residual = std::max(e.cz_norm_residual, pim.cz_norm);
        for (auto& b : pim.blocks) e.residual_profile.blocks.push_back(std::move(b));
        e.residual_profile.cz_norm = e.cz_norm_residual;
    }
    // Point-matching cross-check: gamma from the largest |H^2| ordinate,
    // beta from the largest |H| ordinate, lambda' from the origin.
    long long x1 = 0, x2 = 0;
    double m1 = -1.0, m2 = -1.0;
    for (long long x = H.lo(); x <= H.hi(); ++x)
        if (std::fabs(H.at(x)) > m1) { m1 = std::fabs(H.at(x)); x1 = x; }
    for (long long x = H2.lo(); x <= H2.hi(); ++x)
        if (x != 0 && std::fabs(H2.at(x)) > m2) { m2 = std::fabs(H2.at(x)); x2 = x; }
    if (m2 > 0.0) e.gamma_pt = R.at(x2) / H2.at(x2);
    if (m1 > 0.0) e.beta_pt = R.at(x1) / H.at(x1);
    e.lambda_prime_pt = R.at(0) - e.gamma_pt * H2.at(0);
    return e;
}

inline ResolventExpansion fit_expansion(const CKernel& R, const Params& p) {
    Kernel H = assemble(p).H;
    Kernel H2 = convolve(H, H);
    return fit_expansion_against(R, H, H2, p);
}

inline ResolventExpansion fit_expansion(const Kernel& R, const Params& p) {
    return fit_expansion(to_complex(R), p);
}

// ---------------------------------------------------------------------------
// Algebra elements lambda delta_0 + beta H + gamma H^2 + K and their norm
// |lambda| + |beta| + |gamma| + cz_norm(K) (an upper bound for any
// representation-infimum norm; this lab stores one representation).

struct AlgebraElement {
    std::complex<double> lambda{0.0, 0.0};
    std::complex<double> beta{0.0, 0.0};
    std::complex<double> gamma{0.0, 0.0};
    CKernel K;
    CZKernelProfile profile;     // canonical re-blocking of K
    double a_norm = 0.0;
    double product_ratio = 0.0;  // diagnostic set by algebra_product
};

inline double algebra_norm(const AlgebraElement& el, double omega) {
    double czn = el.profile.blocks.empty() ? 0.0 : cz_norm(el.profile.blocks, omega, true);
    return std::abs(el.lambda) + std::abs(el.beta) + std::abs(el.gamma) + czn;
}

inline AlgebraElement make_element(std::complex<double> lambda, std::complex<double> beta,
                                   std::complex<double> gamma, const CKernel& K, const Params& p) {
    AlgebraElement el;
    el.lambda = lambda;
    el.beta = beta;
    el.gamma = gamma;
    el.K = K;
    if (!K.empty()) {
        long long lo_scale = 2;
        long double edge = band_pow(p.M, p.theta) * (1.0L - 1e-9L);
        while (static_cast<long double>(lo_scale) < edge) lo_scale <<= 1;
        Kernel kre = real_part(K);
        kre.trim();
        el.profile = profile_kernel(kre, lo_scale, p.omega);
        Kernel kim = imag_part(K);
        kim.trim();
        if (!kim.empty()) {
            CZKernelProfile pim = profile_kernel(kim, lo_scale, p.omega);
            el.profile.cz_norm = std::max(el.profile.cz_norm, pim.cz_norm);
            for (auto& b : pim.blocks) el.profile.blocks.push_back(std::move(b));
        }
    }
    el.a_norm = algebra_norm(el, p.omega);
    return el;
}

// Full kernel of an element on Z.
inline CKernel element_kernel(const AlgebraElement& el, const Kernel& H, const Kernel& H2) {
    CKernel full = delta_kernel<std::complex<double>>(0, el.lambda);
    full = add(full, scaled(to_complex(H), el.beta));
    full = add(full, scaled(to_complex(H2), el.gamma));
    if (!el.K.empty()) full = add(full, el.K);
    full.trim();
    return full;
}

// Product in the convolution algebra: convolve the full kernels, re-fit, and
// re-block the new residual. The measured submultiplicativity ratio
// a_norm(ab) / (a_norm(a) a_norm(b)) rides along as a diagnostic.
inline AlgebraElement algebra_product(const AlgebraElement& a, const AlgebraElement& b,
                                      const Params& p) {
    Kernel H = assemble(p).H;
    Kernel H2 = convolve(H, H);
    CKernel full = convolve(element_kernel(a, H, H2), element_kernel(b, H, H2));
    ResolventExpansion fit = fit_expansion_against(full, H, H2, p);
    AlgebraElement prod = make_element(fit.lambda_prime, fit.beta, fit.gamma, fit.residual, p);
    double denom = a.a_norm * b.a_norm;
    prod.product_ratio = denom > 0.0 ? prod.a_norm / denom : 0.0;
    return prod;
}

// ---------------------------------------------------------------------------
// Coefficient asymptotics across an M-sweep: invert lam delta_0 + beta0 H_M,
// fit, and record the three vanishing combinations
//   comb1 = lam lam'_M - 1,  comb2 = beta0 lam'_M + beta_M lam,
//   comb3 = lam gamma_M + beta0 beta_M
// (magnitudes). Margin failures mark the row and the sweep continues.

struct SweepRow {
    long long M = 0;
    bool margin_ok = true;
    double margin = 0.0;
    std::complex<double> lambda_prime{0.0, 0.0};
    std::complex<double> beta{0.0, 0.0};
    std::complex<double> gamma{0.0, 0.0};
    double cz_norm_residual = 0.0;
    double comb1 = 0.0, comb2 = 0.0, comb3 = 0.0;
};

using SweepTable = std::vector<SweepRow>;

inline SweepTable asymptotics_sweep(std::complex<double> lam, std::complex<double> beta0,
                                    const std::vector<long long>& M_list, const Params& proto,
                                    double margin_tol = 1e-3) {
    SweepTable table;
    for (long long M : M_list) {
        Params p = proto;
        p.M = M;
        p = revalidate(p);
        SweepRow row;
        row.M = M;
        Kernel H = assemble(p).H;
        CKernel scaled_H = scaled(to_complex(H), beta0);
        scaled_H.trim();
        size_t N = scaled_H.empty() ? 64 : next_pow2(16 * scaled_H.len());
        row.margin = margin_of(lam, scaled_H, scaled_H.empty() ? size_t(64) : N);
        if (row.margin < margin_tol) {
            row.margin_ok = false;
            table.push_back(row);
            continue;
        }
        ResolventKernel rk = resolvent_of(lam, scaled_H, N, margin_tol);
        ResolventExpansion e = fit_expansion_against(rk.R, H, convolve(H, H), p);
        row.lambda_prime = e.lambda_prime;
        row.beta = e.beta;
        row.gamma = e.gamma;
        row.cz_norm_residual = e.cz_norm_residual;
        row.comb1 = std::abs(lam * e.lambda_prime - 1.0);
        row.comb2 = std::abs(beta0 * e.lambda_prime + e.beta * lam);
        row.comb3 = std::abs(lam * e.gamma + beta0 * e.beta);
        table.push_back(row);
    }
    return table;
}

} // namespace rhlab
