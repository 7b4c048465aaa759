// Resolvent kernels by symbol inversion, Neumann cross-checks, the
// three-term expansion fit, algebra elements, and coefficient sweeps.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "rhlab/resolvent.hpp"

using Catch::Approx;
using namespace rhlab;

namespace {

Params gap_params(long long M) {
    RawParams r;
    r.alpha = 1.5;
    r.delta = 0.05;
    r.M = M;
    r.mode = Mode::gap;
    return validate(r);
}

using C = std::complex<double>;

double sup_diff(const CKernel& a, const CKernel& b) {
    long long lo = std::min(a.empty() ? 0 : a.lo(), b.empty() ? 0 : b.lo());
    long long hi = std::max(a.empty() ? 0 : a.hi(), b.empty() ? 0 : b.hi());
    double worst = 0.0;
    for (long long x = lo; x <= hi; ++x) worst = std::max(worst, std::abs(a.at(x) - b.at(x)));
    return worst;
}

} // namespace

TEST_CASE("resolvent of the zero kernel is the scaled identity", "[resolvent]") {
    ResolventKernel r = resolvent_of(C(2.0, 0.0), Kernel{});
    REQUIRE(r.R.len() == 1);
    CHECK(r.R.at(0) == C(0.5, 0.0));
    CHECK(r.margin == 2.0);
    CHECK(r.N == 0);
    REQUIRE_THROWS_AS(resolvent_of(C(1e-6, 0.0), Kernel{}), ValidationError);
}

TEST_CASE("resolvent satisfies its defining identity", "[resolvent]") {
    Params p = gap_params(1024);
    Kernel H = assemble(p).H;
    ResolventKernel r = resolvent_kernel(C(1.0, 0.0), p);
    CHECK(r.margin >= 0.9);   // purely imaginary symbol: |1 + i t| >= 1
    CHECK(r.aliasing_err <= 1e-9 * norm_sup(r.R) * 10.0);
    CKernel L = add(delta_kernel<C>(0, C(1.0, 0.0)), to_complex(H));
    CKernel probe = convolve(L, r.R);
    probe.ref(0) -= C(1.0, 0.0);
    CHECK(norm_sup(probe) <= 1e-8);
}

TEST_CASE("real data gives an exactly real resolvent", "[resolvent]") {
    Params p = gap_params(64);
    ResolventKernel r = resolvent_kernel(C(1.0, 0.0), p);
    for (const auto& v : r.R.values) REQUIRE(v.imag() == 0.0);
}

TEST_CASE("margin of a purely imaginary symbol at unit shift is 1", "[resolvent]") {
    Params p = gap_params(1024);
    Kernel H = assemble(p).H;
    double m = margin_of(C(1.0, 0.0), H, next_pow2(8 * H.len()));
    CHECK(m == Approx(1.0).margin(1e-9));
    CHECK(margin_of(C(0.0, 0.0), Kernel{}, 64) == 0.0);
}

TEST_CASE("margin helper enforces its transform-size floor", "[resolvent]") {
    Params p = gap_params(64);
    REQUIRE_THROWS_WITH(resolvent_set_margin(C(1.0, 0.0), p, 64),
                        Catch::Matchers::ContainsSubstring("8x"));
    Kernel H = assemble(p).H;
    double m = resolvent_set_margin(C(1.0, 0.0), p, next_pow2(8 * H.len()));
    CHECK(m == Approx(1.0).margin(1e-9));
}

TEST_CASE("resolvent rejects vanishing margins and bad transform sizes", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    REQUIRE_THROWS_WITH(resolvent_of(C(0.0, 0.0), H), Catch::Matchers::ContainsSubstring("margin"));
    REQUIRE_THROWS_WITH(resolvent_of(C(1.0, 0.0), H, 3000),
                        Catch::Matchers::ContainsSubstring("power of two"));
}

TEST_CASE("truncated series of order zero is the scaled identity", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    CKernel n0 = neumann_of(C(2.0, 0.0), H, 0);
    REQUIRE(n0.len() == 1);
    CHECK(n0.at(0) == C(0.5, 0.0));
    REQUIRE_THROWS_AS(neumann_of(C(0.0, 0.0), H, 3), ValidationError);
}

TEST_CASE("truncated series of order two matches the assembled three terms", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    const C lam(2.0, 0.0);
    CKernel n2 = neumann_of(lam, H, 2);
    C c0 = 1.0 / lam;
    C c1 = c0 * (-1.0 / lam);
    C c2 = c1 * (-1.0 / lam);
    CKernel ref = scaled(delta_kernel<C>(), c0);
    ref = add(ref, scaled(convolve(delta_kernel<C>(), H), c1));
    ref = add(ref, scaled(convolve(convolve(delta_kernel<C>(), H), H), c2));
    ref.trim();
    double scale = norm_sup(n2);
    CHECK(sup_diff(n2, ref) <= 1e-15 * scale);
}

TEST_CASE("series remainder after eight terms is geometrically small", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    double lam = 2.0 * op_norm(H);
    ResolventKernel r = resolvent_of(C(lam, 0.0), H);
    CKernel n8 = neumann_of(C(lam, 0.0), H, 8);
    double bound = std::pow(0.5, 9) / 0.5 / lam;
    CHECK(sup_diff(r.R, n8) <= bound * (1.0 + 1e-6) + 1e-12);
}

TEST_CASE("fit recovers an exact two-term combination", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    Kernel R = add(scaled(H, 3.0), delta_kernel(0, 2.0));
    ResolventExpansion e = fit_expansion(R, p);
    CHECK(std::abs(e.lambda_prime - C(2.0, 0.0)) <= 1e-10);
    CHECK(std::abs(e.beta - C(3.0, 0.0)) <= 1e-10);
    CHECK(std::abs(e.gamma) <= 1e-10);
    CHECK(norm_sup(e.residual) <= 1e-10 * norm_sup(to_complex(R)));
    CHECK(e.fit_gram_cond < 1e12);
    CHECK(e.fit_gram_cond >= 1.0);
}

TEST_CASE("fit recovers the coefficients of a truncated series", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    const C lam(2.0, 0.0);
    CKernel n2 = neumann_of(lam, H, 2);
    ResolventExpansion e = fit_expansion_against(n2, H, convolve(H, H), p);
    CHECK(std::abs(e.lambda_prime - C(0.5, 0.0)) <= 1e-10);
    CHECK(std::abs(e.beta - C(-0.25, 0.0)) <= 1e-10);
    CHECK(std::abs(e.gamma - C(0.125, 0.0)) <= 1e-10);
    CHECK(e.cz_norm_residual <= 1e-9);
}

TEST_CASE("fit reconstruction plus residual returns the input", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    Kernel H2 = convolve(H, H);
    ResolventKernel r = resolvent_kernel(C(1.0, 0.0), p);
    ResolventExpansion e = fit_expansion_against(r.R, H, H2, p);
    CKernel recon = delta_kernel<C>(0, e.lambda_prime);
    recon = add(recon, scaled(to_complex(H), e.beta));
    recon = add(recon, scaled(to_complex(H2), e.gamma));
    recon = add(recon, e.residual);
    CHECK(sup_diff(recon, r.R) <= 1e-12 * norm_sup(r.R));
    // Refitting the residual yields nothing new: it is orthogonal to the span.
    ResolventExpansion e2 = fit_expansion_against(e.residual, H, H2, p);
    double scale = std::max(norm_sup(r.R), 1.0);
    CHECK(std::abs(e2.lambda_prime) <= 1e-10 * scale);
    CHECK(std::abs(e2.beta) <= 1e-10 * scale);
    CHECK(std::abs(e2.gamma) <= 1e-10 * scale);
}

TEST_CASE("fit rejects a collinear basis naming the offending pair", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    ResolventKernel r = resolvent_kernel(C(1.0, 0.0), p);
    REQUIRE_THROWS_WITH(fit_expansion_against(r.R, H, H, p),
                        Catch::Matchers::ContainsSubstring("collinear"));
}

TEST_CASE("point extractor reads exact coefficients off a pure point mass", "[resolvent]") {
    Params p = gap_params(64);
    Kernel H = assemble(p).H;
    Kernel H2 = convolve(H, H);
    ResolventExpansion e = fit_expansion_against(delta_kernel<C>(0, C(2.0, 0.0)), H, H2, p);
    CHECK(e.gamma_pt == C(0.0, 0.0));
    CHECK(e.beta_pt == C(0.0, 0.0));
    CHECK(e.lambda_prime_pt == C(2.0, 0.0));
    CHECK(std::abs(e.lambda_prime - C(2.0, 0.0)) <= 1e-10);
}

TEST_CASE("element norm of a pure scalar is its modulus", "[resolvent]") {
    Params p = gap_params(64);
    AlgebraElement el = make_element(C(0.0, 3.0), C(0, 0), C(0, 0), CKernel{}, p);
    CHECK(el.a_norm == 3.0);
    CHECK(algebra_norm(el, p.omega) == 3.0);
}

TEST_CASE("element norm measures the residual kernel at its relabeled scale", "[resolvent]") {
    Params p = gap_params(64);
    CKernel K = add(delta_kernel<C>(1, C(1.0, 0.0)), delta_kernel<C>(-1, C(-1.0, 0.0)));
    AlgebraElement el = make_element(C(0, 0), C(0, 0), C(0, 0), K, p);
    Kernel two = add(delta_kernel(1, 1.0), delta_kernel(-1, -1.0));
    double expect = check_block(two, 4, p.omega).D_min;   // passthrough doubles the label
    CHECK(el.a_norm == Approx(expect));
    AlgebraElement big = make_element(C(0, 0), C(0, 0), C(0, 0), scaled(K, C(-2.5, 0.0)), p);
    CHECK(big.a_norm == Approx(2.5 * expect));
}

TEST_CASE("multiplying by the identity element preserves coefficients", "[resolvent]") {
    Params p = gap_params(64);
    AlgebraElement one = make_element(C(1.0, 0.0), C(0, 0), C(0, 0), CKernel{}, p);
    AlgebraElement b = make_element(C(0.5, 0.0), C(2.0, 0.0), C(-1.0, 0.0), CKernel{}, p);
    AlgebraElement ab = algebra_product(one, b, p);
    CHECK(std::abs(ab.lambda - b.lambda) <= 1e-9);
    CHECK(std::abs(ab.beta - b.beta) <= 1e-9);
    CHECK(std::abs(ab.gamma - b.gamma) <= 1e-9);
    CHECK(ab.a_norm == Approx(b.a_norm).epsilon(1e-6));
    CHECK(ab.product_ratio == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("squaring the pure first-order element lands on the second order", "[resolvent]") {
    Params p = gap_params(64);
    AlgebraElement h = make_element(C(0, 0), C(1.0, 0.0), C(0, 0), CKernel{}, p);
    AlgebraElement hh = algebra_product(h, h, p);
    CHECK(std::abs(hh.gamma - C(1.0, 0.0)) <= 1e-10);
    CHECK(std::abs(hh.lambda) <= 1e-10);
    CHECK(std::abs(hh.beta) <= 1e-10);
    Kernel H = assemble(p).H;
    CHECK(cz_norm(hh.profile.blocks.empty() ? std::vector<CZBlock>{} : hh.profile.blocks,
                  p.omega, true) <= 1e-9 * norm_l2(H));
}

TEST_CASE("sweep with a zero kernel coefficient inverts the scalar exactly", "[resolvent]") {
    Params p = gap_params(1024);
    SweepTable t = asymptotics_sweep(C(2.0, 0.0), C(0.0, 0.0), {1024}, p);
    REQUIRE(t.size() == 1);
    CHECK(t[0].margin_ok);
    CHECK(t[0].margin == 2.0);
    CHECK(std::abs(t[0].lambda_prime - C(0.5, 0.0)) <= 1e-12);
    CHECK(t[0].comb1 <= 1e-12);
    CHECK(t[0].comb2 <= 1e-12);
    CHECK(t[0].comb3 <= 1e-12);
}

TEST_CASE("sweep combinations are small in the series-dominated regime", "[resolvent]") {
    Params p = gap_params(1024);
    SweepTable t = asymptotics_sweep(C(10.0, 0.0), C(1.0, 0.0), {1024, 2048}, p);
    REQUIRE(t.size() == 2);
    for (const auto& row : t) {
        REQUIRE(row.margin_ok);
        CHECK(row.comb1 <= 0.01);
        CHECK(row.comb2 <= 0.01);
        CHECK(row.comb3 <= 0.01);
        CHECK(std::abs(row.lambda_prime - C(0.1, 0.0)) <= 0.01);
    }
}

TEST_CASE("sweep isolates margin failures instead of aborting", "[resolvent]") {
    Params p = gap_params(1024);
    SweepTable t = asymptotics_sweep(C(1e-6, 0.0), C(1.0, 0.0), {1024, 2048}, p);
    REQUIRE(t.size() == 2);
    for (const auto& row : t) {
        CHECK_FALSE(row.margin_ok);
        CHECK(row.margin < 1e-3);
        CHECK(row.comb1 == 0.0);   // row recorded, not computed
    }
}
