// Transform blocks, assembled operators, symbols, operator norms, and smooth
// truncations.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "rhlab/blocks.hpp"

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

Params full_params(long long M) {
    RawParams r;
    r.alpha = 1.5;
    r.delta = 0.05;
    r.M = M;
    r.mode = Mode::full;
    return validate(r);
}

} // namespace

TEST_CASE("blocks vanish at the origin and are exactly odd", "[blocks]") {
    Params p = gap_params(1024);
    for (long long s : {8LL, 32LL, 1024LL}) {
        Kernel B = block_kernel(s, p, false);
        CHECK(B.at(0) == 0.0);
        for (long long x = 1; x <= B.support_radius(); ++x)
            REQUIRE(B.at(-x) == -B.at(x));
    }
}

TEST_CASE("band block at scale 8 hits exactly the four expected sites", "[blocks]") {
    // At scale 8 the band bump is alive for m^1.5 in (4, 16), i.e. m = 3..6,
    // landing on integer parts 5, 8, 11, 14.
    Params p = gap_params(1024);
    Kernel B = block_kernel(8, p, false);
    std::vector<long long> sites;
    for (long long x = 1; x <= B.support_radius(); ++x)
        if (B.at(x) != 0.0) sites.push_back(x);
    REQUIRE(sites == std::vector<long long>{5, 8, 11, 14});
    CHECK(B.support_radius() >= 4);
    CHECK(B.support_radius() <= 16);

    // Independent enumeration over m with the public cutoff.
    Kernel oracle;
    oracle.base = -16;
    oracle.values.assign(33, 0.0);
    for (long long m = 1; m <= 10; ++m) {
        long double lm = static_cast<long double>(m);
        long double ma = lm * sqrtl(lm);
        double w = cutoff_wt(static_cast<double>(ma / 8.0L));
        if (w == 0.0) continue;
        long long x = static_cast<long long>(floorl(ma));
        double c = w / static_cast<double>(m);
        oracle.ref(x) += c;
        oracle.ref(-x) -= c;
    }
    for (long long x = -16; x <= 16; ++x) REQUIRE(B.at(x) == oracle.at(x));
    CHECK(B.at(8) == Approx(0.25));   // m = 4 sits on the bump plateau
}

TEST_CASE("lowest-scale block accumulates coincident integer parts", "[blocks]") {
    // With the plateau cutoff at scale 2, m = 1 lands on 1 and m = 2 on 2;
    // the small-m region exercises the first_scale branch.
    Params p = full_params(2);
    Kernel B = block_kernel(2, p, true);
    CHECK(B.at(1) == 1.0);   // w(1/2) = 1, weight 1/1
    double t2 = static_cast<double>(2.0L * sqrtl(2.0L)) / 2.0;
    CHECK(B.at(2) == Approx(cutoff_w(t2) / 2.0));
    CHECK(B.at(-1) == -B.at(1));
    CHECK(B.support_radius() == 2);
}

TEST_CASE("gap assembly splits into support-disjoint band parts", "[blocks]") {
    Params p = gap_params(1024);
    Assembly a = assemble(p);
    REQUIRE_FALSE(a.H.empty());
    REQUIRE_FALSE(a.Hminus.empty());
    REQUIRE_FALSE(a.Hplus.empty());
    CHECK(a.H.at(0) == 0.0);

    // The minus band is {32} (support inside (16, 64)); the plus band is
    // {1024} (support inside (512, 2048)). No site carries both.
    CHECK(a.Hminus.support_radius() < 64 + 1);
    CHECK(a.Hplus.support_radius() > 512);
    for (long long x = a.Hminus.lo(); x <= a.Hminus.hi(); ++x)
        if (a.Hminus.at(x) != 0.0) REQUIRE(a.Hplus.at(x) == 0.0);
    for (long long x = a.H.lo(); x <= a.H.hi(); ++x)
        REQUIRE(a.H.at(x) == a.Hminus.at(x) + a.Hplus.at(x));
}

TEST_CASE("full assembly at the smallest size is the single lowest block", "[blocks]") {
    Params p = full_params(2);
    Assembly a = assemble(p);
    CHECK(a.Hminus.empty());
    CHECK(a.Hplus.empty());
    Kernel B = block_kernel(2, p, true);
    REQUIRE(a.H.len() == B.len());
    for (long long x = B.lo(); x <= B.hi(); ++x) REQUIRE(a.H.at(x) == B.at(x));
}

TEST_CASE("symbol of the identity is 1 at every grid frequency", "[blocks]") {
    SymbolGrid g = symbol(delta_kernel(), 8);
    REQUIRE(g.N == 8);
    for (const auto& v : g.values) REQUIRE(std::abs(v - cplx(1.0, 0.0)) <= 1e-15);
}

TEST_CASE("assembled symbols vanish at frequency 0 and 1/2", "[blocks]") {
    Params p = gap_params(1024);
    Assembly a = assemble(p);
    double l1 = norm_l1(a.H);
    CHECK(std::abs(symbol_at(a.H, 0.0)) <= 1e-12 * l1);
    CHECK(std::abs(symbol_at(a.H, 0.5)) <= 1e-12 * l1);
}

TEST_CASE("odd real kernels have purely imaginary symbols", "[blocks]") {
    Params p = gap_params(64);
    Assembly a = assemble(p);
    double l1 = norm_l1(a.H);
    SymbolGrid g = symbol(a.H, next_pow2(4 * a.H.len()));
    for (const auto& v : g.values) REQUIRE(std::abs(v.real()) <= 1e-10 * l1);
}

TEST_CASE("symbols are multiplicative under convolution", "[blocks]") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Kernel K, L;
    K.base = -4;
    K.values.resize(11);
    L.base = 2;
    L.values.resize(7);
    for (auto& v : K.values) v = U(rng);
    for (auto& v : L.values) v = U(rng);
    Kernel KL = convolve(K, L);
    double scale = norm_l1(K) * norm_l1(L);
    for (double xi : {0.0, 0.1, 0.37, 0.5, 0.93})
        REQUIRE(std::abs(symbol_at(KL, xi) - symbol_at(K, xi) * symbol_at(L, xi)) <=
                1e-10 * scale);
}

TEST_CASE("symbol grids reject inadequate sizes", "[blocks]") {
    Kernel K;
    K.base = 0;
    K.values.assign(10, 1.0);
    REQUIRE_THROWS_AS(symbol(K, 32), std::invalid_argument);   // below 4x support
    REQUIRE_THROWS_AS(symbol(K, 48), std::invalid_argument);   // not a power of two
    CHECK_NOTHROW(symbol(K, 64));
}

TEST_CASE("operator norm of point masses and two-point differences", "[blocks]") {
    CHECK(op_norm(delta_kernel(0, 3.0)) == 3.0);
    CHECK(op_norm(delta_kernel(-17, -2.0)) == 2.0);
    Kernel D = add(delta_kernel(1, 1.0), delta_kernel(-1, -1.0));
    CHECK(op_norm(D) == Approx(2.0).epsilon(1e-12));   // |2 sin| peaks at 2
    CHECK(op_norm(Kernel{}) == 0.0);
}

TEST_CASE("operator norm is homogeneous and between the l2 and l1 norms", "[blocks]") {
    Params p = gap_params(1024);
    Assembly a = assemble(p);
    double n = op_norm(a.H);
    CHECK(n >= norm_l2(a.H) * (1.0 - 1e-12));
    CHECK(n <= norm_l1(a.H) * (1.0 + 1e-12));
    CHECK(op_norm(scaled(a.H, -2.5)) == Approx(2.5 * n).epsilon(1e-12));
}

TEST_CASE("cumulative truncation at a covering scale is the identity", "[blocks]") {
    Params p = gap_params(64);
    Assembly a = assemble(p);
    long long cover = 1;
    while (cover < 2 * a.H.support_radius()) cover <<= 1;
    Kernel T = truncate(a.H, cover, p, true);
    REQUIRE(T.len() == a.H.len());
    for (long long x = a.H.lo(); x <= a.H.hi(); ++x) REQUIRE(T.at(x) == a.H.at(x));
}

TEST_CASE("truncation kills mass far beyond its scale", "[blocks]") {
    Params p = gap_params(64);
    Kernel far = delta_kernel(3 * 32, 1.0);
    CHECK(truncate(far, 32, p, true).empty());
    CHECK(truncate(far, 32, p, false).empty());
    REQUIRE_THROWS_AS(truncate(far, 33, p, false), ValidationError);
}

TEST_CASE("truncation does not blow up the operator norm", "[blocks]") {
    Params p = gap_params(1024);
    Assembly a = assemble(p);
    double n = op_norm(a.H);
    for (long long s : {512LL, 1024LL, 2048LL}) {
        Kernel T = truncate(a.H, s, p, true);
        if (T.empty()) continue;
        CHECK(op_norm(T) <= 5.0 * n);
    }
}

TEST_CASE("first scale of the cutoff family is the lowest covering dyadic", "[blocks]") {
    CHECK(family_first_scale(full_params(1 << 14)) == 128);
    CHECK(family_first_scale(full_params(2)) == 2);
}
