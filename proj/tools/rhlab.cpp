// rhlab: command-line front end for the operator laboratory.
//
// Subcommands: build-kernel, check-cz, resolvent, algebra, sweep-weak,
// cz-decompose, rho-k, asymptotics. Parameters come from a key=value config
// file, overridable by flags; outputs (CSV tables, SVG charts, text reports,
// kernel dumps) land in --out together with a JSON manifest whose run id is
// a content hash of the effective configuration. Exit status is 0 only when
// every invariant asserted during the run held; on failure, staged outputs
// remain with a `.partial` suffix.

#include <chrono>
#include <complex>
#include <ctime>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rhlab/rhlab.hpp"

namespace {

using nlohmann::json;

struct Plan {
    std::string sub;
    rhlab::Params params;
    std::complex<double> lambda{1.0, 0.0};
    std::complex<double> beta{1.0, 0.0};
    std::string family = "h";
    std::vector<long long> M_list;
    int order = 8;
    double level = 0.1;          // stopping-time level for cz-decompose
    long long scale = 0;         // 0: subcommand-specific default
    long long s1 = 0, s2 = 0;    // 0: defaults to M
    double c_split = 8.0;
    double margin_tol = 1e-3;
    int cases = 20;
    unsigned long long seed = 12345;
    int jobs = 1;
    std::string out = "rhlab-out";
    std::string effective_config;   // canonical echo; hashed into the run id
};

std::complex<double> parse_complex(const std::string& s) {
    size_t comma = s.find(',');
    try {
        if (comma == std::string::npos) return {std::stod(s), 0.0};
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw rhlab::ValidationError("cannot parse complex value '" + s + "' (expected re[,im])");
    }
}

std::vector<long long> parse_m_list(const std::string& s) {
    std::vector<long long> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = rhlab::trim_copy(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(std::stoll(tok));
        } catch (const std::exception&) {
            throw rhlab::ValidationError("cannot parse M list entry '" + tok + "'");
        }
    }
    return out;
}

const std::set<std::string>& allowed_keys() {
    static const std::set<std::string> keys = {
        "alpha", "delta", "m",      "mode",  "omega", "gamma_resc", "lambda", "beta",
        "family", "m_list", "order", "level", "scale", "s1",        "s2",     "c_split",
        "margin_tol", "cases", "seed", "jobs", "out"};
    return keys;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Merge config file entries and flag overrides into a plan; every parameter
// runs through validation.
Plan build_plan(const std::string& sub, const std::string& config_path,
                const std::map<std::string, std::string>& flag_overrides) {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) {
        for (const auto& e : rhlab::parse_config_text(rhlab::read_text_file(config_path))) {
            std::string key = lower(e.key);
            if (!allowed_keys().count(key))
                throw rhlab::ValidationError("config line " + std::to_string(e.line) +
                                             ": unknown key '" + e.key + "'");
            kv[key] = e.value;
        }
    }
    for (const auto& [k, v] : flag_overrides) kv[k] = v;

    rhlab::RawParams raw;
    Plan plan;
    plan.sub = sub;
    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    try {
        if (auto v = take("alpha")) raw.alpha = std::stod(*v);
        if (auto v = take("delta")) raw.delta = std::stod(*v);
        if (auto v = take("m")) raw.M = std::stoll(*v);
        if (auto v = take("omega")) raw.omega = std::stod(*v);
        if (auto v = take("gamma_resc")) raw.gamma_resc = std::stod(*v);
        if (auto v = take("order")) plan.order = std::stoi(*v);
        if (auto v = take("level")) plan.level = std::stod(*v);
        if (auto v = take("scale")) plan.scale = std::stoll(*v);
        if (auto v = take("s1")) plan.s1 = std::stoll(*v);
        if (auto v = take("s2")) plan.s2 = std::stoll(*v);
        if (auto v = take("c_split")) plan.c_split = std::stod(*v);
        if (auto v = take("margin_tol")) plan.margin_tol = std::stod(*v);
        if (auto v = take("cases")) plan.cases = std::stoi(*v);
        if (auto v = take("seed")) plan.seed = std::stoull(*v);
        if (auto v = take("jobs")) plan.jobs = std::stoi(*v);
    } catch (const rhlab::ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw rhlab::ValidationError("config: malformed numeric value");
    }
    if (auto v = take("mode")) {
        std::string m = lower(*v);
        if (m == "gap") raw.mode = rhlab::Mode::gap;
        else if (m == "full") raw.mode = rhlab::Mode::full;
        else throw rhlab::ValidationError("mode must be 'full' or 'gap', got '" + *v + "'");
    }
    if (auto v = take("lambda")) plan.lambda = parse_complex(*v);
    if (auto v = take("beta")) plan.beta = parse_complex(*v);
    if (auto v = take("family")) plan.family = lower(*v);
    if (auto v = take("m_list")) plan.M_list = parse_m_list(*v);
    if (auto v = take("out")) plan.out = *v;
    plan.params = rhlab::validate(raw);
    if (plan.M_list.empty()) plan.M_list = {plan.params.M};
    for (size_t i = 1; i < plan.M_list.size(); ++i)
        if (plan.M_list[i] <= plan.M_list[i - 1])
            throw rhlab::ValidationError("m_list must be strictly increasing");
    if (plan.jobs < 1) throw rhlab::ValidationError("jobs must be at least 1");

    // Canonical effective-config echo: every field after defaults/overrides.
    std::ostringstream ec;
    ec << "subcommand = " << plan.sub << "\n";
    ec << "alpha = " << rhlab::fmt_g17(plan.params.alpha) << "\n";
    ec << "delta = " << rhlab::fmt_g17(plan.params.delta) << "\n";
    ec << "m = " << plan.params.M << "\n";
    ec << "mode = " << (plan.params.mode == rhlab::Mode::gap ? "gap" : "full") << "\n";
    ec << "omega = " << rhlab::fmt_g17(plan.params.omega) << "\n";
    ec << "gamma_resc = " << rhlab::fmt_g17(plan.params.gamma_resc) << "\n";
    ec << "lambda = " << rhlab::fmt_g17(plan.lambda.real()) << "," << rhlab::fmt_g17(plan.lambda.imag()) << "\n";
    ec << "beta = " << rhlab::fmt_g17(plan.beta.real()) << "," << rhlab::fmt_g17(plan.beta.imag()) << "\n";
    ec << "family = " << plan.family << "\n";
    ec << "m_list = ";
    for (size_t i = 0; i < plan.M_list.size(); ++i) ec << (i ? "," : "") << plan.M_list[i];
    ec << "\n";
    ec << "order = " << plan.order << "\n";
    ec << "level = " << rhlab::fmt_g17(plan.level) << "\n";
    ec << "scale = " << plan.scale << "\n";
    ec << "s1 = " << plan.s1 << "\n";
    ec << "s2 = " << plan.s2 << "\n";
    ec << "c_split = " << rhlab::fmt_g17(plan.c_split) << "\n";
    ec << "margin_tol = " << rhlab::fmt_g17(plan.margin_tol) << "\n";
    ec << "cases = " << plan.cases << "\n";
    ec << "seed = " << plan.seed << "\n";
    ec << "jobs = " << plan.jobs << "\n";
    plan.effective_config = ec.str();
    return plan;
}

std::string now_utc() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json config_json(const Plan& plan) {
    json cfg = json::object();
    std::istringstream in(plan.effective_config);
    std::string line;
    while (std::getline(in, line)) {
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        cfg[rhlab::trim_copy(line.substr(0, eq))] = rhlab::trim_copy(line.substr(eq + 1));
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Subcommand runners. Each appends artifacts to the output set and throws on
// any failed invariant.

void run_build_kernel(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    const rhlab::Params& p = plan.params;
    rhlab::Assembly a = rhlab::cached_assemble(p);
    // Structural invariants: vanishing at 0, odd symmetry, vanishing symbol
    // at frequencies 0 and 1/2.
    if (a.H.at(0) != 0.0) throw std::logic_error("kernel value at 0 must vanish");
    for (long long x = 1; x <= a.H.hi(); ++x)
        if (a.H.at(x) != -a.H.at(-x))
            throw std::logic_error("kernel must be odd (mismatch at x=" + std::to_string(x) + ")");
    double l1 = rhlab::norm_l1(a.H);
    double s0 = std::abs(rhlab::symbol_at(a.H, 0.0));
    double shalf = std::abs(rhlab::symbol_at(a.H, 0.5));
    if (s0 > 1e-12 * l1 || shalf > 1e-12 * l1)
        throw std::logic_error("symbol must vanish at frequencies 0 and 1/2");

    rhlab::Csv csv;
    csv.header = {"M", "mode", "scales", "l1", "l2", "sup", "support_radius", "op_norm"};
    rhlab::ScaleGrid scales = rhlab::scale_set(p);
    csv.add_row({std::to_string(p.M), p.mode == rhlab::Mode::gap ? "gap" : "full",
                 std::to_string(scales.scales.size()), rhlab::fmt_g17(l1),
                 rhlab::fmt_g17(rhlab::norm_l2(a.H)), rhlab::fmt_g17(rhlab::norm_sup(a.H)),
                 std::to_string(a.H.support_radius()), rhlab::fmt_g17(rhlab::op_norm(a.H))});
    out.add("kernel.csv", csv.to_string());
    out.add_kernel("h.kern", a.H);
    if (p.mode == rhlab::Mode::gap) {
        out.add_kernel("hminus.kern", a.Hminus);
        out.add_kernel("hplus.kern", a.Hplus);
    }
    std::ostringstream rep;
    rep << "kernel assembly\n";
    rep << "  M = " << p.M << ", mode = " << (p.mode == rhlab::Mode::gap ? "gap" : "full") << "\n";
    rep << "  scales:";
    for (long long s : scales.scales) rep << " " << s;
    rep << "\n  l1 = " << rhlab::fmt_g17(l1) << ", support radius = " << a.H.support_radius() << "\n";
    rep << "  symbol at 0: " << rhlab::fmt_g17(s0) << ", at 1/2: " << rhlab::fmt_g17(shalf)
        << " (both must vanish to 1e-12 relative)\n";
    summary += rep.str();
}

void run_check_cz(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    const rhlab::Params& p = plan.params;
    rhlab::ScaleGrid scales = rhlab::scale_set(p);
    rhlab::Csv csv;
    csv.header = {"scale", "block_scale", "D_iii", "D_iv", "D_min", "worst_h", "mean", "overhang"};
    bool all_pass = true;
    for (size_t i = 0; i < scales.scales.size(); ++i) {
        long long s = scales.scales[i];
        rhlab::Kernel B = rhlab::block_kernel(s, p, p.mode == rhlab::Mode::full && i == 0);
        rhlab::CZReport r = rhlab::check_block(B, 2 * s, p.omega);
        all_pass = all_pass && r.pass_i && r.pass_ii;
        csv.add_row({std::to_string(s), std::to_string(2 * s), rhlab::fmt_g17(r.D_iii),
                     rhlab::fmt_g17(r.D_iv), rhlab::fmt_g17(r.D_min), std::to_string(r.worst_h),
                     rhlab::fmt_g17(r.mean), rhlab::fmt_g17(r.overhang)});
    }
    out.add("blocks.csv", csv.to_string());
    if (!all_pass) throw std::logic_error("a family block failed the mean/support axioms");

    rhlab::Assembly a = rhlab::cached_assemble(p);
    rhlab::Kernel target = p.mode == rhlab::Mode::gap ? a.Hminus : a.H;
    rhlab::CZKernelProfile prof = rhlab::profile_kernel(target, scales.lowest(), p.omega);
    rhlab::Csv pcsv;
    pcsv.header = {"block_scale", "D", "mean_free"};
    for (const auto& b : prof.blocks)
        pcsv.add_row({std::to_string(b.scale), rhlab::fmt_g17(b.D), b.mean_free ? "1" : "0"});
    out.add("profile.csv", pcsv.to_string());

    std::ostringstream rep;
    rep << "building-block checks\n  per-scale blocks: " << scales.scales.size()
        << ", all mean-free with supports in [-2s, 2s]\n";
    rep << "  re-blocked profile of " << (p.mode == rhlab::Mode::gap ? "the low band" : "the kernel")
        << ": " << prof.blocks.size() << " blocks, family norm " << rhlab::fmt_g17(prof.cz_norm) << "\n";
    if (p.mode == rhlab::Mode::gap) {
        rhlab::Csv ccsv;
        ccsv.header = {"s", "norm_sq", "norm_sq_s15"};
        for (long long s : rhlab::plus_band(p).scales) {
            rhlab::CommutatorResult c = rhlab::commutator(s, p);
            ccsv.add_row({std::to_string(s), rhlab::fmt_g17(c.norm_sq),
                          rhlab::fmt_g17(c.bound_const)});
        }
        out.add("commutator.csv", ccsv.to_string());
        rep << "  commutator rows written for the high band\n";
    }
    summary += rep.str();
}

void run_resolvent(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    const rhlab::Params& p = plan.params;
    rhlab::Kernel H = rhlab::cached_assemble(p).H;
    rhlab::CKernel opk = rhlab::scaled(rhlab::to_complex(H), plan.beta);
    opk.trim();
    rhlab::ResolventKernel rk = rhlab::resolvent_of(plan.lambda, opk, 0, plan.margin_tol);
    // Defining identity (lambda delta_0 + beta H) * R = delta_0.
    rhlab::CKernel ident = rhlab::convolve(opk, rk.R);
    ident = rhlab::add(ident, rhlab::scaled(rk.R, plan.lambda));
    double worst = 0.0;
    for (long long x = ident.lo(); x <= ident.hi(); ++x) {
        std::complex<double> want = x == 0 ? std::complex<double>(1.0, 0.0)
                                           : std::complex<double>(0.0, 0.0);
        worst = std::max(worst, std::abs(ident.at(x) - want));
    }
    if (worst > 1e-8)
        throw std::logic_error("resolvent identity failed: max deviation " + rhlab::fmt_g17(worst));

    rhlab::Kernel H2 = rhlab::convolve(H, H);
    rhlab::ResolventExpansion e = rhlab::fit_expansion_against(rk.R, H, H2, p);
    // Reconstruction invariant of the expansion.
    rhlab::CKernel recon = rhlab::add(rhlab::scaled(rhlab::to_complex(H), e.beta),
                                      rhlab::scaled(rhlab::to_complex(H2), e.gamma));
    recon = rhlab::add(recon, rhlab::delta_kernel<std::complex<double>>(0, e.lambda_prime));
    recon = rhlab::add(recon, e.residual);
    double rmax = 0.0, rden = 0.0;
    for (long long x = rk.R.lo(); x <= rk.R.hi(); ++x) {
        rmax = std::max(rmax, std::abs(recon.at(x) - rk.R.at(x)));
        rden = std::max(rden, std::abs(rk.R.at(x)));
    }
    if (rmax > 1e-9 * rden)
        throw std::logic_error("expansion reconstruction failed: " + rhlab::fmt_g17(rmax));

    double comb1 = std::abs(plan.lambda * e.lambda_prime - 1.0);
    double comb2 = std::abs(plan.beta * e.lambda_prime + e.beta * plan.lambda);
    double comb3 = std::abs(plan.lambda * e.gamma + plan.beta * e.beta);
    rhlab::Csv csv;
    csv.header = {"M", "lambda_prime_re", "lambda_prime_im", "beta_re", "beta_im",
                  "gamma_re", "gamma_im", "cz_norm_residual", "margin", "comb1", "comb2", "comb3"};
    csv.add_row({std::to_string(p.M), rhlab::fmt_g17(e.lambda_prime.real()),
                 rhlab::fmt_g17(e.lambda_prime.imag()), rhlab::fmt_g17(e.beta.real()),
                 rhlab::fmt_g17(e.beta.imag()), rhlab::fmt_g17(e.gamma.real()),
                 rhlab::fmt_g17(e.gamma.imag()), rhlab::fmt_g17(e.cz_norm_residual),
                 rhlab::fmt_g17(rk.margin), rhlab::fmt_g17(comb1), rhlab::fmt_g17(comb2),
                 rhlab::fmt_g17(comb3)});
    out.add("expansion.csv", csv.to_string());

    std::ostringstream rep;
    rep << "resolvent of lambda*I + beta*H\n";
    rep << "  lambda = " << rhlab::fmt_g17(plan.lambda.real()) << (plan.lambda.imag() != 0 ? "+i*..." : "")
        << ", margin = " << rhlab::fmt_g17(rk.margin) << ", transform size = " << rk.N << "\n";
    rep << "  aliasing deviation = " << rhlab::fmt_g17(rk.aliasing_err)
        << ", truncated mass = " << rhlab::fmt_g17(rk.truncated_mass) << "\n";
    rep << "  identity deviation = " << rhlab::fmt_g17(worst) << " (must be <= 1e-8)\n";
    rep << "  least-squares coefficients: lambda' = " << rhlab::fmt_g17(e.lambda_prime.real())
        << ", beta = " << rhlab::fmt_g17(e.beta.real()) << ", gamma = "
        << rhlab::fmt_g17(e.gamma.real()) << "\n";
    rep << "  point-matching cross-check: lambda' = " << rhlab::fmt_g17(e.lambda_prime_pt.real())
        << ", beta = " << rhlab::fmt_g17(e.beta_pt.real()) << ", gamma = "
        << rhlab::fmt_g17(e.gamma_pt.real()) << "\n";
    rep << "  residual family norm = " << rhlab::fmt_g17(e.cz_norm_residual)
        << " over " << e.residual_profile.blocks.size() << " blocks, Gram condition = "
        << rhlab::fmt_g17(e.fit_gram_cond) << "\n";
    summary += rep.str();
}

void run_algebra(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    const rhlab::Params& p = plan.params;
    rhlab::Kernel H = rhlab::cached_assemble(p).H;
    rhlab::Kernel H2 = rhlab::convolve(H, H);
    // Base residual kernel for the random elements: the fitted remainder of
    // an actual resolvent, rescaled randomly per element.
    rhlab::ResolventKernel rk = rhlab::resolvent_of(plan.lambda, H, 0, plan.margin_tol);
    rhlab::ResolventExpansion base = rhlab::fit_expansion_against(rk.R, H, H2, p);

    std::mt19937_64 rng(plan.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto random_element = [&]() {
        std::complex<double> l(U(rng), 0.0), b(U(rng), 0.0), g(U(rng), 0.0);
        rhlab::CKernel K = rhlab::scaled(base.residual, std::complex<double>(U(rng), 0.0));
        return rhlab::make_element(l, b, g, K, p);
    };
    rhlab::Csv csv;
    csv.header = {"case", "norm_a", "norm_b", "norm_product", "ratio"};
    double worst_ratio = 0.0;
    for (int c = 0; c < plan.cases; ++c) {
        rhlab::AlgebraElement A = random_element(), B = random_element();
        rhlab::AlgebraElement prod = rhlab::algebra_product(A, B, p);
        // Stored-norm consistency.
        if (std::fabs(rhlab::algebra_norm(prod, p.omega) - prod.a_norm) >
            1e-9 * std::max(1.0, prod.a_norm))
            throw std::logic_error("algebra norm recompute mismatch");
        worst_ratio = std::max(worst_ratio, prod.product_ratio);
        csv.add_row({std::to_string(c), rhlab::fmt_g17(A.a_norm), rhlab::fmt_g17(B.a_norm),
                     rhlab::fmt_g17(prod.a_norm), rhlab::fmt_g17(prod.product_ratio)});
    }
    out.add("algebra.csv", csv.to_string());
    std::ostringstream rep;
    rep << "algebra products (" << plan.cases << " seeded cases, seed " << plan.seed << ")\n";
    rep << "  worst norm ratio ||ab|| / (||a|| ||b||) = " << rhlab::fmt_g17(worst_ratio) << "\n";
    summary += rep.str();
}

void run_sweep_weak(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    rhlab::WeakFamily fam = rhlab::parse_family(plan.family);
    rhlab::WeakTable table = rhlab::weak_sweep(fam, plan.lambda, plan.params, plan.M_list,
                                               plan.margin_tol);
    rhlab::Csv csv;
    csv.header = {"M", "family", "weak_l1", "l1", "l2", "support_radius"};
    rhlab::ChartSeries series;
    series.label = std::string("weak-l1 of ") + rhlab::family_name(fam);
    bool all_ok = true;
    for (const auto& r : table) {
        all_ok = all_ok && r.ok;
        csv.add_row({std::to_string(r.M), r.family, rhlab::fmt_g17(r.weak_l1),
                     rhlab::fmt_g17(r.l1), rhlab::fmt_g17(r.l2), std::to_string(r.support_radius)});
        if (r.ok) {
            series.x.push_back(static_cast<double>(r.M));
            series.y.push_back(r.weak_l1);
        }
    }
    out.add("weak_sweep.csv", csv.to_string());
    out.add("weak_sweep.svg",
            rhlab::svg_line_chart(std::string("weak-l1 across M: ") + rhlab::family_name(fam),
                                  {series}, true, "M", "weak-l1"));
    if (!all_ok) throw std::logic_error("a sweep row failed; see weak_sweep.csv");
    std::ostringstream rep;
    double wmin = 1e300, wmax = 0.0;
    for (const auto& r : table) {
        wmin = std::min(wmin, r.weak_l1);
        wmax = std::max(wmax, r.weak_l1);
    }
    rep << "weak-type sweep, family " << rhlab::family_name(fam) << ", " << table.size()
        << " rows\n  weak-l1 range [" << rhlab::fmt_g17(wmin) << ", " << rhlab::fmt_g17(wmax)
        << "], max/min = " << rhlab::fmt_g17(wmax / wmin) << "\n";
    summary += rep.str();
}

void run_cz_decompose(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    const rhlab::Params& p = plan.params;
    rhlab::Kernel f;
    rhlab::WeakFamily fam = rhlab::parse_family(plan.family);
    rhlab::Kernel H = rhlab::cached_assemble(p).H;
    if (fam == rhlab::WeakFamily::H) f = H;
    else if (fam == rhlab::WeakFamily::Hsquared) f = rhlab::convolve(H, H);
    else {
        rhlab::ResolventKernel rk = rhlab::resolvent_of(plan.lambda, H, 0, plan.margin_tol);
        rhlab::ResolventExpansion e = rhlab::fit_expansion_against(rk.R, H, rhlab::convolve(H, H), p);
        f = rhlab::real_part(e.residual);
        f.trim();
    }
    long long s = plan.scale > 0 ? plan.scale : p.M;
    rhlab::CZDecomposition d = rhlab::cz_decompose(f, plan.level, s, p);

    rhlab::Csv cubes;
    cubes.header = {"start", "len", "avg"};
    for (const auto& q : d.cubes) {
        double avg = 0.0;
        for (long long x = q.start; x < q.end(); ++x) avg += std::fabs(f.at(x));
        avg /= static_cast<double>(q.len);
        cubes.add_row({std::to_string(q.start), std::to_string(q.len), rhlab::fmt_g17(avg)});
    }
    out.add("cubes.csv", cubes.to_string());
    rhlab::Csv parts;
    parts.header = {"part", "k", "l1"};
    auto part_rows = [&](const char* name, const std::map<int, rhlab::Kernel>& m) {
        for (const auto& [k, ker] : m)
            parts.add_row({name, std::to_string(k), rhlab::fmt_g17(rhlab::norm_l1(ker))});
    };
    part_rows("b", d.b_parts);
    part_rows("B", d.B_parts);
    part_rows("E", d.E_parts);
    out.add("parts.csv", parts.to_string());

    std::ostringstream rep;
    rep << "stopping-time decomposition at level " << rhlab::fmt_g17(plan.level) << ", scale " << s
        << "\n  input: " << rhlab::family_name(fam) << " at M = " << p.M << ", l1 = "
        << rhlab::fmt_g17(rhlab::norm_l1(f)) << "\n";
    rep << "  cubes: " << d.cubes.size() << ", parent mass = " << rhlab::fmt_g17(d.parent_mass)
        << " (bound 2*l1/level = " << rhlab::fmt_g17(2.0 * rhlab::norm_l1(f) / plan.level) << ")\n";
    rep << "  off-cube part bounded by the level; per-cube mean-free constant C = "
        << rhlab::fmt_g17(d.mean_free_C) << "\n";
    rep << "  height threshold level*s^(1/alpha) = " << rhlab::fmt_g17(d.height_threshold) << "\n";
    summary += rep.str();
}

void run_rho_k(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    const rhlab::Params& p = plan.params;
    long long s1 = plan.s1 > 0 ? plan.s1 : p.M;
    long long s2 = plan.s2 > 0 ? plan.s2 : p.M;
    rhlab::RhoKSplit r = rhlab::rho_k_split(s1, s2, p, plan.c_split);
    rhlab::Csv csv;
    csv.header = {"s1", "s2", "diag", "window", "sup_rho", "sup_rho_s2", "sup_k_s2",
                  "supp_const", "hoelder_D", "zeroed_mass"};
    csv.add_row({std::to_string(s1), std::to_string(s2), rhlab::fmt_g17(r.diag),
                 rhlab::fmt_g17(r.window), rhlab::fmt_g17(r.sup_rho), rhlab::fmt_g17(r.sup_rho_s2),
                 rhlab::fmt_g17(r.sup_k_s2), rhlab::fmt_g17(r.supp_const),
                 rhlab::fmt_g17(r.hoelder_D), rhlab::fmt_g17(r.zeroed_mass)});
    out.add("rho_k.csv", csv.to_string());
    std::ostringstream rep;
    rep << "near/far split of the block product at (s1, s2) = (" << s1 << ", " << s2 << ")\n";
    rep << "  diagonal mass = " << rhlab::fmt_g17(r.diag) << ", split window = "
        << rhlab::fmt_g17(r.window) << "\n";
    rep << "  far part: sup = " << rhlab::fmt_g17(r.sup_rho) << ", sup*s2 = "
        << rhlab::fmt_g17(r.sup_rho_s2) << ", support/s2 = " << rhlab::fmt_g17(r.supp_const) << "\n";
    rep << "  near part: sup*s2 = " << rhlab::fmt_g17(r.sup_k_s2) << ", floored mass = "
        << rhlab::fmt_g17(r.zeroed_mass) << "\n";
    summary += rep.str();
}

void run_asymptotics(const Plan& plan, rhlab::OutputSet& out, std::string& summary) {
    rhlab::SweepTable table = rhlab::asymptotics_sweep(plan.lambda, plan.beta, plan.M_list,
                                                       plan.params, plan.margin_tol);
    rhlab::Csv csv;
    csv.header = {"M", "lambda_prime_re", "lambda_prime_im", "beta_re", "beta_im",
                  "gamma_re", "gamma_im", "cz_norm_residual", "margin", "comb1", "comb2", "comb3"};
    rhlab::ChartSeries c1{"comb1", {}, {}}, c2{"comb2", {}, {}}, c3{"comb3", {}, {}};
    bool all_ok = true;
    for (const auto& r : table) {
        all_ok = all_ok && r.margin_ok;
        csv.add_row({std::to_string(r.M), rhlab::fmt_g17(r.lambda_prime.real()),
                     rhlab::fmt_g17(r.lambda_prime.imag()), rhlab::fmt_g17(r.beta.real()),
                     rhlab::fmt_g17(r.beta.imag()), rhlab::fmt_g17(r.gamma.real()),
                     rhlab::fmt_g17(r.gamma.imag()), rhlab::fmt_g17(r.cz_norm_residual),
                     rhlab::fmt_g17(r.margin),
                     r.margin_ok ? rhlab::fmt_g17(r.comb1) : "margin_failure",
                     r.margin_ok ? rhlab::fmt_g17(r.comb2) : "margin_failure",
                     r.margin_ok ? rhlab::fmt_g17(r.comb3) : "margin_failure"});
        if (r.margin_ok) {
            double M = static_cast<double>(r.M);
            c1.x.push_back(M); c1.y.push_back(r.comb1);
            c2.x.push_back(M); c2.y.push_back(r.comb2);
            c3.x.push_back(M); c3.y.push_back(r.comb3);
        }
    }
    out.add("asymptotics.csv", csv.to_string());
    out.add("asymptotics.svg",
            rhlab::svg_line_chart("expansion-coefficient combinations across M", {c1, c2, c3},
                                  true, "M", "|combination|"));
    std::ostringstream rep;
    rep << "coefficient asymptotics across " << table.size() << " values of M"
        << (all_ok ? "" : " (some rows hit margin failures; marked in the CSV)") << "\n";
    if (!table.empty() && table.front().margin_ok && table.back().margin_ok) {
        rep << "  comb1: " << rhlab::fmt_g17(table.front().comb1) << " -> "
            << rhlab::fmt_g17(table.back().comb1) << "\n";
        rep << "  comb2: " << rhlab::fmt_g17(table.front().comb2) << " -> "
            << rhlab::fmt_g17(table.back().comb2) << "\n";
        rep << "  comb3: " << rhlab::fmt_g17(table.front().comb3) << " -> "
            << rhlab::fmt_g17(table.back().comb3) << "\n";
    }
    summary += rep.str();
}

int run(const Plan& plan) {
    std::string started = now_utc();
    rhlab::OutputSet out(plan.out);
    std::string summary;
    try {
        if (plan.sub == "build-kernel") run_build_kernel(plan, out, summary);
        else if (plan.sub == "check-cz") run_check_cz(plan, out, summary);
        else if (plan.sub == "resolvent") run_resolvent(plan, out, summary);
        else if (plan.sub == "algebra") run_algebra(plan, out, summary);
        else if (plan.sub == "sweep-weak") run_sweep_weak(plan, out, summary);
        else if (plan.sub == "cz-decompose") run_cz_decompose(plan, out, summary);
        else if (plan.sub == "rho-k") run_rho_k(plan, out, summary);
        else if (plan.sub == "asymptotics") run_asymptotics(plan, out, summary);
        else throw rhlab::ValidationError("unknown subcommand: " + plan.sub);
    } catch (const std::exception& ex) {
        std::cerr << "rhlab: " << plan.sub << " failed: " << ex.what() << "\n"
                  << "rhlab: partial outputs (if any) retained under " << plan.out
                  << " with a .partial suffix\n";
        return 1;
    }
    out.add("report.txt", summary);
    std::vector<std::string> artifacts = out.finalize();
    json manifest;
    manifest["run_id"] = rhlab::run_id_of(plan.effective_config);
    manifest["code_version"] = rhlab::kCodeVersion;
    manifest["subcommand"] = plan.sub;
    manifest["config"] = config_json(plan);
    manifest["started"] = started;
    manifest["finished"] = now_utc();
    manifest["artifacts"] = artifacts;
    rhlab::write_text_file(
        (std::filesystem::path(plan.out) / "manifest.json").string(), manifest.dump(2) + "\n");
    std::cout << summary;
    std::cout << "run " << manifest["run_id"].get<std::string>() << " complete; outputs in "
              << plan.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"operator laboratory for rough truncated Hilbert-transform kernels"};
    app.require_subcommand(1);
    std::string config_path;
    std::map<std::string, std::string> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        auto opt = [&, sub](const char* flag, const char* key, const char* help) {
            sub->add_option_function<std::string>(
                flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
        };
        opt("--M", "m", "truncation level (positive integer)");
        opt("--alpha", "alpha", "exponent alpha > 1");
        opt("--delta", "delta", "band-width parameter delta > 0");
        opt("--mode", "mode", "scale selection: full or gap");
        opt("--lambda", "lambda", "spectral parameter re[,im]");
        opt("--beta", "beta", "kernel coefficient re[,im]");
        opt("--out", "out", "output directory");
        opt("--jobs", "jobs", "worker limit for sweep rows");
        opt("--seed", "seed", "seed for randomized suites");
        opt("--family", "family", "kernel family: h, hsq, or residual");
        opt("--m-list", "m_list", "comma-separated ascending M values");
        opt("--order", "order", "series order for cross-checks");
        opt("--level", "level", "stopping-time level");
        opt("--scale", "scale", "decomposition scale s");
        opt("--s1", "s1", "first block scale");
        opt("--s2", "s2", "second block scale");
    };
    const char* subs[] = {"build-kernel", "check-cz", "resolvent", "algebra",
                          "sweep-weak", "cz-decompose", "rho-k", "asymptotics"};
    const char* helps[] = {
        "assemble the operator kernel and verify structural zeros",
        "measure building-block constants and re-blocked profiles",
        "invert lambda*I + beta*H and fit the three-term expansion",
        "randomized algebra-product norm accounting",
        "weak-l1 quasinorms across an M sweep",
        "dyadic stopping-time decomposition with invariant verification",
        "near/far split of a product of two blocks",
        "expansion-coefficient trends across an M sweep"};
    for (size_t i = 0; i < 8; ++i) add_common(app.add_subcommand(subs[i], helps[i]));
    CLI11_PARSE(app, argc, argv);
    std::string sub = app.get_subcommands().front()->get_name();
    try {
        Plan plan = build_plan(sub, config_path, overrides);
        return run(plan);
    } catch (const std::exception& ex) {
        std::cerr << "rhlab: " << ex.what() << "\n";
        return 1;
    }
}
