#pragma once

// Finite-support kernels on the integers: the universal currency of the lab.
// A kernel stores a dense window [base, base+len) of values; everything else
// is zero. Real kernels are the common case; the resolvent path uses the
// complex instantiation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhlab/fft.hpp"
#include "rhlab/params.hpp"

namespace rhlab {

template <class T>
struct BasicKernel {
    long long base = 0;          // index of the first stored value
    std::vector<T> values;       // dense over [base, base + size())

    long long lo() const { return base; }
    long long hi() const { return base + static_cast<long long>(values.size()) - 1; }
    size_t len() const { return values.size(); }
    bool empty() const { return values.empty(); }

    T at(long long x) const {
        long long i = x - base;
        if (i < 0 || i >= static_cast<long long>(values.size())) return T(0);
        return values[static_cast<size_t>(i)];
    }

    T& ref(long long x) {
        long long i = x - base;
        return values.at(static_cast<size_t>(i));
    }

    // Largest |x| with a stored (possibly zero) value.
    long long support_radius() const {
        if (empty()) return 0;
        return std::max(std::llabs(lo()), std::llabs(hi()));
    }

    // Drop exact zeros at both ends so the window ends at true support.
    void trim() {
        size_t a = 0, b = values.size();
        while (a < b && values[a] == T(0)) ++a;
        while (b > a && values[b - 1] == T(0)) --b;
        if (a == b) { base = 0; values.clear(); return; }
        base += static_cast<long long>(a);
        values.erase(values.begin() + b, values.end());
        values.erase(values.begin(), values.begin() + a);
    }
};

using Kernel = BasicKernel<double>;
using CKernel = BasicKernel<std::complex<double>>;

inline double abs2(double v) { return v * v; }
inline double abs2(const std::complex<double>& v) { return std::norm(v); }

template <class T>
double norm_l1(const BasicKernel<T>& k) {
    double s = 0.0;
    for (const auto& v : k.values) s += std::abs(v);
    return s;
}

template <class T>
double norm_l2sq(const BasicKernel<T>& k) {
    double s = 0.0;
    for (const auto& v : k.values) s += abs2(v);
    return s;
}

template <class T>
double norm_l2(const BasicKernel<T>& k) { return std::sqrt(norm_l2sq(k)); }

template <class T>
double norm_sup(const BasicKernel<T>& k) {
    double s = 0.0;
    for (const auto& v : k.values) s = std::max(s, std::abs(v));
    return s;
}

// Kahan-compensated: mass sums feed mean-freeness invariants with tolerances
// near machine precision, and plain summation over multi-million-point
// kernels loses more digits than those invariants allow.
template <class T>
T total_mass(const BasicKernel<T>& k) {
    T s = T(0), c = T(0);
    for (const auto& v : k.values) {
        T y = v - c;
        T t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

// Point mass c*delta_a.
template <class T = double>
BasicKernel<T> delta_kernel(long long a = 0, T c = T(1)) {
    BasicKernel<T> k;
    k.base = a;
    k.values = {c};
    return k;
}

template <class T>
BasicKernel<T> scaled(BasicKernel<T> k, T c) {
    for (auto& v : k.values) v *= c;
    return k;
}

// Pointwise sum over the union window.
template <class T>
BasicKernel<T> add(const BasicKernel<T>& a, const BasicKernel<T>& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    long long lo = std::min(a.lo(), b.lo()), hi = std::max(a.hi(), b.hi());
    BasicKernel<T> r;
    r.base = lo;
    r.values.assign(static_cast<size_t>(hi - lo + 1), T(0));
    for (long long x = a.lo(); x <= a.hi(); ++x) r.ref(x) += a.at(x);
    for (long long x = b.lo(); x <= b.hi(); ++x) r.ref(x) += b.at(x);
    return r;
}

// Single value of (K*L)(x) by direct summation: exact, O(overlap).
template <class T, class U>
auto convolve_at(const BasicKernel<T>& K, const BasicKernel<U>& L, long long x)
    -> decltype(T() * U()) {
    using R = decltype(T() * U());
    R s = R(0);
    long long ylo = std::max(K.lo(), x - L.hi());
    long long yhi = std::min(K.hi(), x - L.lo());
    for (long long y = ylo; y <= yhi; ++y) s += K.at(y) * L.at(x - y);
    return s;
}

namespace detail {

template <class T, class U>
auto convolve_direct(const BasicKernel<T>& K, const BasicKernel<U>& L)
    -> BasicKernel<decltype(T() * U())> {
    using R = decltype(T() * U());
    BasicKernel<R> r;
    r.base = K.lo() + L.lo();
    r.values.assign(K.len() + L.len() - 1, R(0));
    for (size_t i = 0; i < K.len(); ++i) {
        const T kv = K.values[i];
        if (kv == T(0)) continue;
        for (size_t j = 0; j < L.len(); ++j)
            r.values[i + j] += kv * L.values[j];
    }
    return r;
}

inline void load_padded(std::vector<cplx>& buf, const Kernel& k) {
    for (size_t i = 0; i < k.len(); ++i) buf[i] = cplx(k.values[i], 0.0);
}
inline void load_padded(std::vector<cplx>& buf, const CKernel& k) {
    for (size_t i = 0; i < k.len(); ++i) buf[i] = k.values[i];
}

inline void store_result(std::vector<double>& out, const std::vector<cplx>& buf) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real();
}
inline void store_result(std::vector<std::complex<double>>& out, const std::vector<cplx>& buf) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = buf[i];
}

template <class T, class U>
auto convolve_fft(const BasicKernel<T>& K, const BasicKernel<U>& L)
    -> BasicKernel<decltype(T() * U())> {
    using R = decltype(T() * U());
    const size_t out_len = K.len() + L.len() - 1;
    const size_t N = next_pow2(out_len);  // padding >= lenK+lenL-1: no wraparound
    std::vector<cplx> fa(N, cplx(0, 0)), fb(N, cplx(0, 0));
    load_padded(fa, K);
    load_padded(fb, L);
    fft(fa);
    fft(fb);
    for (size_t i = 0; i < N; ++i) fa[i] *= fb[i];
    ifft(fa);
    BasicKernel<R> r;
    r.base = K.lo() + L.lo();
    r.values.assign(out_len, R(0));
    store_result(r.values, fa);
    return r;
}

} // namespace detail

// Exact linear convolution. Direct summation when the shorter factor has at
// most 64 points (the always-available oracle path), padded FFT otherwise.
template <class T, class U>
auto convolve(const BasicKernel<T>& K, const BasicKernel<U>& L)
    -> BasicKernel<decltype(T() * U())> {
    using R = decltype(T() * U());
    if (K.empty() || L.empty()) return BasicKernel<R>{};
    long long pts = static_cast<long long>(K.len()) + static_cast<long long>(L.len()) - 1;
    check_window_points(pts);
    if (std::min(K.len(), L.len()) <= 64) return detail::convolve_direct(K, L);
    return detail::convolve_fft(K, L);
}

// Operator action on a finitely supported sequence: same machinery.
template <class T, class U>
auto apply(const BasicKernel<T>& K, const BasicKernel<U>& f) {
    return convolve(K, f);
}

// ---------------------------------------------------------------------------
// Text serialization: header line `# base=<int> len=<int>`, one value/line.

inline void write_kernel_text(const Kernel& k, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "# base=" << k.base << " len=" << k.len() << "\n";
    char buf[64];
    for (double v : k.values) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        os << buf;
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline Kernel read_kernel_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::string header;
    std::getline(is, header);
    long long base = 0, len = -1;
    if (std::sscanf(header.c_str(), "# base=%lld len=%lld", &base, &len) != 2 || len < 0)
        throw std::runtime_error("malformed kernel header in " + path + ": " + header);
    Kernel k;
    k.base = base;
    k.values.reserve(static_cast<size_t>(len));
    double v;
    while (is >> v) k.values.push_back(v);
    if (static_cast<long long>(k.values.size()) != len)
        throw std::runtime_error("kernel length mismatch in " + path + ": header says " +
                                 std::to_string(len) + ", file has " +
                                 std::to_string(k.values.size()));
    return k;
}

} // namespace rhlab
