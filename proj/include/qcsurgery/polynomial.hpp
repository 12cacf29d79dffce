#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "core.hpp"

namespace qcs {

namespace detail {

// error-free transforms on doubles
inline void two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    double bb = s - a;
    e = (a - (s - bb)) + (b - bb);
}

inline void two_prod(double a, double b, double& p, double& e) {
    p = a * b;
    e = std::fma(a, b, -p);
}

// a*b = p + e exactly up to the rounding of the tiny correction terms
inline void two_prod_c(cplx a, cplx b, cplx& p, cplx& e) {
    double p1, e1, p2, e2, p3, e3, p4, e4, re, er, im, ei;
    two_prod(a.real(), b.real(), p1, e1);
    two_prod(a.imag(), b.imag(), p2, e2);
    two_prod(a.real(), b.imag(), p3, e3);
    two_prod(a.imag(), b.real(), p4, e4);
    two_sum(p1, -p2, re, er);
    two_sum(p3, p4, im, ei);
    p = {re, im};
    e = {e1 - e2 + er, e3 + e4 + ei};
}

inline void two_sum_c(cplx a, cplx b, cplx& s, cplx& e) {
    double sr, er, si, ei;
    two_sum(a.real(), b.real(), sr, er);
    two_sum(a.imag(), b.imag(), si, ei);
    s = {sr, si};
    e = {er, ei};
}

}  // namespace detail

// Coefficients in ascending degree order; trailing zeros are trimmed so the
// leading coefficient is nonzero (the zero polynomial keeps one entry).
class Polynomial {
public:
    Polynomial() : c_{cplx(0)} {}
    Polynomial(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { trim(); }
    Polynomial(std::initializer_list<cplx> coeffs) : c_(coeffs) { trim(); }

    static Polynomial constant(cplx a) { return Polynomial(std::vector<cplx>{a}); }
    static Polynomial identity() { return Polynomial(std::vector<cplx>{0.0, 1.0}); }

    int degree() const { return static_cast<int>(c_.size()) - 1; }
    bool is_zero() const { return c_.size() == 1 && c_[0] == cplx(0); }
    cplx leading() const { return c_.back(); }
    const std::vector<cplx>& coeffs() const { return c_; }
    cplx operator[](int k) const { return k <= degree() ? c_[k] : cplx(0); }

    // compensated Horner
    cplx operator()(cplx z) const {
        cplx s = c_.back(), comp = 0;
        for (int k = degree() - 1; k >= 0; --k) {
            cplx p, pe, se;
            detail::two_prod_c(s, z, p, pe);
            detail::two_sum_c(p, c_[k], s, se);
            comp = comp * z + (pe + se);
        }
        return s + comp;
    }

    // sum |a_k| |z|^k, the natural scale for backward-error tests
    double magnitude(cplx z) const {
        double r = std::abs(z), acc = 0;
        for (int k = degree(); k >= 0; --k) acc = acc * r + std::abs(c_[k]);
        return acc;
    }

    void eval_with_derivative(cplx z, cplx& p, cplx& dp) const {
        p = c_.back();
        dp = 0;
        for (int k = degree() - 1; k >= 0; --k) {
            dp = dp * z + p;
            p = p * z + c_[k];
        }
    }

    Polynomial derivative() const {
        if (degree() == 0) return Polynomial();
        std::vector<cplx> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * double(k);
        return Polynomial(std::move(d));
    }

    Polynomial operator+(const Polynomial& o) const {
        std::vector<cplx> r(std::max(c_.size(), o.c_.size()), 0.0);
        for (std::size_t k = 0; k < c_.size(); ++k) r[k] += c_[k];
        for (std::size_t k = 0; k < o.c_.size(); ++k) r[k] += o.c_[k];
        return Polynomial(std::move(r));
    }
    Polynomial operator-(const Polynomial& o) const { return *this + o * cplx(-1); }
    Polynomial operator*(cplx s) const {
        std::vector<cplx> r = c_;
        for (auto& v : r) v *= s;
        return Polynomial(std::move(r));
    }
    Polynomial operator*(const Polynomial& o) const {
        std::vector<cplx> r(c_.size() + o.c_.size() - 1, 0.0);
        for (std::size_t i = 0; i < c_.size(); ++i)
            for (std::size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
        return Polynomial(std::move(r));
    }

    // p(z + s), exact Taylor shift by synthetic division
    Polynomial shifted(cplx s) const {
        std::vector<cplx> a = c_;
        int n = degree();
        for (int i = 0; i < n; ++i)
            for (int k = n - 1; k >= i; --k) a[k] += s * a[k + 1];
        return Polynomial(std::move(a));
    }

    bool operator==(const Polynomial& o) const { return c_ == o.c_; }

private:
    void trim() {
        while (c_.size() > 1 && c_.back() == cplx(0)) c_.pop_back();
        if (c_.empty()) c_.push_back(0.0);
    }
    std::vector<cplx> c_;
};

struct Root {
    cplx z;
    int multiplicity = 1;
};

struct RootOptions {
    int max_iter = 800;
    double cluster_tol = 1e-7;
    std::uint64_t seed = 0x51f15e5eedULL;
};

inline double cauchy_bound(const Polynomial& p) {
    double m = 0;
    for (int k = 0; k < p.degree(); ++k) m = std::max(m, std::abs(p[k] / p.leading()));
    return 1.0 + m;
}

inline double relative_residual(const Polynomial& p, cplx z) {
    double s = p.magnitude(z);
    return s == 0 ? 0.0 : std::abs(p(z)) / s;
}

// Aberth-Ehrlich simultaneous iteration, no deflation.  Returns the raw root
// approximations (repeated roots appear as nearby copies).
inline std::vector<cplx> aberth(const Polynomial& p, std::vector<cplx> z, int max_iter, int* iterations = nullptr) {
    const int n = p.degree();
    if (static_cast<int>(z.size()) != n) throw Error("invalid-argument", "aberth: wrong number of initial guesses");
    const double eps = std::numeric_limits<double>::epsilon();
    std::vector<char> done(n, 0);
    int it = 0;
    for (; it < max_iter; ++it) {
        bool all = true;
        for (int i = 0; i < n; ++i) {
            if (done[i]) continue;
            cplx v, dv;
            p.eval_with_derivative(z[i], v, dv);
            double bound = 4.0 * (2 * n + 1) * eps * p.magnitude(z[i]);
            if (std::abs(v) <= bound) {
                done[i] = 1;
                continue;
            }
            all = false;
            cplx s = 0;
            for (int j = 0; j < n; ++j)
                if (j != i) {
                    cplx d = z[i] - z[j];
                    if (d != cplx(0)) s += 1.0 / d;
                }
            cplx w;
            if (dv == cplx(0)) {
                w = cplx(1e-3, 1e-3) * (1.0 + std::abs(z[i]));
            } else {
                cplx ratio = v / dv;
                cplx den = 1.0 - ratio * s;
                w = den == cplx(0) ? ratio : ratio / den;
            }
            z[i] -= w;
            if (std::abs(w) <= 2.0 * eps * std::abs(z[i])) done[i] = 1;
        }
        if (all) break;
    }
    if (iterations) *iterations = it;
    if (it == max_iter) {
        int left = static_cast<int>(std::count(done.begin(), done.end(), 0));
        std::ostringstream os;
        os << "aberth did not converge after " << max_iter << " iterations (" << left << " of " << n
           << " roots unconverged, degree " << n << ")";
        throw Error("root-finder-nonconvergence", os.str());
    }
    return z;
}

inline std::vector<cplx> initial_circle(const Polynomial& p, std::uint64_t seed) {
    const int n = p.degree();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = 1.1 * cauchy_bound(p);
    double off = 2 * pi * u(rng);
    std::vector<cplx> z(n);
    for (int k = 0; k < n; ++k) {
        double th = off + 2 * pi * (k + 0.5 * u(rng)) / n;
        z[k] = std::polar(r, th);
    }
    return z;
}

inline std::vector<cplx> raw_roots(const Polynomial& p, const RootOptions& opt = {}) {
    if (p.is_zero()) throw Error("invalid-argument", "roots of the zero polynomial");
    const int n = p.degree();
    if (n == 0) return {};
    if (n == 1) return {-p[0] / p[1]};
    return aberth(p, initial_circle(p, opt.seed), opt.max_iter);
}

// Roots with multiplicity: raw roots closer than cluster_tol (relative to
// max(1,|z|)) are merged by single linkage and replaced by their mean, which
// is then polished by Newton on the (m-1)-th derivative.
inline std::vector<Root> cluster_roots(const Polynomial& p, const std::vector<cplx>& raw, double tol) {
    const int n = static_cast<int>(raw.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double scale = std::max(1.0, std::max(std::abs(raw[i]), std::abs(raw[j])));
            if (std::abs(raw[i] - raw[j]) < tol * scale) parent[find(i)] = find(j);
        }
    std::vector<Root> out;
    std::vector<int> seen(n, -1);
    for (int i = 0; i < n; ++i) {
        int r = find(i);
        if (seen[r] < 0) {
            seen[r] = static_cast<int>(out.size());
            out.push_back({raw[i], 1});
        } else {
            Root& R = out[seen[r]];
            R.z += raw[i];
            R.multiplicity += 1;
        }
    }
    for (auto& R : out) {
        R.z /= double(R.multiplicity);
        if (R.multiplicity > 1) {
            Polynomial q = p;
            for (int k = 1; k < R.multiplicity; ++k) q = q.derivative();
            cplx z = R.z;
            double best = std::abs(q(z));
            for (int it = 0; it < 8; ++it) {
                cplx v, dv;
                q.eval_with_derivative(z, v, dv);
                if (dv == cplx(0)) break;
                cplx zn = z - v / dv;
                double sc = std::max(1.0, std::abs(z));
                if (std::abs(zn - R.z) > tol * sc) break;
                double r = std::abs(q(zn));
                if (!(r < best)) break;
                best = r;
                z = zn;
            }
            R.z = z;
        }
    }
    std::sort(out.begin(), out.end(), [](const Root& a, const Root& b) {
        if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
        return a.z.imag() < b.z.imag();
    });
    return out;
}

inline std::vector<Root> roots(const Polynomial& p, const RootOptions& opt = {}) {
    return cluster_roots(p, raw_roots(p, opt), opt.cluster_tol);
}

}  // namespace qcs
