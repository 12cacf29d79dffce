#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polynomial.hpp"

namespace qcs {

class RationalMap {
public:
    RationalMap(Polynomial num, Polynomial den = Polynomial::constant(1.0)) : num_(std::move(num)), den_(std::move(den)) {
        if (den_.is_zero()) throw Error("invalid-map", "zero denominator");
        if (degree() < 2) throw Error("invalid-map", "degree must be at least 2");
        if (den_.degree() > 0) check_coprime();
    }

    static RationalMap polynomial(Polynomial p) { return RationalMap(std::move(p)); }

    const Polynomial& numerator() const { return num_; }
    const Polynomial& denominator() const { return den_; }
    int degree() const { return std::max(num_.degree(), den_.degree()); }
    bool is_polynomial() const { return den_.degree() == 0; }

    cplx operator()(cplx z) const {
        if (is_infinite(z)) {
            if (num_.degree() > den_.degree()) return infinity_point();
            if (num_.degree() < den_.degree()) return 0.0;
            return num_.leading() / den_.leading();
        }
        cplx n = num_(z);
        if (is_polynomial()) return n / den_[0];
        cplx d = den_(z);
        if (d == cplx(0)) {
            if (n == cplx(0)) throw Error("indeterminate", "0/0: representation is not reduced");
            return infinity_point();
        }
        return n / d;
    }

    cplx derivative(cplx z) const {
        cplx n, dn;
        num_.eval_with_derivative(z, n, dn);
        if (is_polynomial()) return dn / den_[0];
        cplx d, dd;
        den_.eval_with_derivative(z, d, dd);
        return (dn * d - n * dd) / (d * d);
    }

    // N'D - ND'
    Polynomial critical_polynomial() const {
        if (is_polynomial()) return num_.derivative();
        return num_.derivative() * den_ - num_ * den_.derivative();
    }

    // R(x + u) - R(x) - (constant) in local coordinates; only for polynomials
    Polynomial local_polynomial(cplx x) const {
        Polynomial p = num_.shifted(x) * (1.0 / den_[0]);
        std::vector<cplx> c = p.coeffs();
        c[0] = 0.0;
        return Polynomial(std::move(c));
    }

private:
    void check_coprime() const {
        for (const Root& r : roots(den_)) {
            double s = num_.magnitude(r.z);
            if (s > 0 && std::abs(num_(r.z)) < 1e-10 * s)
                throw Error("invalid-map", "numerator and denominator share a root");
        }
    }
    Polynomial num_, den_;
};

struct CriticalPoint {
    cplx z;
    int multiplicity;
};

struct CriticalSet {
    std::vector<CriticalPoint> points;  // finite points only
    int infinity_multiplicity = 0;      // deficit attributed to infinity
    int total() const {
        int s = infinity_multiplicity;
        for (auto& c : points) s += c.multiplicity;
        return s;
    }
};

inline CriticalSet critical_points(const RationalMap& R) {
    Polynomial q = R.critical_polynomial();
    CriticalSet cs;
    if (q.degree() > 0) {
        auto rs = roots(q);
        for (auto& r : rs) {
            double res = relative_residual(q, r.z);
            // multiple roots are limited by conditioning, check the polished derivative instead
            Polynomial qm = q;
            for (int k = 1; k < r.multiplicity; ++k) qm = qm.derivative();
            if (r.multiplicity > 1) res = relative_residual(qm, r.z);
            if (res > 1e-10) {
                std::ostringstream os;
                os << "critical point residual " << res << " at " << r.z;
                throw Error("root-finder-nonconvergence", os.str());
            }
            cs.points.push_back({r.z, r.multiplicity});
        }
    }
    int finite = 0;
    for (auto& c : cs.points) finite += c.multiplicity;
    cs.infinity_multiplicity = 2 * R.degree() - 2 - finite;
    return cs;
}

struct OrbitRecord {
    std::vector<cplx> samples;
    bool escaped = false;
    std::optional<int> escape_index;
};

inline OrbitRecord iterate_orbit(const RationalMap& R, cplx z0, int horizon, double escape_radius) {
    if (horizon < 1 || !(escape_radius > 0)) throw Error("invalid-argument", "horizon >= 1 and escape_radius > 0 required");
    OrbitRecord o;
    o.samples.reserve(horizon + 1);
    cplx z = z0;
    o.samples.push_back(z);
    auto out = [&](cplx w) { return !is_finite(w) || std::abs(w) > escape_radius; };
    if (out(z)) {
        o.escaped = true;
        o.escape_index = 0;
        return o;
    }
    for (int n = 1; n <= horizon; ++n) {
        z = R(z);
        o.samples.push_back(z);
        if (out(z)) {
            o.escaped = true;
            o.escape_index = n;
            break;
        }
    }
    return o;
}

struct EscapeVerdict {
    cplx critical_point;
    int multiplicity;
    bool escaped;
    int steps;               // escape index, or the index where a cycle closed / horizon
    bool cycle_detected;
};

struct EscapeCensus {
    std::vector<EscapeVerdict> verdicts;
    int count = 0;
};

struct CensusOptions {
    int horizon = 1000;
    double escape_radius = 1e4;
    double cycle_tol = 1e-9;  // relative; an orbit that revisits an earlier sample is bounded
};

// Bounded verdict for an orbit that returns (to cycle_tol) onto one of its own
// earlier samples: a critical orbit landing exactly on a repelling cycle would
// otherwise drift off it under rounding and escape spuriously.
inline EscapeVerdict classify_orbit(const RationalMap& R, cplx c, int mult, const CensusOptions& opt) {
    EscapeVerdict v{c, mult, false, opt.horizon, false};
    std::vector<cplx> seen;
    seen.reserve(opt.horizon + 1);
    cplx z = c;
    seen.push_back(z);
    for (int n = 1; n <= opt.horizon; ++n) {
        z = R(z);
        if (!is_finite(z) || std::abs(z) > opt.escape_radius) {
            v.escaped = true;
            v.steps = n;
            return v;
        }
        double tol = opt.cycle_tol * std::max(1.0, std::abs(z));
        for (const cplx& w : seen)
            if (std::abs(w - z) < tol) {
                v.cycle_detected = true;
                v.steps = n;
                return v;
            }
        seen.push_back(z);
    }
    return v;
}

inline EscapeCensus escape_census(const RationalMap& R, const CensusOptions& opt = {}) {
    EscapeCensus ec;
    for (auto& cp : critical_points(R).points) {
        ec.verdicts.push_back(classify_orbit(R, cp.z, cp.multiplicity, opt));
        if (ec.verdicts.back().escaped) ec.count += 1;
    }
    return ec;
}

inline EscapeCensus escape_census(const RationalMap& R, int horizon, double escape_radius) {
    CensusOptions o;
    o.horizon = horizon;
    o.escape_radius = escape_radius;
    return escape_census(R, o);
}

inline std::vector<Root> preimages(const RationalMap& R, cplx w) {
    if (!is_finite(w)) throw Error("invalid-argument", "preimages of a non-finite point");
    Polynomial q = R.numerator() - R.denominator() * w;
    if (q.is_zero()) throw Error("indeterminate", "map is constant on the fibre");
    if (q.degree() == 0) return {};
    return roots(q);
}

inline std::vector<cplx> preimage_list(const RationalMap& R, cplx w) {
    std::vector<cplx> out;
    for (auto& r : preimages(R, w))
        for (int k = 0; k < r.multiplicity; ++k) out.push_back(r.z);
    return out;
}

struct FixedPoint {
    cplx z;
    cplx multiplier;
    bool repelling() const { return std::abs(multiplier) > 1.0; }
};

inline std::vector<FixedPoint> fixed_points(const RationalMap& R) {
    Polynomial q = R.numerator() - R.denominator() * Polynomial::identity();
    std::vector<FixedPoint> out;
    for (auto& r : roots(q)) out.push_back({r.z, R.derivative(r.z)});
    return out;
}

struct PostcriticalSample {
    std::vector<cplx> pc;  // forward images of all finite critical points
    std::vector<cplx> p;   // those on bounded critical orbits
};

inline void push_unique(std::vector<cplx>& v, cplx z, double tol = 1e-9) {
    for (auto& w : v)
        if (std::abs(w - z) <= tol * std::max(1.0, std::abs(z))) return;
    v.push_back(z);
}

inline PostcriticalSample postcritical_sample(const RationalMap& R, int depth, int horizon, double escape_radius) {
    if (depth > horizon) throw Error("invalid-argument", "depth must not exceed horizon");
    PostcriticalSample s;
    CensusOptions o;
    o.horizon = horizon;
    o.escape_radius = escape_radius;
    for (auto& cp : critical_points(R).points) {
        bool bounded = !classify_orbit(R, cp.z, cp.multiplicity, o).escaped;
        cplx z = cp.z;
        std::vector<cplx> own{z};
        for (int n = 1; n <= depth; ++n) {
            z = R(z);
            if (!is_finite(z)) break;
            // a bounded orbit that closed up would only drift off its cycle from here on
            bool repeat = false;
            for (auto& w : own) repeat |= std::abs(w - z) < o.cycle_tol * std::max(1.0, std::abs(z));
            if (bounded && repeat) break;
            own.push_back(z);
            push_unique(s.pc, z);
            if (bounded) push_unique(s.p, z);
            if (std::abs(z) > escape_radius) break;
        }
    }
    return s;
}

// z^3 - 3A^2 z + B, critical points +-A
inline RationalMap cubic_family(double A, cplx B) {
    return RationalMap(Polynomial({B, cplx(-3.0 * A * A), 0.0, 1.0}));
}

inline RationalMap quadratic_family(cplx c) { return RationalMap(Polynomial({c, 0.0, 1.0})); }

}  // namespace qcs
