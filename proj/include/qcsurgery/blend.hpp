#pragma once

#include <cmath>
#include <sstream>

#include "grid.hpp"

namespace qcs {

// Partial derivatives of a plane map at a point.
struct Jet {
    cplx value, dz, dzbar;
    cplx mu() const { return dz == cplx(0) ? cplx(0) : dzbar / dz; }
};

// Real Moebius automorphism of the unit disk u -> (u - c) / (1 - c u).
struct DiskShift {
    double c = 0;
    cplx operator()(cplx u) const { return (u - c) / (1.0 - c * u); }
    cplx inverse(cplx w) const { return (w + c) / (1.0 + c * w); }
    cplx derivative(cplx u) const { return (1.0 - c * c) / ((1.0 - c * u) * (1.0 - c * u)); }
    cplx inverse_derivative(cplx w) const { return (1.0 - c * c) / ((1.0 + c * w) * (1.0 + c * w)); }
};

// Homeomorphism of the closed unit disk: z -> (z + a)/(1 + a z) on |z| <= p with a = (1 + 3p)/4,
// identity on |z| = 1, and on the ring p < |z| < 1 a map that is linear in logarithmic coordinates
// after straightening the two-circle image ring.
class RadialBlendMap {
public:
    explicit RadialBlendMap(double p) : p_(p) {
        if (!(p > 0 && p < 1)) throw Error("invalid-argument", "blend needs 0 < p < 1");
        a_ = (1 + 3 * p) / 4;
        double x1 = mobius(-p).real(), x2 = mobius(p).real();
        double s = x1 + x2, m = 1 + x1 * x2;
        shift_.c = std::abs(s) < 1e-300 ? 0.0 : (m - std::sqrt(m * m - s * s)) / s;
        q_ = shift_(x2).real();
        slope_ = std::log(q_) / std::log(p_);
        // T(M(z)) = q (z/p - b) / (1 - b z/p) with b = M^{-1}(c) / p
        b_ = ((shift_.c - a_) / (1 - a_ * shift_.c)) / p_;
    }

    double p() const { return p_; }
    double a() const { return a_; }
    double q() const { return q_; }
    double shift() const { return shift_.c; }

    cplx mobius(cplx z) const { return (z + a_) / (1.0 + a_ * z); }
    cplx mobius_inverse(cplx w) const { return (w - a_) / (1.0 - a_ * w); }
    cplx mobius_derivative(cplx z) const { return (1.0 - a_ * a_) / ((1.0 + a_ * z) * (1.0 + a_ * z)); }

    // boundary twists in straightened coordinates
    double theta_in(double t) const { return t - 2 * std::arg(1.0 - b_ * std::polar(1.0, t)); }
    double theta_out(double t) const { return t - 2 * std::arg(1.0 - shift_.c * std::polar(1.0, t)); }
    double theta_in_d(double t) const { return (1 - b_ * b_) / std::norm(1.0 - b_ * std::polar(1.0, t)); }
    double theta_out_d(double t) const {
        return (1 - shift_.c * shift_.c) / std::norm(1.0 - shift_.c * std::polar(1.0, t));
    }

    Jet jet(cplx z) const {
        double r = std::abs(z);
        if (r <= p_) return {mobius(z), mobius_derivative(z), 0.0};
        if (r >= 1) return {z, 1.0, 0.0};
        double sg = std::log(r), th = std::arg(z);
        double t = sg / std::log(p_);
        double S = slope_ * sg;
        double ti = theta_in(th), to = theta_out(th);
        double Th = (1 - t) * to + t * ti;
        double Th_t = (1 - t) * theta_out_d(th) + t * theta_in_d(th);
        double Th_s = (ti - to) / std::log(p_);
        cplx G = std::exp(cplx(S, Th));
        cplx Lz = 0.5 * cplx(slope_ + Th_t, Th_s), Lzb = 0.5 * cplx(slope_ - Th_t, Th_s);
        cplx Gz = G * Lz / z, Gzb = G * Lzb / std::conj(z);
        cplx outer = shift_.inverse_derivative(G);
        return {shift_.inverse(G), outer * Gz, outer * Gzb};
    }

    cplx operator()(cplx z) const { return jet(z).value; }

    // closed-form dilatation of the ring part
    cplx mu(cplx z) const {
        double r = std::abs(z);
        if (r <= p_ || r >= 1) return 0.0;
        double th = std::arg(z), t = std::log(r) / std::log(p_);
        double Th_t = (1 - t) * theta_out_d(th) + t * theta_in_d(th);
        double Th_s = (theta_in(th) - theta_out(th)) / std::log(p_);
        cplx num(slope_ - Th_t, Th_s), den(slope_ + Th_t, Th_s);
        return num / den * (z / std::conj(z));
    }

    cplx inverse(cplx w) const {
        if (std::abs(w) >= 1) return w;
        cplx u = shift_(w);
        double ru = std::abs(u);
        if (ru <= q_) return mobius_inverse(w);
        double sg = std::log(ru) / slope_, t = sg / std::log(p_);
        double target = std::arg(u);
        // Theta(theta) - theta stays in (-pi, pi), so the preimage angle is bracketed
        auto F = [&](double th) { return (1 - t) * theta_out(th) + t * theta_in(th) - target; };
        double lo = target - pi, hi = target + pi, th = target;
        for (int it = 0; it < 200; ++it) {
            double f = F(th);
            if (f > 0) hi = th;
            else lo = th;
            double d = (1 - t) * theta_out_d(th) + t * theta_in_d(th);
            double nt = th - f / d;
            if (!(nt > lo && nt < hi)) nt = 0.5 * (lo + hi);
            if (std::abs(nt - th) < 1e-15 * (1 + std::abs(th))) {
                th = nt;
                break;
            }
            th = nt;
        }
        return std::polar(std::exp(sg), th);
    }

private:
    double p_, a_, q_, slope_, b_;
    DiskShift shift_;
};

// finite-difference dilatation of a map at z with step eps
template <class F>
cplx fd_dilatation(const F& f, cplx z, double eps) {
    cplx fx = (f(z + eps) - f(z - eps)) / (2 * eps);
    cplx fy = (f(z + cplx(0, eps)) - f(z - cplx(0, eps))) / (2 * eps);
    cplx dz = 0.5 * (fx - cplx(0, 1) * fy), dzb = 0.5 * (fx + cplx(0, 1) * fy);
    return dz == cplx(0) ? cplx(0) : dzb / dz;
}

struct BlendField {
    RadialBlendMap map;
    BeltramiField dilatation;  // on [-1,1]^2, finite differences of the map
    double sup_norm = 0;
};

inline constexpr double thin_surgery_limit = 0.99;

inline BlendField build_blend(double p, int resolution) {
    if (resolution < 128) throw Error("invalid-argument", "resolution >= 128 required");
    RadialBlendMap m(p);
    GridSpec g = GridSpec::square(0.0, 1.0, resolution);
    std::vector<cplx> mu(g.size(), 0.0);
    const double eps = 1e-6;
    double sup = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        double r = std::abs(z);
        if (r <= p + eps || r >= 1 - eps) continue;
        mu[k] = fd_dilatation(m, z, eps);
        sup = std::max(sup, std::abs(mu[k]));
    }
    if (sup >= thin_surgery_limit) {
        std::ostringstream os;
        os << "blend dilatation " << sup << " at p = " << p;
        throw Error("surgery-too-thin", os.str());
    }
    return {m, BeltramiField(g, std::move(mu)), sup};
}

}  // namespace qcs
