#pragma once

#include <optional>
#include <random>

#include "blend.hpp"
#include "curve.hpp"

namespace qcs {

// |R(z)| >= 2|z| beyond this radius (polynomials only)
inline double polynomial_escape_radius(const RationalMap& R) {
    if (!R.is_polynomial() || R.degree() < 2) throw Error("invalid-argument", "polynomial of degree >= 2 required");
    const Polynomial& P = R.numerator();
    double lead = std::abs(P.leading() / R.denominator()[0]), s = 0;
    for (int k = 0; k < P.degree(); ++k) s += std::abs(P[k] / R.denominator()[0]);
    return std::max(1.0, (2 + s) / lead);
}

// Round disk D inside the curve's interior, the chart
//   phi(z) = e^{-i theta} (zeta - beta) / (1 - conj(beta) zeta),  zeta = (z - c) / r,  beta = (b - c) / r
// sends D onto the unit disk with phi(b) = 0; target = phi^{-1}(a).
struct SurgeryConfig {
    JordanCurve curve;
    cplx b;
    cplx disk_center;
    double disk_radius = 0;
    double p = 0.5;
    double theta = 0;
    cplx target;
    double safe_radius = 0;  // chart radius around a whose orbits must never come back to D
};

class Transplant {
public:
    Transplant(RadialBlendMap blend, const SurgeryConfig& cfg) : blend_(blend), cfg_(cfg) {
        c_ = cfg.disk_center;
        r_ = cfg.disk_radius;
        if (!(r_ > 0)) throw Error("config-violation", "disk radius must be positive");
        beta_ = (cfg.b - c_) / r_;
        rot_ = std::polar(1.0, -cfg.theta);
    }

    const RadialBlendMap& blend() const { return blend_; }
    const SurgeryConfig& config() const { return cfg_; }

    cplx chart(cplx z) const {
        cplx zeta = (z - c_) / r_;
        return rot_ * (zeta - beta_) / (1.0 - std::conj(beta_) * zeta);
    }
    cplx chart_derivative(cplx z) const {
        cplx zeta = (z - c_) / r_, d = 1.0 - std::conj(beta_) * zeta;
        return rot_ * (1.0 - std::norm(beta_)) / (d * d) / r_;
    }
    cplx chart_inverse(cplx w) const {
        cplx u = std::conj(rot_) * w;
        return c_ + r_ * (u + beta_) / (1.0 + std::conj(beta_) * u);
    }

    bool in_disk(cplx z) const { return std::abs(z - c_) < r_; }
    bool in_support(cplx z) const {
        if (!in_disk(z)) return false;
        double m = std::abs(chart(z));
        return m > blend_.p() && m < 1;
    }
    bool in_safe_ball(cplx z) const { return in_disk(z) && std::abs(chart(z) - blend_.a()) < cfg_.safe_radius; }

    Jet jet(cplx z) const {
        if (!in_disk(z)) return {z, 1.0, 0.0};
        cplx w = chart(z), d = chart_derivative(z);
        Jet j = blend_.jet(w);
        cplx v = chart_inverse(j.value);
        cplx dinv = 1.0 / chart_derivative(v);
        return {v, dinv * j.dz * d, dinv * j.dzbar * std::conj(d)};
    }
    cplx operator()(cplx z) const { return in_disk(z) ? chart_inverse(blend_(chart(z))) : z; }
    cplx inverse(cplx w) const { return in_disk(w) ? chart_inverse(blend_.inverse(chart(w))) : w; }

    cplx mu(cplx z) const {
        if (!in_support(z)) return 0.0;
        cplx d = chart_derivative(z);
        return blend_.mu(chart(z)) * std::conj(d) / d;
    }

    // sup of |f(z) - z|
    double displacement(int samples = 256) const {
        double s = 0;
        for (int i = 1; i < samples; ++i)
            for (int k = 0; k < samples; ++k) {
                cplx w = std::polar(double(i) / samples, 2 * pi * k / samples);
                cplx z = chart_inverse(w);
                s = std::max(s, std::abs((*this)(z) - z));
            }
        return s;
    }

private:
    RadialBlendMap blend_;
    SurgeryConfig cfg_;
    cplx c_, beta_, rot_;
    double r_;
};

inline cplx chart_target(const SurgeryConfig& cfg) {
    SurgeryConfig c = cfg;
    c.safe_radius = 0;
    Transplant t(RadialBlendMap(cfg.p), c);
    return t.chart_inverse(t.blend().a());
}

inline SurgeryConfig make_surgery_config(JordanCurve curve, cplx b, cplx center, double radius, double p, double theta,
                                         double safe_radius) {
    SurgeryConfig c{std::move(curve), b, center, radius, p, theta, 0.0, safe_radius};
    c.target = chart_target(c);
    return c;
}

inline void validate(const SurgeryConfig& c) {
    auto fail = [](const std::string& m) { throw Error("config-violation", m); };
    if (!(c.p > 0 && c.p < 1)) fail("p must lie in (0,1)");
    if (!(c.disk_radius > 0)) fail("disk radius must be positive");
    if (!(std::abs(c.b - c.disk_center) < c.disk_radius)) fail("b outside the disk");
    if (c.curve.size() == 0) fail("missing curve");
    if (!contains(c.curve, c.disk_center) || !(c.curve.distance(c.disk_center) > c.disk_radius))
        fail("closed disk not inside the curve");
    if (!(std::abs(c.target - c.disk_center) < c.disk_radius)) fail("target outside the disk");
    if (std::abs(c.target - chart_target(c)) > 1e-9 * c.disk_radius) fail("target is not the chart image of a");
    double a = (1 + 3 * c.p) / 4;
    if (!(c.safe_radius >= 0 && a + c.safe_radius < 1)) fail("safe ball leaves the disk");
}

inline Transplant transplant(const RadialBlendMap& blend, const SurgeryConfig& cfg) {
    validate(cfg);
    if (std::abs(blend.p() - cfg.p) > 1e-15) throw Error("config-violation", "blend and config disagree on p");
    return Transplant(blend, cfg);
}

// P = f o R, and its conjugate R o f = f^{-1} o P o f which carries the blend support itself
class QuasiregularMap {
public:
    QuasiregularMap(RationalMap base, std::optional<Transplant> f) : base_(std::move(base)), f_(std::move(f)) {}

    const RationalMap& base() const { return base_; }
    bool has_surgery() const { return f_.has_value(); }
    const Transplant& surgery() const { return *f_; }

    cplx surgery_map(cplx z) const { return f_ ? (*f_)(z) : z; }
    Jet surgery_jet(cplx z) const { return f_ ? f_->jet(z) : Jet{z, 1.0, 0.0}; }
    bool in_support(cplx z) const { return f_ && f_->in_support(z); }
    bool in_disk(cplx z) const { return f_ && f_->in_disk(z); }
    bool in_safe_ball(cplx z) const { return f_ && f_->in_safe_ball(z); }

    cplx operator()(cplx z) const { return surgery_map(base_(z)); }
    cplx conjugate(cplx z) const { return base_(surgery_map(z)); }

    // points with P(z) = w
    std::vector<cplx> preimages_of(cplx w) const {
        cplx v = f_ ? f_->inverse(w) : w;
        return preimage_list(base_, v);
    }

private:
    RationalMap base_;
    std::optional<Transplant> f_;
};

inline QuasiregularMap build_quasiregular(const RationalMap& R, const RadialBlendMap& blend, const SurgeryConfig& cfg) {
    return QuasiregularMap(R, transplant(blend, cfg));
}

// pullback of nu (given at g(z)) by a map with jet g at z
inline cplx pullback(const Jet& g, cplx nu) {
    cplx den = g.dz + nu * std::conj(g.dzbar);
    if (den == cplx(0)) return 0.0;
    return (g.dzbar + nu * std::conj(g.dz)) / den;
}

inline cplx holomorphic_pullback(cplx dR, cplx nu) {
    if (dR == cplx(0) || nu == cplx(0)) return 0.0;
    return nu * std::conj(dR) / dR;
}

struct BeltramiOptions {
    int horizon = 200;
    double escape_radius = 0;  // 0: polynomial bound of the base map
};

// sigma at one point for the conjugate form R o f: forward orbit until escape or horizon,
// then the blend dilatation is pulled back along it, passage by passage
inline cplx pointwise_sigma(const QuasiregularMap& P, cplx z, const BeltramiOptions& opt) {
    if (!P.has_surgery()) return 0.0;
    double esc = opt.escape_radius > 0 ? opt.escape_radius : polynomial_escape_radius(P.base());
    std::vector<cplx> zs;
    int last = -1;
    bool safe = false;
    for (int n = 0; n <= opt.horizon; ++n) {
        if (!is_finite(z) || std::abs(z) > esc) break;
        if (P.in_disk(z) && safe) {
            std::ostringstream os;
            os << "orbit returns to the disk at " << z << " after the safe ball";
            throw Error("safe-copy-violation", os.str());
        }
        zs.push_back(z);
        if (P.in_support(z)) last = n;
        cplx w = P.surgery_map(z);
        if (P.in_safe_ball(w)) safe = true;
        z = P.base()(w);
    }
    if (last < 0) return 0.0;
    cplx nu = 0.0;
    for (int j = last; j >= 0; --j) {
        Jet g = P.surgery_jet(zs[j]);
        cplx nr = holomorphic_pullback(P.base().derivative(g.value), nu);
        nu = P.in_support(zs[j]) ? pullback(g, nr) : nr;
    }
    return nu;
}

inline BeltramiField invariant_beltrami(const QuasiregularMap& P, int horizon, const GridSpec& grid) {
    if (horizon < 1) throw Error("invalid-argument", "horizon >= 1 required");
    grid.validate();
    BeltramiOptions opt;
    opt.horizon = horizon;
    opt.escape_radius = polynomial_escape_radius(P.base());
    std::vector<cplx> v(grid.size(), 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) v[k] = pointwise_sigma(P, grid.center(k), opt);
    return BeltramiField(grid, std::move(v));
}

struct InvarianceReport {
    int samples = 0;
    int passed = 0;
    double max_error = 0;
    std::size_t active_cells = 0;
    double pass_fraction() const { return samples ? double(passed) / samples : 1.0; }
};

// sigma(z) against the pullback of sigma(P(z)) under the conjugate form R o f at random cells
inline InvarianceReport verify_invariance(const BeltramiField& sigma, const QuasiregularMap& P, int samples,
                                          std::uint64_t seed = 1, int horizon = 200, double tol = 1e-2) {
    const GridSpec& g = sigma.spec();
    BeltramiOptions opt;
    opt.horizon = horizon;
    opt.escape_radius = polynomial_escape_radius(P.base());
    // grid value where the four nodes around w resolve sigma to within tol / 2, the construction elsewhere
    auto sigma_at = [&](cplx w) -> cplx {
        if (g.contains(w) && sigma.smooth_at(w) && sigma.local_spread(w) < tol / 2) return sigma.interpolate(w);
        return pointwise_sigma(P, w, opt);
    };
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (sigma[k] != cplx(0)) {
            active.push_back(k);
            continue;
        }
        cplx w = P.conjugate(g.center(k));
        if (g.contains(w) && sigma.interpolate(w) != cplx(0)) active.push_back(k);
    }
    InvarianceReport rep;
    rep.active_cells = active.size();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, (active.empty() ? g.size() : active.size()) - 1);
    for (int s = 0; s < samples; ++s) {
        std::size_t k = active.empty() ? pick(rng) : active[pick(rng)];
        cplx z = g.center(k);
        Jet f = P.surgery_jet(z);
        cplx nr = holomorphic_pullback(P.base().derivative(f.value), sigma_at(P.base()(f.value)));
        cplx pulled = P.in_support(z) ? pullback(f, nr) : nr;
        double e = std::abs(pulled - sigma[k]);
        rep.max_error = std::max(rep.max_error, e);
        rep.samples += 1;
        rep.passed += e < tol;
    }
    return rep;
}

}  // namespace qcs
