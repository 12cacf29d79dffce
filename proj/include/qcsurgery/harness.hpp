#pragma once

#include <map>
#include <random>

#include "annulus.hpp"
#include "surgery.hpp"

namespace qcs {

// ---------------------------------------------------------------------------
// Green's function of the basin of infinity (polynomials)

struct GreenValue {
    double g = 0;
    cplx grad = 0;  // dG/dx + i dG/dy
    int steps = 0;
};

inline GreenValue green_with_gradient(const RationalMap& R, cplx z, int horizon = 400) {
    if (!R.is_polynomial()) throw Error("invalid-argument", "Green's function needs a polynomial");
    const int d = R.degree();
    const double lead = std::log(std::abs(R.numerator().leading() / R.denominator()[0])) / (d - 1);
    cplx w = z, dw = 1.0;
    double scale = 1;
    for (int n = 0; n <= horizon; ++n) {
        if (std::abs(w) > 1e20) return {scale * (std::log(std::abs(w)) + lead), std::conj(scale * dw / w), n};
        if (n == horizon) break;
        dw *= R.derivative(w);
        w = R(w);
        scale /= d;
    }
    return {0.0, 0.0, horizon};
}

inline double green_function(const RationalMap& R, cplx z, int horizon = 400) {
    return green_with_gradient(R, z, horizon).g;
}

// largest Green level of a finite critical point; level curves above it are Jordan curves
inline double critical_green_level(const RationalMap& R) {
    double m = 0;
    for (auto& c : critical_points(R).points) m = std::max(m, green_function(R, c.z));
    return m;
}

namespace detail {

inline cplx project_to_level(const RationalMap& R, cplx z, double level) {
    for (int it = 0; it < 30; ++it) {
        GreenValue v = green_with_gradient(R, z);
        double n2 = std::norm(v.grad);
        if (n2 == 0) throw Error("level-too-deep", "vanishing gradient on the level curve");
        cplx dz = (level - v.g) * v.grad / n2;
        z += dz;
        if (std::abs(dz) < 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    return z;
}

inline std::vector<cplx> resample_closed(const std::vector<cplx>& v, int n) {
    std::vector<double> s(v.size() + 1, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) s[i + 1] = s[i] + std::abs(v[(i + 1) % v.size()] - v[i]);
    std::vector<cplx> out(n);
    std::size_t seg = 0;
    for (int k = 0; k < n; ++k) {
        double t = s.back() * k / n;
        while (s[seg + 1] < t) ++seg;
        double f = s[seg + 1] > s[seg] ? (t - s[seg]) / (s[seg + 1] - s[seg]) : 0.0;
        out[k] = v[seg] + f * (v[(seg + 1) % v.size()] - v[seg]);
    }
    return out;
}

}  // namespace detail

// equipotential {G = level} by predictor-corrector marching, resampled to n vertices
inline JordanCurve trace_level_curve(const RationalMap& R, double level, int n) {
    if (n < 16) throw Error("invalid-argument", "resolution >= 16 required");
    if (!(level > critical_green_level(R)))
        throw Error("level-too-deep", "level curve meets the critical equipotential");
    // first crossing on the ray from far out towards a critical point, which lies inside
    cplx c0 = critical_points(R).points.front().z;
    double r = std::max(2.0, polynomial_escape_radius(R)) + std::abs(c0);
    while (green_function(R, c0 + r) < level) r *= 2;
    double a = 0.0, b = r;
    for (int i = 4096; i >= 0; --i) {
        double t = r * i / 4096;
        if (green_function(R, c0 + t) < level) {
            a = t;
            break;
        }
        b = t;
    }
    for (int i = 0; i < 100; ++i) {
        double m = 0.5 * (a + b);
        (green_function(R, c0 + m) < level ? a : b) = m;
    }
    cplx start = detail::project_to_level(R, c0 + b, level);

    double ds = 2 * pi * std::abs(start) / (8.0 * n);
    std::vector<cplx> pts{start};
    cplx z = start;
    double travelled = 0;
    const int max_steps = 400 * n;
    for (int step = 0; step < max_steps; ++step) {
        GreenValue v = green_with_gradient(R, z);
        cplx t = cplx(0, 1) * v.grad / std::abs(v.grad);
        cplx mid = detail::project_to_level(R, z + 0.5 * ds * t, level);
        GreenValue vm = green_with_gradient(R, mid);
        cplx tm = cplx(0, 1) * vm.grad / std::abs(vm.grad);
        cplx next = detail::project_to_level(R, z + ds * tm, level);
        if (std::abs(next - z) > 2 * ds || std::abs(next - (z + ds * tm)) > 0.1 * ds) {
            ds *= 0.5;
            if (ds < 1e-12 * std::abs(start)) throw Error("level-too-deep", "marching step underflow");
            continue;
        }
        travelled += std::abs(next - z);
        z = next;
        if (travelled > 4 * ds && std::abs(z - start) < 1.01 * ds) {
            auto v2 = detail::resample_closed(pts, n);
            for (auto& p : v2) p = detail::project_to_level(R, p, level);
            return JordanCurve(std::move(v2));
        }
        pts.push_back(z);
    }
    throw Error("level-too-deep", "level curve did not close");
}

struct FundamentalAnnulus {
    AnnulusRegion region;
    double green_level = 0;
};

// {rho < G < d rho}; R maps the inner boundary onto the outer one
inline FundamentalAnnulus fundamental_annulus(const RationalMap& R, double rho, int resolution) {
    if (!R.is_polynomial() || R.degree() < 2) throw Error("invalid-argument", "polynomial of degree >= 2 required");
    if (!(rho > 0)) throw Error("invalid-argument", "rho must be positive");
    JordanCurve inner = trace_level_curve(R, rho, resolution);
    JordanCurve outer = trace_level_curve(R, R.degree() * rho, resolution);
    return {AnnulusRegion(std::move(outer), std::move(inner)), rho};
}

// ---------------------------------------------------------------------------
// Census of fundamental-annulus copies met by a curve's interior.
// Copy m is {rho d^m <= G <= rho d^(m+1)}, m in [-horizon, horizon]; copy 0 is F itself.

struct IntersectionCensus {
    int n_alpha = 0;
    int first_safe_index = 0;  // outermost copy met; every later image of it misses the interior
    double g_min = 0, g_max = 0;
    std::vector<int> copies;
};

inline std::pair<double, double> interior_green_range(const RationalMap& R, const JordanCurve& curve, int samples = 64) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    auto take = [&](cplx z) {
        double g = green_function(R, z);
        lo = std::min(lo, g);
        hi = std::max(hi, g);
    };
    for (auto z : curve.vertices()) take(z);
    BBox b = curve.bbox();
    for (int j = 0; j < samples; ++j)
        for (int i = 0; i < samples; ++i) {
            cplx z(b.x0 + (i + 0.5) * b.width() / samples, b.y0 + (j + 0.5) * b.height() / samples);
            if (curve.distance(z) > curve.tolerance() && curve.winding(z) == 1) take(z);
        }
    return {lo, hi};
}

inline IntersectionCensus intersection_census(const JordanCurve& curve, const FundamentalAnnulus& fa, const RationalMap& R,
                                              int horizon) {
    if (horizon < 0) throw Error("invalid-argument", "horizon >= 0 required");
    const double d = R.degree(), rho = fa.green_level;
    auto [lo, hi] = interior_green_range(R, curve);
    IntersectionCensus c;
    c.g_min = lo;
    c.g_max = hi;
    for (int m = -horizon; m <= horizon; ++m) {
        double a = rho * std::pow(d, m), b = a * d;
        if (b >= lo && a <= hi && hi > 0) c.copies.push_back(m);
    }
    c.n_alpha = static_cast<int>(c.copies.size());
    if (c.copies.empty()) throw Error("no-safe-copy", "interior meets no copy of the fundamental annulus");
    c.first_safe_index = c.copies.back();
    if (rho * std::pow(d, c.first_safe_index + 1) <= hi)
        throw Error("no-safe-copy", "interior reaches beyond the last copy within the horizon");
    return c;
}

// ---------------------------------------------------------------------------
// Conical points

struct ConicalCertificate {
    cplx x0;
    double delta = 0;
    int degree_bound = 1;
    std::vector<int> good_times;
    std::vector<int> component_degrees;  // per k = 0..horizon, 0 when indeterminate
    std::vector<int> indeterminate;
    int retries = 0;
    bool conical() const { return indeterminate.empty() && good_times.size() == component_degrees.size(); }
};

namespace detail {

// closed lift through 0 of the polyline w under the polynomial M by single-branch continuation;
// returns the lifted vertices and the number of base laps needed to close
inline std::pair<std::vector<cplx>, int> lift_through_origin(const Polynomial& M, const std::vector<cplx>& w, int max_laps) {
    std::vector<cplx> crit;
    for (auto& r : roots(M.derivative())) crit.push_back(r.z);
    auto crit_gap = [&](cplx v) {
        double g = std::numeric_limits<double>::infinity();
        for (auto c : crit) g = std::min(g, std::abs(v - c));
        return g;
    };
    auto newton = [&](cplx v, cplx target) {
        for (int it = 0; it < 50; ++it) {
            cplx p, dp;
            M.eval_with_derivative(v, p, dp);
            if (dp == cplx(0)) break;
            cplx s = (p - target) / dp;
            v -= s;
            if (std::abs(s) < 1e-15 * std::max(1.0, std::abs(v))) break;
        }
        return v;
    };
    // starting preimage of w[0] nearest the origin
    cplx v = 0;
    {
        Polynomial q = M - Polynomial::constant(w[0]);
        double best = std::numeric_limits<double>::infinity();
        for (auto& r : roots(q))
            if (std::abs(r.z) < best) {
                best = std::abs(r.z);
                v = r.z;
            }
    }
    const cplx v0 = v;
    const Polynomial dM = M.derivative();
    std::vector<cplx> out{v};
    const std::size_t n = w.size();
    for (int lap = 1; lap <= max_laps; ++lap) {
        for (std::size_t s = 0; s < n; ++s) {
            cplx wa = w[s], wb = w[(s + 1) % n];
            double t = 0, dt = 1;
            cplx cur = wa;
            int halvings = 0;
            while (t < 1) {
                double tn = std::min(1.0, t + dt);
                cplx wn = wa + tn * (wb - wa);
                cplx der = dM(v);
                cplx pred = der == cplx(0) ? v : v + (wn - cur) / der;
                double step = std::abs(pred - v);
                cplx next = newton(pred, wn);
                if (der == cplx(0) || step > 0.25 * crit_gap(v) || std::abs(next - v) > 3 * step + 1e-14) {
                    dt *= 0.5;
                    if (++halvings > 40) throw Error("branch-ambiguity", "continuation stalls near a critical point");
                    continue;
                }
                halvings = 0;
                v = next;
                cur = wn;
                t = tn;
                dt = std::min(1.0, 2 * dt);
            }
            if (s + 1 < n) out.push_back(v);
        }
        if (std::abs(v - v0) < 1e-7 * std::max(1.0, std::abs(v0))) return {out, lap};
        out.push_back(v);
    }
    throw Error("continuation-failure", "lift does not close");
}

inline std::vector<cplx> decimate(const std::vector<cplx>& v, std::size_t n) {
    if (v.size() <= n) return v;
    return resample_closed(v, static_cast<int>(n));
}

}  // namespace detail

struct ConicalOptions {
    int vertices = 96;
    int max_retries = 5;
};

inline double default_conical_delta(const RationalMap& R, cplx x0, int horizon) {
    double d = std::numeric_limits<double>::infinity();
    cplx z = x0;
    auto cs = critical_points(R).points;
    for (int n = 0; n <= horizon && is_finite(z); ++n) {
        for (auto& c : cs) d = std::min(d, std::abs(z - c.z));
        z = R(z);
    }
    return std::max(0.5 * d, 1e-3);
}

namespace detail {

// accumulated degree of R^k on the pullback of D(R^k(x0), delta) along the orbit; 0 when indeterminate
inline int conical_degree(const RationalMap& R, const std::vector<cplx>& orbit, int k, double delta, int nv) {
    if (k == 0) return 1;
    const int d = R.degree();
    auto crits = critical_points(R).points;
    std::vector<cplx> w(nv);
    for (int i = 0; i < nv; ++i) w[i] = std::polar(1.0, 2 * pi * i / nv);
    double s = delta;
    int degree = 1;
    for (int m = k; m >= 1; --m) {
        Polynomial L = R.local_polynomial(orbit[m - 1]);
        // Newton-polygon scale of the local map
        double sp = std::numeric_limits<double>::infinity();
        for (int j = 1; j <= d; ++j)
            if (L[j] != cplx(0)) sp = std::min(sp, std::pow(s / std::abs(L[j]), 1.0 / j));
        std::vector<cplx> c(d + 1, 0.0);
        for (int j = 1; j <= d; ++j) c[j] = L[j] * std::pow(sp, j) / s;
        Polynomial M(c);
        std::pair<std::vector<cplx>, int> lift;
        try {
            lift = lift_through_origin(M, w, d);
        } catch (const Error&) {
            return 0;
        }
        JordanCurve comp(lift.first, false);
        int mult = 0;
        for (auto& cp : crits) {
            cplx u = (cp.z - orbit[m - 1]) / sp;
            if (comp.distance(u) < 1e-9 * std::max(1.0, std::abs(u))) return 0;
            if (comp.winding(u) == 1) mult += cp.multiplicity;
        }
        if (comp.distance(0.0) < 1e-9 || comp.winding(0.0) != 1) return 0;
        if (1 + mult != lift.second) return 0;
        degree *= 1 + mult;
        w = decimate(lift.first, static_cast<std::size_t>(nv));
        s = sp;
    }
    return degree;
}

}  // namespace detail

// delta <= 0 selects the default radius
inline ConicalCertificate detect_conical(const RationalMap& R, cplx x0, double delta, int d_max, int horizon,
                                         const ConicalOptions& opt = {}) {
    if (!R.is_polynomial()) throw Error("invalid-argument", "conical detection needs a polynomial");
    if (horizon < 0 || d_max < 1) throw Error("invalid-argument", "horizon >= 0 and d_max >= 1 required");
    std::vector<cplx> orbit{x0};
    double esc = polynomial_escape_radius(R);
    for (int n = 1; n <= horizon; ++n) {
        orbit.push_back(R(orbit.back()));
        if (!is_finite(orbit.back()) || std::abs(orbit.back()) > esc)
            throw Error("invalid-argument", "orbit of x0 is not bounded within the horizon");
    }
    if (!(delta > 0)) delta = default_conical_delta(R, x0, horizon);
    ConicalCertificate cert;
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
        cert = ConicalCertificate{};
        cert.x0 = x0;
        cert.delta = delta;
        cert.degree_bound = d_max;
        cert.retries = attempt;
        for (int k = 0; k <= horizon; ++k) {
            int deg = detail::conical_degree(R, orbit, k, delta, opt.vertices);
            cert.component_degrees.push_back(deg);
            if (deg == 0) cert.indeterminate.push_back(k);
            else if (deg <= d_max) cert.good_times.push_back(k);
        }
        if (cert.indeterminate.empty()) break;
        delta *= 0.5;
    }
    return cert;
}

// ---------------------------------------------------------------------------
// Misiurewicz-type parameters: the critical orbit of crit lands on a fixed point after k steps,
// for the family q(z) + t. Newton in t on F(t) = z_k - z_{k+1}.

inline std::optional<cplx> landing_newton(const Polynomial& q, cplx crit, int k, cplx t, int max_iter = 200) {
    if (k < 1) throw Error("invalid-argument", "k >= 1 required");
    for (int it = 0; it < max_iter; ++it) {
        cplx z = crit, dz = 0, zk = 0, dzk = 0;
        for (int n = 1; n <= k + 1; ++n) {
            cplx p, dp;
            q.eval_with_derivative(z, p, dp);
            dz = dp * dz + 1.0;
            z = p + t;
            if (!is_finite(z) || std::abs(z) > 1e150) return std::nullopt;
            if (n == k) {
                zk = z;
                dzk = dz;
            }
        }
        cplx F = zk - z, dF = dzk - dz;
        if (dF == cplx(0)) return std::nullopt;
        cplx step = F / dF;
        t -= step;
        if (!is_finite(t)) return std::nullopt;
        if (std::abs(step) < 1e-15 * (1 + std::abs(t))) return t;
    }
    return std::nullopt;
}

struct MisiurewiczParams {
    double A = 0;
    cplx B;
    int k = 0;
    cplx landing;     // repelling fixed point hit by the critical orbit of -A
    cplx multiplier;
    double residual = 0;
};

struct LandingCheck {
    bool ok = false;
    cplx landing, multiplier;
    double residual = 0;
};

// direct re-verification: exact preperiod k, repelling landing point, residual below 1e-10
inline LandingCheck check_landing(const RationalMap& R, cplx crit, int k) {
    LandingCheck c;
    std::vector<cplx> z{crit};
    for (int n = 1; n <= k + 1; ++n) z.push_back(R(z.back()));
    c.landing = z[k];
    c.residual = std::abs(z[k + 1] - z[k]);
    c.multiplier = R.derivative(z[k]);
    double tol = 1e-10 * std::max(1.0, std::abs(z[k]));
    bool strict = std::abs(z[k - 1] - z[k]) > 1e-6 * std::max(1.0, std::abs(z[k]));
    c.ok = c.residual < tol && strict && std::abs(c.multiplier) > 1;
    return c;
}

inline std::vector<MisiurewiczParams> find_misiurewicz_cubic(int k, int seeds, std::uint64_t rng_seed = 1) {
    if (k < 1) throw Error("invalid-argument", "k >= 1 required");
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> ua(0.3, 2.0), u01(0.0, 1.0);
    std::normal_distribution<double> nd;
    std::vector<MisiurewiczParams> out;
    for (int s = 0; s < seeds; ++s) {
        double A = ua(rng);
        double re = nd(rng), im = nd(rng);
        bool complex_seed = u01(rng) < 0.6;
        cplx B0(3 * A * A * A * re, complex_seed ? 3 * A * A * A * im : 0.0);
        Polynomial q({0.0, cplx(-3 * A * A), 0.0, 1.0});
        auto B = landing_newton(q, -A, k, B0);
        if (!B) continue;
        RationalMap R = cubic_family(A, *B);
        LandingCheck lc = check_landing(R, -A, k);
        if (!lc.ok) continue;
        if (escape_census(R).count != 1) continue;
        bool dup = false;
        for (auto& p : out) dup |= std::abs(p.A - A) < 1e-12 && std::abs(p.B - *B) < 1e-8;
        if (dup) continue;
        out.push_back({A, *B, k, lc.landing, lc.multiplier, lc.residual});
    }
    return out;
}

// quadratic analogue on z^2 + c, critical point 0
inline std::vector<cplx> find_misiurewicz_quadratic(int k, int seeds, std::uint64_t rng_seed = 1) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> nd;
    std::vector<cplx> out;
    Polynomial q({0.0, 0.0, 1.0});
    for (int s = 0; s < seeds; ++s) {
        auto c = landing_newton(q, 0.0, k, cplx(2 * nd(rng), 2 * nd(rng)));
        if (!c || !check_landing(quadratic_family(*c), 0.0, k).ok) continue;
        bool dup = false;
        for (auto& p : out) dup |= std::abs(p - *c) < 1e-8;
        if (!dup) out.push_back(*c);
    }
    return out;
}

}  // namespace qcs
