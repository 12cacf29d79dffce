#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <memory>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "rational_map.hpp"

namespace qcs {

struct BBox {
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double diameter() const { return std::hypot(width(), height()); }
    cplx center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
};

inline BBox bbox_of(const std::vector<cplx>& v) {
    BBox b{v[0].real(), v[0].real(), v[0].imag(), v[0].imag()};
    for (auto& z : v) {
        b.x0 = std::min(b.x0, z.real());
        b.x1 = std::max(b.x1, z.real());
        b.y0 = std::min(b.y0, z.imag());
        b.y1 = std::max(b.y1, z.imag());
    }
    return b;
}

inline double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

inline double point_segment_distance(cplx p, cplx a, cplx b) {
    cplx ab = b - a;
    double L2 = std::norm(ab);
    double t = L2 > 0 ? std::clamp(((p - a) * std::conj(ab)).real() / L2, 0.0, 1.0) : 0.0;
    return std::abs(p - (a + t * ab));
}

inline double segment_distance(cplx a, cplx b, cplx c, cplx d) {
    double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return 0.0;
    return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d), point_segment_distance(c, a, b),
                     point_segment_distance(d, a, b)});
}

// Closed simple polyline, positively oriented, the closing edge is implicit.
class JordanCurve {
public:
    JordanCurve() = default;
    explicit JordanCurve(std::vector<cplx> v, bool check_simple = true) : v_(std::move(v)) {
        while (v_.size() > 1 && std::abs(v_.front() - v_.back()) == 0.0) v_.pop_back();
        if (v_.size() < 16) throw Error("invalid-curve", "a Jordan curve needs at least 16 vertices");
        for (auto& z : v_)
            if (!is_finite(z)) throw Error("invalid-curve", "non-finite vertex");
        if (signed_area() < 0) std::reverse(v_.begin(), v_.end());
        if (check_simple && !is_simple()) throw Error("invalid-curve", "polyline self-intersects");
    }

    static JordanCurve circle(cplx c, double r, int n = 256) {
        std::vector<cplx> v(n);
        for (int k = 0; k < n; ++k) v[k] = c + std::polar(r, 2 * pi * k / n);
        return JordanCurve(std::move(v), false);
    }

    const std::vector<cplx>& vertices() const { return v_; }
    std::size_t size() const { return v_.size(); }
    cplx operator[](std::size_t i) const { return v_[i % v_.size()]; }

    double signed_area() const {
        double a = 0;
        for (std::size_t i = 0; i < v_.size(); ++i) a += cross(v_[i], v_[(i + 1) % v_.size()]);
        return a / 2;
    }
    double euclidean_length() const {
        double s = 0;
        for (std::size_t i = 0; i < v_.size(); ++i) s += std::abs(v_[(i + 1) % v_.size()] - v_[i]);
        return s;
    }
    BBox bbox() const { return bbox_of(v_); }
    double diameter() const {
        double d = 0;
        for (std::size_t i = 0; i < v_.size(); ++i)
            for (std::size_t j = i + 1; j < v_.size(); j += std::max<std::size_t>(1, v_.size() / 256))
                d = std::max(d, std::abs(v_[i] - v_[j]));
        return std::max(d, bbox().diameter() / std::sqrt(2.0));
    }
    cplx centroid() const {
        cplx c = 0;
        double a = 0;
        for (std::size_t i = 0; i < v_.size(); ++i) {
            cplx p = v_[i], q = v_[(i + 1) % v_.size()];
            double w = cross(p, q);
            a += w;
            c += (p + q) * w;
        }
        return a != 0 ? c / (3 * a) : v_[0];
    }

    double distance(cplx z) const {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v_.size(); ++i) d = std::min(d, point_segment_distance(z, v_[i], v_[(i + 1) % v_.size()]));
        return d;
    }

    double tolerance() const { return 1e-12 * std::max(1.0, bbox().diameter()); }

    // winding number by summed turning angle
    int winding(cplx z) const {
        double s = 0;
        for (std::size_t i = 0; i < v_.size(); ++i) s += std::arg((v_[(i + 1) % v_.size()] - z) / (v_[i] - z));
        return static_cast<int>(std::lround(s / (2 * pi)));
    }

    bool is_simple() const;

    JordanCurve refined() const {
        std::vector<cplx> w;
        w.reserve(2 * v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) {
            w.push_back(v_[i]);
            w.push_back(0.5 * (v_[i] + v_[(i + 1) % v_.size()]));
        }
        return JordanCurve(std::move(w), false);
    }

private:
    std::vector<cplx> v_;
};

inline bool JordanCurve::is_simple() const {
    const std::size_t n = v_.size();
    BBox b = bbox();
    int G = std::max(1, static_cast<int>(std::sqrt(double(n))));
    double w = std::max(b.width(), 1e-300) / G, h = std::max(b.height(), 1e-300) / G;
    std::vector<std::vector<int>> cells(G * G);
    auto cell_of = [&](double x, double y, int& i, int& j) {
        i = std::clamp(static_cast<int>((x - b.x0) / w), 0, G - 1);
        j = std::clamp(static_cast<int>((y - b.y0) / h), 0, G - 1);
    };
    for (std::size_t s = 0; s < n; ++s) {
        cplx a = v_[s], c = v_[(s + 1) % n];
        int i0, j0, i1, j1;
        cell_of(std::min(a.real(), c.real()), std::min(a.imag(), c.imag()), i0, j0);
        cell_of(std::max(a.real(), c.real()), std::max(a.imag(), c.imag()), i1, j1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) cells[j * G + i].push_back(static_cast<int>(s));
    }
    const double tol = tolerance();
    for (auto& cell : cells)
        for (std::size_t p = 0; p < cell.size(); ++p)
            for (std::size_t q = p + 1; q < cell.size(); ++q) {
                std::size_t s = cell[p], t = cell[q];
                std::size_t gap = (s > t) ? s - t : t - s;
                if (gap <= 1 || gap == n - 1) continue;
                if (segment_distance(v_[s], v_[(s + 1) % n], v_[t], v_[(t + 1) % n]) <= tol) return false;
            }
    return true;
}

inline bool contains(const JordanCurve& c, cplx z) {
    if (c.distance(z) <= c.tolerance()) throw Error("ambiguous-point", "point lies on the curve");
    return c.winding(z) == 1;
}

inline bool is_linked(const JordanCurve& c, const std::vector<cplx>& p_points) {
    for (auto& z : p_points)
        if (contains(c, z)) return true;
    return false;
}

namespace detail {
namespace bg = boost::geometry;
using BPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using PointTree = bg::index::rtree<BPoint, bg::index::rstar<16>>;
}  // namespace detail

struct PunctureSet {
    std::vector<cplx> points;
    int depth = 0;
    mutable std::shared_ptr<const detail::PointTree> index = nullptr;

    double distance(cplx z) const {
        if (points.empty()) return std::numeric_limits<double>::infinity();
        if (!index) {
            std::vector<detail::BPoint> b;
            b.reserve(points.size());
            for (auto& p : points) b.emplace_back(p.real(), p.imag());
            index = std::make_shared<const detail::PointTree>(b.begin(), b.end());
        }
        std::vector<detail::BPoint> hit;
        index->query(boost::geometry::index::nearest(detail::BPoint(z.real(), z.imag()), 1), std::back_inserter(hit));
        return std::hypot(hit[0].get<0>() - z.real(), hit[0].get<1>() - z.imag());
    }
};

// sorts and drops points within tol (relative to max(1,|z|)) of a kept neighbour
inline std::vector<cplx> unique_points(std::vector<cplx> v, double tol) {
    std::sort(v.begin(), v.end(), [](cplx a, cplx b) { return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag()); });
    std::vector<cplx> out;
    std::size_t first = 0;
    for (auto& z : v) {
        double t = tol * std::max(1.0, std::abs(z));
        while (first < out.size() && out[first].real() < z.real() - t) ++first;
        bool dup = false;
        for (std::size_t k = first; k < out.size() && !dup; ++k) dup = std::abs(out[k] - z) <= t;
        if (!dup) out.push_back(z);
    }
    return out;
}

// union of R^{-n}(seeds), n = 0..depth
inline PunctureSet puncture_set(const RationalMap& R, const std::vector<cplx>& seeds, int depth) {
    PunctureSet ps;
    ps.depth = depth;
    std::vector<cplx> layer = unique_points(seeds, 1e-12);
    std::vector<cplx> all = layer;
    for (int n = 1; n <= depth; ++n) {
        std::vector<cplx> next;
        for (auto& w : layer)
            for (auto& z : preimage_list(R, w)) next.push_back(z);
        layer = unique_points(std::move(next), 1e-12);
        all.insert(all.end(), layer.begin(), layer.end());
    }
    ps.points = unique_points(std::move(all), 1e-12);
    return ps;
}

inline double quasihyperbolic_length(const JordanCurve& c, const PunctureSet& ps) {
    if (ps.points.empty()) throw Error("invalid-argument", "empty puncture set");
    const auto& v = c.vertices();
    std::vector<double> dens(v.size());
    const double tol = c.tolerance();
    for (std::size_t i = 0; i < v.size(); ++i) {
        double d = ps.distance(v[i]);
        if (d <= tol) throw Error("singular-metric", "curve touches a puncture");
        dens[i] = 1.0 / d;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        cplx a = v[i], b = v[(i + 1) % v.size()];
        // a puncture on the segment is within half its length of an endpoint
        if (ps.distance(0.5 * (a + b)) <= 0.5 * std::abs(b - a) + tol) {
            for (auto& p : ps.points)
                if (point_segment_distance(p, a, b) <= tol) throw Error("singular-metric", "curve touches a puncture");
        }
    }
    double L = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t j = (i + 1) % v.size();
        L += std::abs(v[j] - v[i]) * 0.5 * (dens[i] + dens[j]);
    }
    return L;
}

// hyperbolic density of the round annulus rho1 < |z| < rho2
inline double round_annulus_density(cplx z, double rho1, double rho2) {
    double L = std::log(rho2 / rho1), r = std::abs(z);
    double s = std::sin(pi * std::log(r / rho1) / L);
    if (!(s > 0)) throw Error("singular-metric", "point outside the annulus");
    return pi / (r * L * s);
}

inline double round_annulus_hyperbolic_length(const JordanCurve& c, double rho1, double rho2) {
    const auto& v = c.vertices();
    double L = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        cplx a = v[i], b = v[(i + 1) % v.size()];
        // Simpson on each segment; density is smooth away from the boundary
        double fa = round_annulus_density(a, rho1, rho2), fm = round_annulus_density(0.5 * (a + b), rho1, rho2),
               fb = round_annulus_density(b, rho1, rho2);
        L += std::abs(b - a) * (fa + 4 * fm + fb) / 6;
    }
    return L;
}

// ---------------------------------------------------------------------------
// Lifting by simultaneous continuation of all preimage branches.

struct LiftOptions {
    int max_halvings = 40;
    double jump_factor = 3.0;   // corrector jump allowed relative to the predicted step
    double separation = 0.25;   // predicted step must stay below this fraction of the root gap
    double margin = 1e-10;      // relative distance from base to critical values
    double closure_tol = 1e-7;  // relative
};

struct BranchTrack {
    std::vector<std::vector<cplx>> paths;  // per branch, positions along one lap (first = start)
    std::vector<int> perm;                 // branch j finishes where branch perm[j] started
};

struct LiftResult {
    JordanCurve curve;
    int covering_degree = 1;  // accumulated degree of R^k restricted to the curve
    int base_laps = 1;        // laps over the immediate parent
};

namespace detail {

inline std::vector<cplx> solve_fibre(const RationalMap& R, cplx w, std::vector<cplx> init) {
    Polynomial q = R.numerator() - R.denominator() * w;
    if (q.degree() != static_cast<int>(init.size())) throw Error("branch-ambiguity", "fibre degree dropped");
    return aberth(q, std::move(init), 60);
}

inline double min_gap(const std::vector<cplx>& z, std::size_t j) {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < z.size(); ++k)
        if (k != j) g = std::min(g, std::abs(z[k] - z[j]));
    return g;
}

}  // namespace detail

inline BranchTrack track_branches(const RationalMap& R, const std::vector<cplx>& base, const LiftOptions& opt = {}) {
    const int d = R.degree();
    const std::size_t n = base.size();
    {
        double scale = std::max(1.0, bbox_of(base).diameter());
        JordanCurve probe(base, false);
        for (auto& cp : critical_points(R).points) {
            cplx cv = R(cp.z);
            if (is_finite(cv) && probe.distance(cv) < opt.margin * scale)
                throw Error("branch-ambiguity", "base curve passes through a critical value");
        }
    }
    Polynomial q0 = R.numerator() - R.denominator() * base[0];
    if (q0.degree() != d) throw Error("branch-ambiguity", "base point has a preimage at infinity");
    std::vector<cplx> z = raw_roots(q0);
    for (int j = 0; j < d; ++j)
        if (detail::min_gap(z, j) < 1e-9 * std::max(1.0, std::abs(z[j])))
            throw Error("branch-ambiguity", "base point is a critical value");

    BranchTrack bt;
    bt.paths.assign(d, {});
    for (int j = 0; j < d; ++j) bt.paths[j].push_back(z[j]);
    std::vector<cplx> start = z;

    for (std::size_t s = 0; s < n; ++s) {
        cplx wa = base[s], wb = base[(s + 1) % n];
        double t = 0, dt = 1;
        cplx wcur = wa;
        int halvings = 0;
        while (t < 1) {
            double tn = std::min(1.0, t + dt);
            cplx wn = wa + tn * (wb - wa);
            std::vector<cplx> pred(d), step(d);
            bool ok = true;
            for (int j = 0; j < d; ++j) {
                cplx der = R.derivative(z[j]);
                if (der == cplx(0) || !is_finite(der)) {
                    ok = false;
                    break;
                }
                step[j] = (wn - wcur) / der;
                pred[j] = z[j] + step[j];
                if (std::abs(step[j]) > opt.separation * detail::min_gap(z, j)) ok = false;
            }
            std::vector<cplx> zn;
            if (ok) {
                try {
                    zn = detail::solve_fibre(R, wn, pred);
                } catch (const Error&) {
                    ok = false;
                }
            }
            std::vector<cplx> matched(d);
            if (ok) {
                std::vector<char> used(d, 0);
                for (int j = 0; j < d && ok; ++j) {
                    int best = -1;
                    double bd = std::numeric_limits<double>::infinity();
                    for (int k = 0; k < d; ++k) {
                        double dd = std::abs(zn[k] - pred[j]);
                        if (dd < bd) {
                            bd = dd;
                            best = k;
                        }
                    }
                    if (used[best]) ok = false;
                    else {
                        used[best] = 1;
                        matched[j] = zn[best];
                        double jump = std::abs(matched[j] - z[j]);
                        double allow = opt.jump_factor * std::abs(step[j]) + 1e-14 * std::max(1.0, std::abs(z[j]));
                        if (jump > allow) ok = false;
                    }
                }
            }
            if (!ok) {
                dt *= 0.5;
                if (++halvings > opt.max_halvings) {
                    std::ostringstream os;
                    os << "step underflow near base point " << wcur;
                    throw Error("branch-ambiguity", os.str());
                }
                continue;
            }
            halvings = 0;
            z = matched;
            t = tn;
            wcur = wn;
            for (int j = 0; j < d; ++j) bt.paths[j].push_back(z[j]);
            dt = std::min(1.0, dt * 2);
        }
    }
    bt.perm.assign(d, -1);
    for (int j = 0; j < d; ++j) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int k = 0; k < d; ++k) {
            double dd = std::abs(z[j] - start[k]);
            if (dd < bd) {
                bd = dd;
                best = k;
            }
        }
        if (bd > opt.closure_tol * std::max(1.0, std::abs(start[best])))
            throw Error("continuation-failure", "lift does not close");
        bt.perm[j] = best;
        bt.paths[j].back() = start[best];
    }
    std::vector<int> inv(d, -1);
    for (int j = 0; j < d; ++j) {
        if (inv[bt.perm[j]] >= 0) throw Error("continuation-failure", "branch permutation is not a bijection");
        inv[bt.perm[j]] = j;
    }
    return bt;
}

inline std::vector<std::vector<int>> permutation_cycles(const std::vector<int>& perm) {
    std::vector<std::vector<int>> cyc;
    std::vector<char> seen(perm.size(), 0);
    for (std::size_t j = 0; j < perm.size(); ++j) {
        if (seen[j]) continue;
        std::vector<int> c;
        int k = static_cast<int>(j);
        while (!seen[k]) {
            seen[k] = 1;
            c.push_back(k);
            k = perm[k];
        }
        cyc.push_back(c);
    }
    return cyc;
}

inline JordanCurve cycle_curve(const BranchTrack& bt, const std::vector<int>& cycle) {
    std::vector<cplx> v;
    for (int j : cycle) v.insert(v.end(), bt.paths[j].begin(), bt.paths[j].end() - 1);
    return JordanCurve(std::move(v), false);
}

// all components of R^{-1}(base)
inline std::vector<LiftResult> lift_all(const RationalMap& R, const JordanCurve& base, int parent_degree = 1,
                                        const LiftOptions& opt = {}) {
    BranchTrack bt = track_branches(R, base.vertices(), opt);
    std::vector<LiftResult> out;
    for (auto& c : permutation_cycles(bt.perm)) {
        LiftResult lr;
        lr.curve = cycle_curve(bt, c);
        lr.base_laps = static_cast<int>(c.size());
        lr.covering_degree = lr.base_laps * parent_degree;
        out.push_back(std::move(lr));
    }
    return out;
}

inline LiftResult lift_curve(const RationalMap& R, const JordanCurve& base, cplx start, const LiftOptions& opt = {}) {
    cplx w = R(start);
    const auto& v = base.vertices();
    std::size_t n = v.size(), best = 0;
    double bd = std::numeric_limits<double>::infinity(), bt_par = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cplx a = v[i], b = v[(i + 1) % n], ab = b - a;
        double L2 = std::norm(ab);
        double t = L2 > 0 ? std::clamp(((w - a) * std::conj(ab)).real() / L2, 0.0, 1.0) : 0.0;
        double dd = std::abs(w - (a + t * ab));
        if (dd < bd) {
            bd = dd;
            best = i;
            bt_par = t;
        }
    }
    double scale = std::max(1.0, base.bbox().diameter());
    if (bd > 1e-9 * scale) throw Error("invalid-argument", "start does not lie over the base curve");
    std::vector<cplx> rot;
    rot.reserve(n + 1);
    cplx foot = v[best] + bt_par * (v[(best + 1) % n] - v[best]);
    rot.push_back(foot);
    for (std::size_t k = 1; k <= n; ++k) {
        cplx p = v[(best + k) % n];
        if (std::abs(p - foot) > 1e-14 * scale) rot.push_back(p);
    }
    if (std::abs(rot.back() - foot) <= 1e-14 * scale) rot.pop_back();
    BranchTrack bt = track_branches(R, rot, opt);
    int j0 = 0;
    double bz = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < bt.paths.size(); ++j) {
        double dd = std::abs(bt.paths[j][0] - start);
        if (dd < bz) {
            bz = dd;
            j0 = static_cast<int>(j);
        }
    }
    for (auto& c : permutation_cycles(bt.perm))
        if (std::find(c.begin(), c.end(), j0) != c.end()) {
            std::rotate(c.begin(), std::find(c.begin(), c.end(), j0), c.end());
            LiftResult lr;
            lr.curve = cycle_curve(bt, c);
            lr.base_laps = lr.covering_degree = static_cast<int>(c.size());
            return lr;
        }
    throw Error("continuation-failure", "start branch not found");
}

// components of R^{-k}(base), level by level; element [j] holds level j+1
inline std::vector<std::vector<LiftResult>> pullback_levels(const RationalMap& R, const JordanCurve& base, int k,
                                                            const LiftOptions& opt = {}) {
    if (k < 1) throw Error("invalid-argument", "k >= 1 required");
    std::vector<std::vector<LiftResult>> levels;
    std::vector<LiftResult> cur{LiftResult{base, 1, 1}};
    for (int lvl = 1; lvl <= k; ++lvl) {
        std::vector<LiftResult> next;
        for (auto& c : cur) {
            auto l = lift_all(R, c.curve, c.covering_degree, opt);
            next.insert(next.end(), l.begin(), l.end());
        }
        levels.push_back(next);
        cur = std::move(next);
    }
    return levels;
}

inline std::vector<LiftResult> iterated_pullback(const RationalMap& R, const JordanCurve& base, int k,
                                                 const LiftOptions& opt = {}) {
    return pullback_levels(R, base, k, opt).back();
}

// ---------------------------------------------------------------------------

struct CertificateRow {
    int level = 0;
    JordanCurve curve;
    double length = 0;
    bool linked = false;
    int covering_degree = 1;
};

struct AssumptionGCertificate {
    JordanCurve base_curve;
    double base_length = 0;
    std::vector<CertificateRow> found;
    double length_bound = 0;
    std::vector<std::string> errors;  // per component / level failures, sweep continues
};

inline AssumptionGCertificate assumption_g_search(const RationalMap& R, const JordanCurve& base, int max_depth,
                                                  double length_bound, const std::vector<cplx>& p_points,
                                                  const PunctureSet& punctures, const LiftOptions& opt = {}) {
    AssumptionGCertificate cert;
    cert.base_curve = base;
    cert.length_bound = length_bound;
    try {
        cert.base_length = quasihyperbolic_length(base, punctures);
    } catch (const Error& e) {
        cert.errors.push_back(std::string("level 0: ") + e.what());
    }
    std::vector<LiftResult> cur{LiftResult{base, 1, 1}};
    for (int lvl = 1; lvl <= max_depth; ++lvl) {
        std::vector<LiftResult> next;
        for (auto& c : cur) {
            try {
                auto l = lift_all(R, c.curve, c.covering_degree, opt);
                next.insert(next.end(), l.begin(), l.end());
            } catch (const Error& e) {
                cert.errors.push_back("level " + std::to_string(lvl) + ": " + e.what());
            }
        }
        for (auto& c : next) {
            try {
                if (!is_linked(c.curve, p_points)) continue;
                double L = quasihyperbolic_length(c.curve, punctures);
                if (L <= length_bound) cert.found.push_back({lvl, c.curve, L, true, c.covering_degree});
            } catch (const Error& e) {
                cert.errors.push_back("level " + std::to_string(lvl) + ": " + e.what());
            }
        }
        cur = std::move(next);
    }
    return cert;
}

}  // namespace qcs
