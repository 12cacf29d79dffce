#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "curve.hpp"

namespace qcs {

// (1/2pi) log(q/p)
inline double round_modulus(double p, double q) {
    if (!(p > 0) || !(p < q)) throw Error("invalid-argument", "round_modulus needs 0 < p < q");
    return std::log(q / p) / (2 * pi);
}

// minimum distance between two polylines; quadratic, used for validation only
inline double curve_separation(const JordanCurve& a, const JordanCurve& b) {
    double d = std::numeric_limits<double>::infinity();
    for (auto z : a.vertices()) d = std::min(d, b.distance(z));
    for (auto z : b.vertices()) d = std::min(d, a.distance(z));
    return d;
}

class AnnulusRegion {
public:
    AnnulusRegion(JordanCurve outer, JordanCurve inner) : outer_(std::move(outer)), inner_(std::move(inner)) {
        for (auto z : inner_.vertices())
            if (outer_.winding(z) != 1) throw Error("invalid-region", "inner curve leaves the outer interior");
        for (auto z : outer_.vertices())
            if (inner_.winding(z) != 0) throw Error("invalid-region", "outer curve enters the inner interior");
        margin_ = curve_separation(outer_, inner_);
        if (!(margin_ > 0)) throw Error("invalid-region", "boundary curves touch");
    }
    const JordanCurve& outer() const { return outer_; }
    const JordanCurve& inner() const { return inner_; }
    double margin() const { return margin_; }

    static AnnulusRegion round(cplx c, double p, double q, int n = 512) {
        return AnnulusRegion(JordanCurve::circle(c, q, n), JordanCurve::circle(c, p, n));
    }

private:
    JordanCurve outer_, inner_;
    double margin_ = 0;
};

struct ModulusEstimate {
    double value = 0;
    int resolution = 0;
    double error_bound = 0;
};

namespace detail {

struct NodeGrid {
    double x0, y0, h;
    int nx, ny;
    cplx node(int i, int j) const { return {x0 + i * h, y0 + j * h}; }
};

// even-odd inside flags at grid nodes by scanlines
inline std::vector<char> scanline_inside(const JordanCurve& c, const NodeGrid& g) {
    std::vector<std::vector<double>> xs(g.ny);
    const auto& v = c.vertices();
    for (std::size_t s = 0; s < v.size(); ++s) {
        cplx a = v[s], b = v[(s + 1) % v.size()];
        double ya = (a.imag() - g.y0) / g.h, yb = (b.imag() - g.y0) / g.h;
        if (ya == yb) continue;
        int j0 = static_cast<int>(std::ceil(std::min(ya, yb))), j1 = static_cast<int>(std::ceil(std::max(ya, yb))) - 1;
        j0 = std::max(j0, 0);
        j1 = std::min(j1, g.ny - 1);
        for (int j = j0; j <= j1; ++j) {
            // half-open rule [min, max)
            double t = (j - ya) / (yb - ya);
            xs[j].push_back(a.real() + t * (b.real() - a.real()));
        }
    }
    std::vector<char> in(static_cast<std::size_t>(g.nx) * g.ny, 0);
    for (int j = 0; j < g.ny; ++j) {
        auto& r = xs[j];
        std::sort(r.begin(), r.end());
        for (std::size_t k = 0; k + 1 < r.size(); k += 2) {
            int i0 = std::max(0, static_cast<int>(std::ceil((r[k] - g.x0) / g.h)));
            int i1 = std::min(g.nx - 1, static_cast<int>(std::floor((r[k + 1] - g.x0) / g.h)));
            for (int i = i0; i <= i1; ++i) in[static_cast<std::size_t>(j) * g.nx + i] = 1;
        }
    }
    return in;
}

// curve segments bucketed by grid cell, for edge/curve intersections
class SegmentBuckets {
public:
    SegmentBuckets(const JordanCurve& c, const NodeGrid& g) : c_(c), g_(g), cells_(static_cast<std::size_t>(g.nx) * g.ny) {
        const auto& v = c.vertices();
        for (std::size_t s = 0; s < v.size(); ++s) {
            cplx a = v[s], b = v[(s + 1) % v.size()];
            int i0 = clampi((std::min(a.real(), b.real()) - g.x0) / g.h - 1e-9, g.nx);
            int i1 = clampi((std::max(a.real(), b.real()) - g.x0) / g.h + 1e-9, g.nx);
            int j0 = clampi((std::min(a.imag(), b.imag()) - g.y0) / g.h - 1e-9, g.ny);
            int j1 = clampi((std::max(a.imag(), b.imag()) - g.y0) / g.h + 1e-9, g.ny);
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) cells_[static_cast<std::size_t>(j) * g.nx + i].push_back(static_cast<int>(s));
        }
    }
    // smallest t in (0,1] with P + t(Q-P) on the curve, searching the cells around the edge
    double crossing(cplx P, cplx Q, int i, int j, bool horizontal) const {
        double best = 2;
        const auto& v = c_.vertices();
        auto test = [&](int ci, int cj) {
            if (ci < 0 || cj < 0 || ci >= g_.nx || cj >= g_.ny) return;
            for (int s : cells_[static_cast<std::size_t>(cj) * g_.nx + ci]) {
                cplx a = v[s], b = v[(s + 1) % v.size()];
                cplx e = Q - P, f = b - a;
                double den = cross(e, f);
                if (den == 0) continue;
                double t = cross(a - P, f) / den, u = cross(a - P, e) / den;
                if (t >= -1e-12 && t <= 1 + 1e-12 && u >= -1e-12 && u <= 1 + 1e-12) best = std::min(best, std::max(t, 0.0));
            }
        };
        for (int dj = -1; dj <= 0; ++dj)
            for (int di = -1; di <= 0; ++di) {
                test(i + di, j + dj);
                test(i + di + (horizontal ? 1 : 0), j + dj + (horizontal ? 0 : 1));
            }
        return best;
    }

private:
    static int clampi(double x, int n) { return std::clamp(static_cast<int>(std::floor(x)), 0, n - 1); }
    const JordanCurve& c_;
    const NodeGrid& g_;
    std::vector<std::vector<int>> cells_;
};

inline double dirichlet_energy(const AnnulusRegion& region, int resolution) {
    BBox b = region.outer().bbox();
    double span = std::max(b.width(), b.height());
    double h = span / (resolution - 1);
    if (region.margin() < 2 * h) throw Error("under-resolved", "boundary curves closer than two grid cells");
    NodeGrid g{b.x0 - 2 * h, b.y0 - 2 * h, h, static_cast<int>(std::ceil(b.width() / h)) + 5,
               static_cast<int>(std::ceil(b.height() / h)) + 5};
    auto in_outer = scanline_inside(region.outer(), g);
    auto in_inner = scanline_inside(region.inner(), g);
    const std::size_t N = static_cast<std::size_t>(g.nx) * g.ny;
    // -1 unknown, else Dirichlet value index (0 inner, 1 outside)
    std::vector<int> kind(N), id(N, -1);
    int n_unknown = 0;
    for (std::size_t k = 0; k < N; ++k) {
        kind[k] = in_inner[k] ? 0 : (!in_outer[k] ? 1 : -1);
        if (kind[k] < 0) id[k] = n_unknown++;
    }
    if (n_unknown == 0) throw Error("under-resolved", "no interior nodes");
    SegmentBuckets bo(region.outer(), g), bi(region.inner(), g);

    struct Edge {
        int a;         // unknown id
        int b;         // unknown id or -1
        double c;      // conductance
        double ub;     // boundary value when b < 0
    };
    std::vector<Edge> edges;
    edges.reserve(2 * static_cast<std::size_t>(n_unknown) + 16);
    const double floor_t = 1e-2;
    auto visit = [&](int i, int j, int i2, int j2, bool horizontal) {
        std::size_t p = static_cast<std::size_t>(j) * g.nx + i, q = static_cast<std::size_t>(j2) * g.nx + i2;
        if (kind[p] >= 0 && kind[q] >= 0) {
            if (kind[p] != kind[q]) throw Error("under-resolved", "grid edge spans both boundaries");
            return;
        }
        if (kind[p] < 0 && kind[q] < 0) {
            edges.push_back({id[p], id[q], 1.0, 0.0});
            return;
        }
        // one Dirichlet end: cut the edge where it meets the boundary curve
        bool p_unknown = kind[p] < 0;
        std::size_t u = p_unknown ? p : q, d = p_unknown ? q : p;
        cplx U = g.node(static_cast<int>(u % g.nx), static_cast<int>(u / g.nx));
        cplx D = g.node(static_cast<int>(d % g.nx), static_cast<int>(d / g.nx));
        const SegmentBuckets& sb = kind[d] == 0 ? bi : bo;
        double t = sb.crossing(U, D, std::min(i, i2), std::min(j, j2), horizontal);
        if (t > 1) t = 0.5;
        t = std::max(t, floor_t);
        edges.push_back({id[u], -1, 1.0 / t, static_cast<double>(kind[d])});
    };
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (i + 1 < g.nx) visit(i, j, i + 1, j, true);
            if (j + 1 < g.ny) visit(i, j, i, j + 1, false);
        }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * edges.size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
    for (auto& e : edges) {
        trip.emplace_back(e.a, e.a, e.c);
        if (e.b >= 0) {
            trip.emplace_back(e.b, e.b, e.c);
            trip.emplace_back(e.a, e.b, -e.c);
            trip.emplace_back(e.b, e.a, -e.c);
        } else {
            rhs[e.a] += e.c * e.ub;
        }
    }
    Eigen::SparseMatrix<double> L(n_unknown, n_unknown);
    L.setFromTriplets(trip.begin(), trip.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
    cg.setTolerance(1e-11);
    cg.setMaxIterations(20 * resolution + 1000);
    cg.compute(L);
    if (cg.info() != Eigen::Success) throw Error("laplace-nonconvergence", "preconditioner setup failed");
    Eigen::VectorXd u = cg.solve(rhs);
    if (cg.info() != Eigen::Success) {
        std::ostringstream os;
        os << "CG stopped after " << cg.iterations() << " iterations, error " << cg.error();
        throw Error("laplace-nonconvergence", os.str());
    }
    double E = 0;
    for (auto& e : edges) {
        double du = (e.b >= 0 ? u[e.b] : e.ub) - u[e.a];
        E += e.c * du * du;
    }
    return E;
}

}  // namespace detail

// discrete extremal length: modulus = 1 / (Dirichlet energy of the 0/1 potential)
inline ModulusEstimate grid_modulus(const AnnulusRegion& region, int resolution) {
    if (resolution < 64) throw Error("invalid-argument", "resolution >= 64 required");
    ModulusEstimate m;
    m.resolution = resolution;
    m.value = 1.0 / detail::dirichlet_energy(region, resolution);
    try {
        double coarse = 1.0 / detail::dirichlet_energy(region, resolution / 2);
        m.error_bound = std::abs(m.value - coarse);
    } catch (const Error&) {
        m.error_bound = m.value;
    }
    return m;
}

// rays from 0: largest radius at which each ray meets the curve (0 if it misses)
inline std::vector<double> ray_extents(const JordanCurve& c, int rays) {
    std::vector<double> r(rays, 0.0);
    const auto& v = c.vertices();
    for (int k = 0; k < rays; ++k) {
        cplx dir = std::polar(1.0, 2 * pi * k / rays);
        for (std::size_t s = 0; s < v.size(); ++s) {
            cplx a = v[s], b = v[(s + 1) % v.size()], f = b - a;
            double den = cross(dir, f);
            if (den == 0) continue;
            double t = cross(a, f) / den, u = cross(a, dir) / den;
            if (t >= 0 && u >= 0 && u <= 1) r[k] = std::max(r[k], t);
        }
    }
    return r;
}

// smallest p, to 1e-3, with the round ring p < |z| < 1 inside the region (512 rays)
inline double largest_embedded_round_annulus(const AnnulusRegion& image, int rays = 512) {
    for (auto z : image.outer().vertices())
        if (std::abs(std::abs(z) - 1.0) > 1e-3) throw Error("invalid-argument", "outer boundary is not the unit circle");
    auto ext = ray_extents(image.inner(), rays);
    double need = *std::max_element(ext.begin(), ext.end());
    auto ok = [&](double p) {
        for (double r : ext)
            if (r > p) return false;
        return true;
    };
    if (need >= 1.0 - 1e-3) throw Error("no-embedding", "inner boundary reaches the unit circle");
    double lo = 0, hi = 1.0 - 1e-3;
    while (hi - lo > 1e-3) {
        double mid = 0.5 * (lo + hi);
        if (ok(mid)) hi = mid;
        else lo = mid;
    }
    return hi;
}

// ring around a curve by normal offsetting, limited by punctures and a cap on the offset
inline AnnulusRegion offset_annulus(const JordanCurve& c, const PunctureSet& punctures, double max_offset) {
    const auto& v = c.vertices();
    const std::size_t n = v.size();
    double t_in = max_offset, t_out = max_offset;
    for (auto& p : punctures.points) {
        double d = c.distance(p);
        if (contains(c, p)) t_in = std::min(t_in, 0.9 * d);
        else t_out = std::min(t_out, 0.9 * d);
    }
    std::vector<cplx> nrm(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx tng = v[(i + 1) % n] - v[(i + n - 1) % n];
        nrm[i] = cplx(0, -1) * tng / std::abs(tng);  // outward for positive orientation
    }
    for (int attempt = 0; attempt < 40; ++attempt) {
        std::vector<cplx> in(n), out(n);
        for (std::size_t i = 0; i < n; ++i) {
            in[i] = v[i] - t_in * nrm[i];
            out[i] = v[i] + t_out * nrm[i];
        }
        try {
            JordanCurve ci(in), co(out);
            if (curve_separation(ci, c) > 0.5 * t_in && curve_separation(co, c) > 0.5 * t_out)
                return AnnulusRegion(std::move(co), std::move(ci));
        } catch (const Error&) {
        }
        t_in *= 0.7;
        t_out *= 0.7;
    }
    throw Error("no-embedding", "no offset ring around the curve");
}

}  // namespace qcs
