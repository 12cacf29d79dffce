#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <random>

#include "qcsurgery/beltrami.hpp"

using namespace qcs;

namespace {

// fraction of a cell inside |z| < r by 8x8 supersampling
double disk_fraction(const GridSpec& g, std::size_t k, double r) {
    cplx c = g.center(k);
    int in = 0;
    for (int b = 0; b < 8; ++b)
        for (int a = 0; a < 8; ++a) {
            cplx z = c + cplx((a + 0.5) / 8 - 0.5, 0) * g.hx() + cplx(0, ((b + 0.5) / 8 - 0.5) * g.hy());
            in += std::abs(z) < r;
        }
    return in / 64.0;
}

GridField disk_indicator(const GridSpec& g, double r) {
    GridField f(g);
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = disk_fraction(g, k, r);
    return f;
}

// smooth bump times a phase, C^1 across the unit circle
BeltramiField smooth_field(const GridSpec& g, double t) {
    std::vector<cplx> mu(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        double r2 = std::norm(z);
        if (r2 < 1) mu[k] = t * 0.6 * (1 - r2) * (1 - r2) * (z + 0.3) / 1.3;
    }
    return BeltramiField(g, mu);
}

BeltramiField radial_stretch(const GridSpec& g, double t = 1.0) {
    std::vector<cplx> mu(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        if (std::abs(z) < 1) mu[k] = t / 3.0 * z / std::conj(z);
    }
    return BeltramiField(g, mu);
}

// Gauss-Legendre 2-D quadrature of 1/w over a rectangle away from 0
cplx quad_inverse(double x0, double x1, double y0, double y1) {
    const double n[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
    const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                         0.2369268850561891};
    cplx s = 0;
    const int m = 40;
    double dx = (x1 - x0) / m, dy = (y1 - y0) / m;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) {
                    double x = x0 + dx * (a + 0.5 + 0.5 * n[i]), y = y0 + dy * (b + 0.5 + 0.5 * n[j]);
                    s += w[i] * w[j] * 0.25 * dx * dy / cplx(x, y);
                }
    return s;
}

}  // namespace

TEST(CellIntegral, MatchesQuadrature) {
    for (auto r : {std::array<double, 4>{0.3, 0.5, 0.2, 0.45}, std::array<double, 4>{-1.0, -0.7, 0.1, 0.2},
                   std::array<double, 4>{-0.2, 0.3, 0.4, 0.9}, std::array<double, 4>{0.1, 2.0, -1.5, -0.05}}) {
        cplx e = detail::cell_integral(r[0], r[1], r[2], r[3]);
        EXPECT_NEAR(std::abs(e - quad_inverse(r[0], r[1], r[2], r[3])), 0, 1e-9);
    }
    // symmetric cell around the singularity
    EXPECT_NEAR(std::abs(detail::cell_integral(-0.5, 0.5, -0.5, 0.5)), 0, 1e-15);
}

TEST(Beurling, ZeroAndLinearity) {
    GridSpec g = GridSpec::square(0.0, 2.0, 64);
    GridField zero(g);
    EXPECT_EQ(beurling_transform(zero).sup_norm(), 0.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    GridField a(g), b(g), ab(g);
    for (int j = 10; j < 54; ++j)
        for (int i = 10; i < 54; ++i) {
            a(i, j) = {n(rng), n(rng)};
            b(i, j) = {n(rng), n(rng)};
            ab(i, j) = 2.0 * a(i, j) - cplx(0, 3) * b(i, j);
        }
    GridField Sa = beurling_transform(a), Sb = beurling_transform(b), Sab = beurling_transform(ab);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(std::abs(Sab[k] - (2.0 * Sa[k] - cplx(0, 3) * Sb[k])), 0, 1e-12);
}

TEST(Beurling, DiskIndicator) {
    // Gibbs-type ripple decays like h / distance, so stay 0.2 away from the circle
    GridSpec g = GridSpec::square(0.0, 2.5, 1024);
    GridField S = beurling_transform(disk_indicator(g, 1.0));
    double worst = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        double r = std::abs(z);
        if (std::abs(r - 1) < 0.2 || r > 2.0) continue;
        cplx exact = r < 1 ? cplx(0) : -1.0 / (z * z);
        worst = std::max(worst, std::abs(S[k] - exact));
    }
    EXPECT_LT(worst, 1e-2);
}

TEST(Beurling, Parseval) {
    GridSpec g = GridSpec::square(0.0, 2.0, 256);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 3; ++trial) {
        GridField f(g);
        for (std::size_t k = 0; k < g.size(); ++k)
            if (std::abs(g.center(k) - cplx(0.2 * trial, -0.1)) < 0.6) f[k] = {n(rng), n(rng)};
        double a = f.l2_norm(), b = beurling_transform(f).l2_norm();
        EXPECT_NEAR(b / a, 1.0, 1e-3);
    }
}

TEST(Beurling, BoundarySupportIsRejected) {
    GridSpec g = GridSpec::square(0.0, 1.0, 32);
    GridField f(g);
    f(0, 7) = 1.0;
    EXPECT_THROW(beurling_transform(f), Error);
    try {
        beurling_transform(f);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), "wraparound-contamination");
    }
}

TEST(Cauchy, DiskIndicator) {
    GridSpec g = GridSpec::square(0.0, 2.0, 256);
    GridField C = cauchy_transform(disk_indicator(g, 1.0));
    double worst = 0, away = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        double r = std::abs(z);
        cplx exact = r < 1 ? std::conj(z) : 1.0 / z;
        worst = std::max(worst, std::abs(C[k] - exact));
        if (std::abs(r - 1) > 0.1) away = std::max(away, std::abs(C[k] - exact));
    }
    EXPECT_LT(worst, 1e-2);
    EXPECT_LT(away, 2e-3);
}

TEST(Mrmt, ZeroFieldIsIdentity) {
    GridSpec g = GridSpec::square(0.0, 2.0, 64);
    NormalizedQcMap f = solve_mrmt(BeltramiField(g), 200, 1e-8);
    EXPECT_LT(f.residual, 1e-10);
    EXPECT_EQ(f.iterations, 0);
    for (cplx z : {cplx(0.3, 0.2), cplx(-1.7, 1.1), cplx(5, -4)}) EXPECT_NEAR(std::abs(f(z) - z), 0, 1e-12);
}

TEST(Mrmt, RadialStretchOracle) {
    GridSpec g = GridSpec::square(0.0, 2.0, 512);
    auto t0 = std::chrono::steady_clock::now();
    NormalizedQcMap f = solve_mrmt(radial_stretch(g), 200, 1e-8);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LE(secs, 60.0);
    EXPECT_NEAR(std::abs(f(0.25) - 0.0625), 0, 1e-2);
    double worst = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        if (std::abs(z) <= 0.9) worst = std::max(worst, std::abs(f(z) - z * std::abs(z)));
    }
    EXPECT_LE(worst, 1e-2);
    EXPECT_NEAR(std::abs(f(0.0)), 0, 1e-12);
    EXPECT_NEAR(std::abs(f(1.0) - 1.0), 0, 1e-12);
    // far field: identity outside the unit disk
    EXPECT_NEAR(std::abs(f(cplx(3.0, 4.0)) - cplx(3.0, 4.0)), 0, 1e-2);
}

TEST(Mrmt, RecoversDilatation) {
    GridSpec g = GridSpec::square(0.0, 2.0, 256);
    BeltramiField mu = radial_stretch(g);
    NormalizedQcMap f = solve_mrmt(mu, 200, 1e-8);
    const GridField& d = f.displacement();
    double worst = 0;
    for (int j = 1; j + 1 < g.ny; ++j)
        for (int i = 1; i + 1 < g.nx; ++i) {
            cplx z = g.center(i, j);
            if (std::abs(std::abs(z) - 1) < 3 * g.h() || std::abs(z) < 3 * g.h()) continue;
            cplx fx = 1.0 + (d(i + 1, j) - d(i - 1, j)) / (2 * g.hx());
            cplx fy = cplx(0, 1) + (d(i, j + 1) - d(i, j - 1)) / (2 * g.hy());
            cplx fz = 0.5 * (fx - cplx(0, 1) * fy), fzb = 0.5 * (fx + cplx(0, 1) * fy);
            worst = std::max(worst, std::abs(fzb / fz - mu(i, j)));
        }
    EXPECT_LT(worst, 3e-2);
}

TEST(Mrmt, ScalingTowardsIdentity) {
    GridSpec g = GridSpec::square(0.0, 2.0, 128);
    double prev_res = 1e300, prev_disp = 1e300;
    for (double t : {1.0, 0.5, 0.25}) {
        NormalizedQcMap f = solve_mrmt(smooth_field(g, t), 200, 1e-10);
        EXPECT_LT(f.residual, prev_res);
        EXPECT_LT(f.sup_displacement(), prev_disp);
        prev_res = f.residual;
        prev_disp = f.sup_displacement();
    }
}

TEST(Mrmt, Preconditions) {
    GridSpec g = GridSpec::square(0.0, 2.0, 64);
    std::vector<cplx> v(g.size(), 0.0);
    v[g.index(30, 30)] = 0.97;
    EXPECT_THROW(solve_mrmt(BeltramiField(g, v), 200, 1e-8), Error);
    GridSpec far = GridSpec::square(cplx(5, 5), 1.0, 32);
    EXPECT_THROW(solve_mrmt(BeltramiField(far), 200, 1e-8), Error);
    try {
        solve_mrmt(radial_stretch(g, 2.7), 3, 1e-12);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), "mrmt-nonconvergence");
    }
}

TEST(Io, RoundTrips) {
    GridSpec g = GridSpec::square(cplx(0.1, -0.2), 1.5, 48);
    BeltramiField mu = radial_stretch(g, 0.6);
    std::string a = ::testing::TempDir() + "mu.bin", b = ::testing::TempDir() + "f.bin";
    io::write_beltrami(a, mu);
    BeltramiField back = io::read_beltrami(a);
    EXPECT_EQ(back.spec(), mu.spec());
    EXPECT_EQ(back.values(), mu.values());
    NormalizedQcMap f = solve_mrmt(mu, 200, 1e-8);
    io::write_qcmap(b, f);
    NormalizedQcMap h = io::read_qcmap(b);
    for (cplx z : {cplx(0.3, 0.1), cplx(-2.0, 3.0), cplx(1.0, 0.0)}) EXPECT_EQ(f(z), h(z));
    EXPECT_THROW(io::read_qcmap(a), Error);
    std::remove(a.c_str());
    std::remove(b.c_str());
}

TEST(RationalFitting, RecoversRationalAndDropsDegree) {
    RationalMap R(Polynomial({cplx(0.5, 0.1), 0.0, 2.0}), Polynomial({cplx(-0.3), 1.0, 1.0}));
    std::vector<cplx> u, v;
    for (int k = 0; k < 80; ++k) {
        cplx z = std::polar(2.5 + 0.3 * (k % 3), 2 * pi * k / 80);
        u.push_back(z);
        v.push_back(R(z));
    }
    RationalMap F = fit_rational(u, v, 2);
    EXPECT_EQ(F.degree(), 2);
    for (int k = 0; k < 20; ++k) {
        cplx z = std::polar(2.7, 0.3 + k);
        EXPECT_NEAR(std::abs(F(z) - R(z)), 0, 1e-9);
    }
    RationalMap Q = quadratic_family(cplx(-0.2, 0.7));
    u.clear();
    v.clear();
    for (int k = 0; k < 80; ++k) {
        cplx z = std::polar(2.0 + 0.2 * (k % 4), 2 * pi * k / 80);
        u.push_back(z);
        v.push_back(Q(z));
    }
    RationalMap G = fit_rational(u, v, 3);
    EXPECT_EQ(G.degree(), 2);
    EXPECT_TRUE(G.is_polynomial());
    for (int j = 0; j <= 2; ++j) EXPECT_NEAR(std::abs(G.numerator()[j] - Q.numerator()[j]), 0, 1e-9);
}

TEST(Straighten, NoSurgeryGivesBaseMap) {
    RationalMap R = cubic_family(0.6, cplx(0.3, 0.2));
    QuasiregularMap P(R, std::nullopt);
    GridSpec g = GridSpec::square(0.0, 2.5, 128);
    auto fit = straighten(P, BeltramiField(g), 3);
    EXPECT_LT(fit.residual, 1e-8);
    EXPECT_EQ(fit.degree, 3);
    for (int j = 0; j <= 3; ++j) EXPECT_NEAR(std::abs(fit.fitted.numerator()[j] - R.numerator()[j]), 0, 1e-8);
    EXPECT_EQ(critical_points(fit.fitted).total(), 2 * 3 - 2);
}

TEST(Straighten, QuadraticSurgeryAtDepthTwo) {
    RationalMap R = quadratic_family(4.0);
    cplx x0;
    for (auto& f : fixed_points(R))
        if (f.z.imag() > 0) x0 = f.z;
    auto levels = pullback_levels(R, JordanCurve::circle(x0, 1.0, 256), 2);
    const LiftResult* hit = nullptr;
    for (auto& l : levels[1])
        if (contains(l.curve, x0)) hit = &l;
    ASSERT_NE(hit, nullptr);
    double rd = 0.8 * hit->curve.distance(x0);
    auto cfg = make_surgery_config(hit->curve, x0, x0, rd, 0.5, 0.0, 0.1);
    RadialBlendMap blend(0.5);
    auto P = build_quasiregular(R, blend, cfg);
    GridSpec g = GridSpec::square(0.0, 3.0, 1024);
    BeltramiField sigma = invariant_beltrami(P, 200, g);
    ASSERT_GT(sigma.support_size(), 100u);
    auto rep = verify_invariance(sigma, P, 1000, 3);
    EXPECT_GE(rep.pass_fraction(), 0.95);
    auto fit = straighten(P, sigma, 2);
    EXPECT_EQ(fit.degree, 2);
    EXPECT_LT(fit.residual, 1e-2);
    EXPECT_EQ(critical_points(fit.fitted).total(), 2);
    // conjugacy identity on random points outside the support
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> t(-pi, pi), r(3.2, 3.6);
    const auto& f = fit.straightening;
    for (int i = 0; i < 100; ++i) {
        cplx z = std::polar(r(rng), t(rng));
        EXPECT_LE(std::abs(f(P.conjugate(z)) - fit.fitted(f(z))), 2 * fit.residual + 1e-12);
    }
}
