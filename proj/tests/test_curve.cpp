#include <gtest/gtest.h>

#include <random>

#include "qcsurgery/curve.hpp"

using namespace qcs;

namespace {

// even-odd ray casting, independent of the winding-angle implementation
bool ray_cast(const std::vector<cplx>& v, cplx z) {
    bool in = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        double xi = v[i].real(), yi = v[i].imag(), xj = v[j].real(), yj = v[j].imag();
        if ((yi > z.imag()) != (yj > z.imag()) && z.real() < (xj - xi) * (z.imag() - yi) / (yj - yi) + xi) in = !in;
    }
    return in;
}

std::vector<cplx> star(int n, double wobble) {
    std::vector<cplx> v(n);
    for (int k = 0; k < n; ++k) {
        double t = 2 * pi * k / n;
        v[k] = std::polar(1.0 + wobble * std::cos(5 * t), t);
    }
    return v;
}

}  // namespace

TEST(JordanCurve, OrientationAndArea) {
    auto v = star(400, 0.3);
    std::reverse(v.begin(), v.end());
    JordanCurve c(v);
    EXPECT_GT(c.signed_area(), 0);
    JordanCurve u = JordanCurve::circle(0.0, 2.0, 2048);
    EXPECT_NEAR(u.signed_area(), 4 * pi, 1e-4);
    EXPECT_NEAR(u.euclidean_length(), 4 * pi, 1e-4);
}

TEST(JordanCurve, RejectsSelfIntersection) {
    std::vector<cplx> v;
    for (int k = 0; k < 64; ++k) {
        double t = 2 * pi * k / 64;
        v.push_back({std::sin(t), std::sin(2 * t) / 2});  // figure eight
    }
    EXPECT_THROW(JordanCurve c(v), Error);
    EXPECT_THROW(JordanCurve c(std::vector<cplx>(8, 1.0)), Error);
}

TEST(JordanCurve, ContainsMatchesRayCasting) {
    JordanCurve c(star(300, 0.35));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.6, 1.6);
    int n = 0;
    for (int i = 0; i < 10000; ++i) {
        cplx z(u(rng), u(rng));
        if (c.distance(z) < 1e-9) continue;
        EXPECT_EQ(contains(c, z), ray_cast(c.vertices(), z));
        ++n;
    }
    EXPECT_GT(n, 9900);
}

TEST(JordanCurve, PointOnCurveIsAnError) {
    JordanCurve c = JordanCurve::circle(0.0, 1.0, 64);
    EXPECT_THROW(contains(c, c[3]), Error);
    EXPECT_THROW(is_linked(c, {c[5]}), Error);
    EXPECT_TRUE(is_linked(c, {5.0, 0.1}));
    EXPECT_FALSE(is_linked(c, {5.0}));
}

TEST(Quasihyperbolic, CircleAroundSinglePuncture) {
    PunctureSet ps{{0.0}, 0};
    JordanCurve c = JordanCurve::circle(0.0, 0.7, 4096);
    EXPECT_NEAR(quasihyperbolic_length(c, ps), 2 * pi, 1e-5);
    EXPECT_THROW(quasihyperbolic_length(c, PunctureSet{{0.7}, 0}), Error);
}

TEST(Quasihyperbolic, RigidMotionInvariance) {
    PunctureSet ps{{0.0, 0.3, cplx(-0.2, 0.25)}, 0};
    JordanCurve c(star(512, 0.2));
    double L = quasihyperbolic_length(c, ps);
    cplx rot = std::polar(1.0, 0.9), shift(3.0, -1.5);
    std::vector<cplx> v;
    for (auto z : c.vertices()) v.push_back(rot * z + shift);
    PunctureSet qs;
    for (auto p : ps.points) qs.points.push_back(rot * p + shift);
    EXPECT_NEAR(quasihyperbolic_length(JordanCurve(v), qs), L, 1e-9 * L);
}

TEST(Quasihyperbolic, StableUnderRefinement) {
    PunctureSet ps{{0.0, 0.4}, 0};
    JordanCurve c(star(1024, 0.2));
    double a = quasihyperbolic_length(c, ps), b = quasihyperbolic_length(c.refined(), ps);
    EXPECT_NEAR(a, b, 1e-4 * a);
}

TEST(Punctures, PreimageLayers) {
    auto R = quadratic_family(-2.0);
    auto ps = puncture_set(R, {2.0}, 2);
    // 2 <- {2,-2} <- {2,-2,0}, stored without repeats
    EXPECT_EQ(ps.points.size(), 3u);
    EXPECT_NEAR(ps.distance(cplx(0.1, 0.1)), std::hypot(0.1, 0.1), 1e-15);
    auto big = puncture_set(R, {2.0}, 9);
    for (auto z : {cplx(0.3, 0.02), cplx(-1.7, 0.1), cplx(1.99, -0.5)}) {
        double d = 1e300;
        for (auto p : big.points) d = std::min(d, std::abs(z - p));
        EXPECT_DOUBLE_EQ(big.distance(z), d);
    }
}

TEST(Lift, UnitCircleUnderSquare) {
    auto R = quadratic_family(0.0);
    auto lifts = lift_all(R, JordanCurve::circle(0.0, 1.0, 128));
    ASSERT_EQ(lifts.size(), 1u);
    EXPECT_EQ(lifts[0].covering_degree, 2);
    for (auto z : lifts[0].curve.vertices()) EXPECT_NEAR(std::abs(z), 1.0, 1e-12);
}

TEST(Lift, RadiusFourFromTwo) {
    auto R = quadratic_family(0.0);
    auto lr = lift_curve(R, JordanCurve::circle(0.0, 4.0, 128), 2.0);
    EXPECT_EQ(lr.covering_degree, 2);
    for (auto z : lr.curve.vertices()) EXPECT_NEAR(std::abs(z), 2.0, 1e-12);
    EXPECT_NEAR(std::abs(lr.curve[0] - 2.0), 0.0, 1e-12);
}

TEST(Lift, UnbranchedComponentsAndForwardImages) {
    auto R = quadratic_family(cplx(4.0));
    JordanCurve base = JordanCurve::circle(6.0, 1.0, 200);
    auto lifts = lift_all(R, base);
    ASSERT_EQ(lifts.size(), 2u);
    for (auto& l : lifts) {
        EXPECT_EQ(l.covering_degree, 1);
        for (auto z : l.curve.vertices()) EXPECT_NEAR(std::abs(R(z) - 6.0), 1.0, 1e-10);
    }
}

TEST(Lift, IteratedDegreesSumToPower) {
    auto R = quadratic_family(0.0);
    auto lv = iterated_pullback(R, JordanCurve::circle(0.0, 16.0, 64), 2);
    ASSERT_EQ(lv.size(), 1u);
    EXPECT_EQ(lv[0].covering_degree, 4);
    auto C = cubic_family(1.0, cplx(0.5, 0.2));
    JordanCurve base = JordanCurve::circle(0.0, 30.0, 128);
    for (int k = 1; k <= 2; ++k) {
        int s = 0;
        for (auto& l : iterated_pullback(C, base, k)) s += l.covering_degree;
        EXPECT_EQ(s, k == 1 ? 3 : 9);
    }
}

TEST(Lift, RepellingFixedPointPullbacksShrink) {
    auto R = quadratic_family(cplx(4.0));
    // fixed point near 0.5 + 1.94i, multiplier about 4.3 in modulus
    cplx x0;
    for (auto& f : fixed_points(R))
        if (f.z.imag() > 0) x0 = f.z;
    auto lv = pullback_levels(R, JordanCurve::circle(x0, 0.3, 128), 3);
    double prev = 0.6;
    for (auto& level : lv) {
        const LiftResult* hit = nullptr;
        for (auto& l : level)
            if (contains(l.curve, x0)) hit = &l;
        ASSERT_NE(hit, nullptr);
        EXPECT_EQ(hit->covering_degree, 1);
        double d = hit->curve.diameter();
        EXPECT_LT(d, prev / 3);
        prev = d;
    }
}

TEST(Lift, ThroughCriticalValueIsAnError) {
    auto R = quadratic_family(0.0);
    EXPECT_THROW(lift_all(R, JordanCurve::circle(1.0, 1.0, 64)), Error);
}

TEST(AssumptionG, FixedPointOfChebyshev) {
    auto R = quadratic_family(-2.0);
    std::vector<cplx> P{-2.0, 2.0};
    auto ps = puncture_set(R, P, 3);
    JordanCurve base = JordanCurve::circle(2.0, 0.3, 128);
    auto cert = assumption_g_search(R, base, 3, 1e9, P, ps);
    EXPECT_TRUE(cert.errors.empty());
    for (int lvl = 1; lvl <= 3; ++lvl) {
        int containing = 0;
        for (auto& row : cert.found)
            if (row.level == lvl && contains(row.curve, 2.0)) {
                ++containing;
                EXPECT_TRUE(row.linked);
            }
        EXPECT_EQ(containing, 1);
    }
    auto empty = assumption_g_search(R, base, 3, 0.0, P, ps);
    EXPECT_TRUE(empty.found.empty());
}

TEST(HyperbolicLength, CoveringRatioForPowers) {
    for (int d : {2, 3}) {
        std::vector<cplx> c(d + 1, 0.0);
        c[d] = 1.0;
        RationalMap R{Polynomial(c)};
        double r1 = 0.5, r2 = 2.0;
        // base: a wobbly loop inside A(r1^d, r2^d)
        std::vector<cplx> v;
        for (int k = 0; k < 256; ++k) {
            double t = 2 * pi * k / 256;
            v.push_back(std::polar(std::exp(0.3 * std::sin(3 * t)), t));
        }
        JordanCurve base(v);
        auto lifts = lift_all(R, base);
        ASSERT_EQ(lifts.size(), 1u);
        EXPECT_EQ(lifts[0].covering_degree, d);
        double Lb = round_annulus_hyperbolic_length(base, std::pow(r1, d), std::pow(r2, d));
        double Ll = round_annulus_hyperbolic_length(lifts[0].curve, r1, r2);
        EXPECT_NEAR(Ll / Lb, double(d), 0.01 * d);
    }
}
