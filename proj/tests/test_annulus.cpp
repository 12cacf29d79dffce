#include <gtest/gtest.h>

#include <chrono>

#include "qcsurgery/annulus.hpp"

using namespace qcs;

namespace {

JordanCurve square(double s, int per_side = 128) {
    std::vector<cplx> v;
    cplx c[4] = {{-s, -s}, {s, -s}, {s, s}, {-s, s}};
    for (int k = 0; k < 4; ++k)
        for (int i = 0; i < per_side; ++i) v.push_back(c[k] + (c[(k + 1) % 4] - c[k]) * (double(i) / per_side));
    return JordanCurve(v);
}

JordanCurve mapped(const JordanCurve& c, cplx (*f)(cplx)) {
    std::vector<cplx> v;
    for (auto z : c.vertices()) v.push_back(f(z));
    return JordanCurve(v);
}

}  // namespace

TEST(RoundModulus, ClosedForms) {
    EXPECT_NEAR(round_modulus(0.5, 1), std::log(2.0) / (2 * pi), 1e-15);
    EXPECT_NEAR(round_modulus(0.37, 0.37 * std::exp(2 * pi)), 1.0, 1e-13);
    EXPECT_NEAR(round_modulus(0.25, 1), 2 * round_modulus(0.5, 1), 1e-15);
    EXPECT_THROW(round_modulus(1, 1), Error);
    EXPECT_THROW(round_modulus(0, 1), Error);
}

TEST(AnnulusRegion, Validation) {
    EXPECT_THROW(AnnulusRegion(JordanCurve::circle(0, 1, 64), JordanCurve::circle(0.8, 0.5, 64)), Error);
    EXPECT_THROW(AnnulusRegion(JordanCurve::circle(0, 0.5, 64), JordanCurve::circle(0, 1, 64)), Error);
    AnnulusRegion a = AnnulusRegion::round(0, 0.5, 1, 256);
    EXPECT_NEAR(a.margin(), 0.5, 1e-3);
}

TEST(GridModulus, RoundAnnulus) {
    auto m = grid_modulus(AnnulusRegion::round(0, 0.5, 1, 1024), 512);
    EXPECT_NEAR(m.value, round_modulus(0.5, 1), 0.02 * round_modulus(0.5, 1));
    EXPECT_LT(m.error_bound, 0.01 * m.value);
    EXPECT_GT(m.error_bound, 0);
}

TEST(GridModulus, SquarePreimageHalvesModulus) {
    // z^2 pulls A(0.5, 1) back to A(sqrt 0.5, 1)
    auto base = grid_modulus(AnnulusRegion::round(0, 0.5, 1, 1024), 512);
    auto pre = grid_modulus(AnnulusRegion::round(0, std::sqrt(0.5), 1, 1024), 512);
    EXPECT_NEAR(pre.value / base.value, 0.5, 0.03 * 0.5);
}

TEST(GridModulus, CoveringLawForPowers) {
    AnnulusRegion a = AnnulusRegion::round(0, 0.3, 1.2, 1024);
    double m = grid_modulus(a, 384).value;
    for (int d : {2, 3}) {
        std::vector<cplx> c(d + 1, 0.0);
        c[d] = 1.0;
        RationalMap R{Polynomial(c)};
        auto lo = lift_all(R, a.outer()), li = lift_all(R, a.inner());
        ASSERT_EQ(lo.size(), 1u);
        ASSERT_EQ(li.size(), 1u);
        double mp = grid_modulus(AnnulusRegion(lo[0].curve, li[0].curve), 384).value;
        EXPECT_NEAR(mp, m / d, 0.03 * m / d);
    }
}

TEST(GridModulus, SquareFrameStable) {
    AnnulusRegion a(square(1.0), square(0.5));
    double v256 = grid_modulus(a, 256).value, v512 = grid_modulus(a, 512).value;
    EXPECT_NEAR(v256, v512, 0.01 * v512);
}

TEST(GridModulus, MobiusInvariance) {
    AnnulusRegion a = AnnulusRegion::round(0, 0.5, 1, 1024);
    auto f = [](cplx z) { return (z + 0.1) / (1.0 + 0.1 * z); };
    AnnulusRegion b(mapped(a.outer(), f), mapped(a.inner(), f));
    double ma = grid_modulus(a, 512).value, mb = grid_modulus(b, 512).value;
    EXPECT_NEAR(ma, mb, 0.03 * ma);
}

TEST(GridModulus, MonotoneInRegion) {
    double prev = 0;
    for (double p : {0.7, 0.6, 0.5, 0.4}) {
        AnnulusRegion a(square(1.0), JordanCurve::circle(cplx(0.05, -0.02), p, 512));
        double m = grid_modulus(a, 256).value;
        EXPECT_GT(m, prev);
        prev = m;
    }
}

TEST(GridModulus, Errors) {
    EXPECT_THROW(grid_modulus(AnnulusRegion::round(0, 0.5, 1), 32), Error);
    EXPECT_THROW(grid_modulus(AnnulusRegion::round(0, 0.995, 1, 2048), 128), Error);
}

TEST(GridModulus, PullbackRingsKeepCoveringBound) {
    auto R = quadratic_family(0.0);
    AnnulusRegion B = AnnulusRegion::round(0, 1.5, 6.0, 512);
    double m = round_modulus(1.5, 6.0);
    JordanCurve o = B.outer(), in = B.inner();
    int deg = 1;
    for (int i = 1; i <= 2; ++i) {
        auto lo = lift_all(R, o), li = lift_all(R, in);
        ASSERT_EQ(lo.size(), 1u);
        o = lo[0].curve;
        in = li[0].curve;
        deg *= lo[0].base_laps;
        double mi = grid_modulus(AnnulusRegion(o, in), 384).value;
        EXPECT_GE(mi, m / deg - 0.03);
    }
}

TEST(EmbeddedRound, RoundImage) {
    double p = largest_embedded_round_annulus(AnnulusRegion::round(0, 0.3, 1, 1024));
    EXPECT_NEAR(p, 0.3, 1e-3);
}

TEST(EmbeddedRound, SpikeRaisesP) {
    // A(0.3, 1) minus a flat-topped radial spike reaching 0.6
    std::vector<cplx> v;
    const int n = 4000;
    for (int k = 0; k < n; ++k) {
        double t = 2 * pi * k / n;
        double off = std::abs(std::remainder(t - 1.0, 2 * pi));
        double r = off < 0.03 ? 0.6 : (off < 0.04 ? 0.6 - 0.3 * (off - 0.03) / 0.01 : 0.3);
        v.push_back(std::polar(r, t));
    }
    AnnulusRegion a(JordanCurve::circle(0, 1, 1024), JordanCurve(v));
    double p = largest_embedded_round_annulus(a);
    EXPECT_GE(p, 0.6);
    EXPECT_LE(p, 0.6 + 2e-3);
    // ray oracle: every sampled ray meets the inner curve no farther out than p
    for (int k = 0; k < 512; ++k) {
        double t = 2 * pi * k / 512, off = std::abs(std::remainder(t - 1.0, 2 * pi));
        double r = off < 0.03 ? 0.6 : (off < 0.04 ? 0.6 - 0.3 * (off - 0.03) / 0.01 : 0.3);
        EXPECT_LE(r, p + 1e-9);
    }
}

TEST(EmbeddedRound, TouchingIsAnError) {
    std::vector<cplx> v;
    for (int k = 0; k < 1024; ++k) {
        double t = 2 * pi * k / 1024;
        v.push_back(cplx(0.4995, 0) + std::polar(0.4995, t));
    }
    AnnulusRegion a(JordanCurve::circle(0, 1, 4096), JordanCurve(v));
    EXPECT_THROW(largest_embedded_round_annulus(a), Error);
    EXPECT_THROW(largest_embedded_round_annulus(AnnulusRegion::round(0, 0.3, 1.5)), Error);
}

TEST(OffsetAnnulus, AvoidsPunctures) {
    JordanCurve c = JordanCurve::circle(0, 1, 256);
    PunctureSet ps{{0.0, cplx(0.2, 0.1), 3.0}, 0};
    AnnulusRegion B = offset_annulus(c, ps, 10.0);
    for (auto p : ps.points) {
        bool in_ring = B.outer().winding(p) == 1 && B.inner().winding(p) == 0;
        EXPECT_FALSE(in_ring);
    }
    EXPECT_GT(grid_modulus(B, 256).value, round_modulus(0.8, 1.2));
}
