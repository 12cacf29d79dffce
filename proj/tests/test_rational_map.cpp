#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_complex.hpp>
#include <random>

#include "qcsurgery/rational_map.hpp"

using namespace qcs;

namespace {

// plain monomial sum, deliberately not Horner
cplx naive_eval(const Polynomial& p, cplx z) {
    cplx s = 0;
    for (int k = 0; k <= p.degree(); ++k) s += p[k] * std::pow(z, k);
    return s;
}

Polynomial random_poly(std::mt19937_64& rng, int deg) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<cplx> c(deg + 1);
    for (auto& v : c) v = {n(rng), n(rng)};
    return Polynomial(c);
}

bool contains_point(const std::vector<cplx>& v, cplx z, double tol) {
    for (auto& w : v)
        if (std::abs(w - z) < tol) return true;
    return false;
}

}  // namespace

TEST(Evaluate, SimpleValues) {
    RationalMap sq(Polynomial({0.0, 0.0, 1.0}));
    EXPECT_EQ(sq(2.0), cplx(4.0));
    EXPECT_EQ(quadratic_family(4.0)(0.0), cplx(4.0));
}

TEST(Evaluate, MatchesNaiveMonomialSum) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    Polynomial num = random_poly(rng, 5), den = random_poly(rng, 4);
    RationalMap R(num, den);
    for (int i = 0; i < 100; ++i) {
        cplx z{u(rng), u(rng)};
        cplx expect = naive_eval(num, z) / naive_eval(den, z);
        EXPECT_LT(std::abs(R(z) - expect), 1e-12 * std::abs(expect)) << z;
    }
}

TEST(Evaluate, PoleAndIndeterminate) {
    RationalMap R(Polynomial({1.0, 0.0, 1.0}), Polynomial({-1.0, 0.0, 1.0}));
    EXPECT_TRUE(is_infinite(R(1.0)));
    EXPECT_THROW(RationalMap(Polynomial({-1.0, 0.0, 1.0}), Polynomial({-1.0, 1.0})), Error);
}

TEST(CriticalPoints, CubicAndSquare) {
    auto cs = critical_points(RationalMap(Polynomial({0.0, -3.0, 0.0, 1.0})));
    ASSERT_EQ(cs.points.size(), 2u);
    EXPECT_NEAR(std::abs(cs.points[0].z - cplx(-1)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(cs.points[1].z - cplx(1)), 0.0, 1e-14);
    EXPECT_EQ(cs.points[0].multiplicity, 1);

    auto c2 = critical_points(RationalMap(Polynomial({0.0, 0.0, 1.0})));
    ASSERT_EQ(c2.points.size(), 1u);
    EXPECT_EQ(c2.points[0].z, cplx(0));
    EXPECT_EQ(c2.total(), 2);
}

TEST(CriticalPoints, RepeatedCriticalPoint) {
    // z^4 + z: derivative 4z^3 + 1 simple; z^4 has a triple critical point
    auto cs = critical_points(RationalMap(Polynomial({0.0, 0.0, 0.0, 0.0, 1.0})));
    ASSERT_EQ(cs.points.size(), 1u);
    EXPECT_EQ(cs.points[0].multiplicity, 3);
    EXPECT_LT(std::abs(cs.points[0].z), 1e-12);
}

TEST(CriticalPoints, AgreeWithDenseGridMinimaOfDerivative) {
    std::mt19937_64 rng(5);
    Polynomial p = random_poly(rng, 4);
    RationalMap R(p);
    auto cs = critical_points(R);
    const int N = 801;
    const double L = 3.0, h = 2 * L / (N - 1);
    std::vector<double> g(N * N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) g[j * N + i] = std::abs(naive_eval(p.derivative(), cplx(-L + i * h, -L + j * h)));
    std::vector<cplx> minima;
    for (int j = 1; j < N - 1; ++j)
        for (int i = 1; i < N - 1; ++i) {
            double v = g[j * N + i];
            bool is_min = v < 0.05;
            for (int dj = -1; dj <= 1 && is_min; ++dj)
                for (int di = -1; di <= 1; ++di)
                    if ((di || dj) && g[(j + dj) * N + i + di] < v) is_min = false;
            if (is_min) minima.push_back(cplx(-L + i * h, -L + j * h));
        }
    int inside = 0;
    for (auto& c : cs.points) {
        if (std::abs(c.z.real()) > L - 2 * h || std::abs(c.z.imag()) > L - 2 * h) continue;
        ++inside;
        EXPECT_TRUE(contains_point(minima, c.z, 2 * h)) << c.z;
        // critical values from the grid minimum agree to first order
        cplx near = c.z;
        for (auto& m : minima)
            if (std::abs(m - c.z) < 2 * h) near = m;
        EXPECT_LT(std::abs(naive_eval(p, near) - R(c.z)), 10 * h * h * std::abs(p[4]) * 100);
    }
    EXPECT_EQ(static_cast<int>(minima.size()), inside);
}

TEST(Orbit, EscapeIndexAndConstantOrbits) {
    auto o = iterate_orbit(quadratic_family(4.0), 0.0, 10, 100.0);
    ASSERT_TRUE(o.escaped);
    EXPECT_EQ(*o.escape_index, 3);
    ASSERT_EQ(o.samples.size(), 4u);
    EXPECT_EQ(o.samples[3], cplx(404));

    auto sq = iterate_orbit(quadratic_family(0.0), 0.0, 50, 100.0);
    EXPECT_FALSE(sq.escaped);
    EXPECT_EQ(sq.samples.size(), 51u);
    for (auto& z : sq.samples) EXPECT_EQ(z, cplx(0));

    auto m2 = iterate_orbit(quadratic_family(-2.0), 0.0, 20, 100.0);
    EXPECT_FALSE(m2.escaped);
    EXPECT_EQ(m2.samples[1], cplx(-2));
    for (std::size_t i = 2; i < m2.samples.size(); ++i) EXPECT_EQ(m2.samples[i], cplx(2));
}

TEST(Orbit, OverflowMarksEscape) {
    auto o = iterate_orbit(quadratic_family(0.0), 1e200, 5, std::numeric_limits<double>::infinity());
    EXPECT_TRUE(o.escaped);
    EXPECT_EQ(*o.escape_index, 1);
}

TEST(Census, BasicCounts) {
    EXPECT_EQ(escape_census(quadratic_family(4.0)).count, 1);
    EXPECT_EQ(escape_census(quadratic_family(0.0)).count, 0);
    EXPECT_EQ(escape_census(quadratic_family(-2.0)).count, 0);
}

TEST(Census, MonotoneInHorizon) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 40; ++t) {
        RationalMap R = cubic_family(0.5 + 0.5 * (u(rng) + 1), cplx(2 * u(rng), 2 * u(rng)));
        int prev = 0;
        for (int h : {1, 2, 4, 8, 16, 64, 256, 1000}) {
            int s = escape_census(R, h, 1e4).count;
            EXPECT_LE(prev, s);
            prev = s;
        }
    }
}

TEST(Preimages, SquareMap) {
    RationalMap sq(Polynomial({0.0, 0.0, 1.0}));
    auto r = preimage_list(sq, 4.0);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_TRUE(contains_point(r, 2.0, 1e-14));
    EXPECT_TRUE(contains_point(r, -2.0, 1e-14));
    auto z = preimages(sq, 0.0);
    ASSERT_EQ(z.size(), 1u);
    EXPECT_EQ(z[0].multiplicity, 2);
    EXPECT_LT(std::abs(z[0].z), 1e-14);
}

TEST(Preimages, ForwardEvaluationRoundTrip) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t < 50; ++t) {
        RationalMap R(random_poly(rng, 3), t % 2 ? random_poly(rng, 2) : Polynomial::constant(1.0));
        cplx z{u(rng), u(rng)};
        cplx w = R(z);
        auto pre = preimage_list(R, w);
        EXPECT_EQ(static_cast<int>(pre.size()), R.degree());
        for (auto& q : pre) EXPECT_LT(std::abs(R(q) - w), 1e-9 * std::max(1.0, std::abs(w)));
        EXPECT_TRUE(contains_point(pre, z, 1e-8 * std::max(1.0, std::abs(z))));
    }
}

TEST(FixedPoints, ClosedForms) {
    auto f = fixed_points(quadratic_family(0.0));
    ASSERT_EQ(f.size(), 2u);
    EXPECT_LT(std::abs(f[0].z), 1e-15);
    EXPECT_LT(std::abs(f[0].multiplier), 1e-15);
    EXPECT_LT(std::abs(f[1].z - 1.0), 1e-15);
    EXPECT_LT(std::abs(f[1].multiplier - 2.0), 1e-14);

    auto g = fixed_points(quadratic_family(-2.0));
    ASSERT_EQ(g.size(), 2u);
    EXPECT_LT(std::abs(g[0].z + 1.0), 1e-14);
    EXPECT_LT(std::abs(g[0].multiplier + 2.0), 1e-13);
    EXPECT_LT(std::abs(g[1].z - 2.0), 1e-14);
    EXPECT_LT(std::abs(g[1].multiplier - 4.0), 1e-13);
    EXPECT_TRUE(g[0].repelling());
    EXPECT_TRUE(g[1].repelling());
}

TEST(FixedPoints, HolomorphicIndexFormula) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
        RationalMap R(random_poly(rng, 2), random_poly(rng, 2));
        auto fp = fixed_points(R);
        ASSERT_EQ(fp.size(), 3u);
        cplx s = 0;
        for (auto& f : fp) s += 1.0 / (1.0 - f.multiplier);
        EXPECT_LT(std::abs(s - 1.0), 1e-8);
    }
    // polynomial: infinity is superattracting and contributes exactly 1
    std::normal_distribution<double> n;
    for (int t = 0; t < 20; ++t) {
        auto fp = fixed_points(quadratic_family({n(rng), n(rng)}));
        cplx s = 0;
        for (auto& f : fp) s += 1.0 / (1.0 - f.multiplier);
        EXPECT_LT(std::abs(s), 1e-9);
    }
}

TEST(Postcritical, SampleSets) {
    auto a = postcritical_sample(quadratic_family(4.0), 3, 1000, 1e4);
    for (cplx v : {cplx(4), cplx(20), cplx(404)}) EXPECT_TRUE(contains_point(a.pc, v, 1e-12));
    EXPECT_TRUE(a.p.empty());

    auto b = postcritical_sample(quadratic_family(-2.0), 3, 1000, 1e4);
    EXPECT_TRUE(contains_point(b.pc, -2.0, 1e-12));
    EXPECT_TRUE(contains_point(b.pc, 2.0, 1e-12));
    ASSERT_EQ(b.p.size(), 2u);
    EXPECT_TRUE(contains_point(b.p, -2.0, 1e-12));
    EXPECT_TRUE(contains_point(b.p, 2.0, 1e-12));
    EXPECT_THROW(postcritical_sample(quadratic_family(-2.0), 5, 3, 1e4), Error);
}

TEST(Properties, PolynomialCriticalMultiplicitiesSumToDegreeMinusOne) {
    std::mt19937_64 rng(4);
    for (int d = 2; d <= 7; ++d) {
        RationalMap R(random_poly(rng, d));
        int s = 0;
        for (auto& c : critical_points(R).points) s += c.multiplicity;
        EXPECT_EQ(s, d - 1);
        EXPECT_EQ(critical_points(R).total(), 2 * d - 2);
    }
    // a map with a double critical point: z^3 has critical point 0 of multiplicity 2
    RationalMap c3(Polynomial({0.0, 0.0, 0.0, 1.0}));
    auto cs = critical_points(c3);
    ASSERT_EQ(cs.points.size(), 1u);
    EXPECT_EQ(cs.points[0].multiplicity, 2);
}

TEST(Properties, OrbitAgreesWithQuadPrecision) {
    using qc = boost::multiprecision::cpp_complex_quad;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 30; ++t) {
        cplx c{0.2 * u(rng), 0.2 * u(rng)};
        RationalMap R = quadratic_family(c);
        cplx z0{2 * u(rng), 2 * u(rng)};
        auto o = iterate_orbit(R, z0, 40, 1e4);
        qc z(z0.real(), z0.imag()), cq(c.real(), c.imag());
        for (std::size_t n = 0; n < o.samples.size(); ++n) {
            if (o.escape_index && static_cast<int>(n) >= *o.escape_index) break;
            cplx zd(static_cast<double>(z.real()), static_cast<double>(z.imag()));
            EXPECT_LT(std::abs(o.samples[n] - zd), 1e-6 * std::max(1.0, std::abs(zd))) << "n=" << n;
            z = z * z + cq;
        }
    }
}
