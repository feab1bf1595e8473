#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sbx/geometry.hpp"
#include "sbx/quadrature.hpp"
#include "sbx/rng.hpp"

using namespace sbx;

TEST_CASE("grid weights are positive and sum to the ball volume") {
    const InteriorGrid g2 = InteriorGrid::disc(48, 96);
    double tot = 0.0;
    for (double w : g2.weights) {
        CHECK(w > 0.0);
        tot += w;
    }
    CHECK(tot == doctest::Approx(kPi).epsilon(1e-9));

    const InteriorGrid g3 = InteriorGrid::ball(24, 24, 48);
    tot = 0.0;
    for (double w : g3.weights) {
        CHECK(w > 0.0);
        tot += w;
    }
    CHECK(tot == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-9));
}

TEST_CASE("raw poisson kernel integrates to one over the boundary") {
    const BoundaryGrid bg = BoundaryGrid::circle(2048);
    Domain d2(2);
    for (const Vec x : {Vec(0.0, 0.0), Vec(0.5, 0.2), Vec(-0.7, 0.55), Vec(0.0, 0.9)}) {
        const double s = bg.integrate(
            [&](const BoundaryPoint& z) { return poisson_kernel(d2, x, z); });
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    const BoundaryGrid bs = BoundaryGrid::sphere(64, 128);
    Domain d3(3);
    for (const Vec x : {Vec(0.0, 0.0, 0.0), Vec(0.3, -0.2, 0.4)}) {
        const double s = bs.integrate(
            [&](const BoundaryPoint& z) { return poisson_kernel(d3, x, z); });
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("apply_green reproduces closed-form potentials") {
    const InteriorGrid grid = InteriorGrid::disc(48, 96);

    // f == 1: expected exit time (1-|x|^2)/d
    for (const Vec x : {Vec(0.0, 0.0), Vec(0.3, -0.4), Vec(0.6, 0.35)}) {
        const double v = apply_green(grid, [](const Vec&) { return 1.0; }, x);
        CHECK(v == doctest::Approx((1.0 - x.norm2()) / 2.0).epsilon(1e-10));
    }
    CHECK(apply_green(grid, [](const Vec&) { return 1.0; }, Vec(0.0, 0.0)) ==
          doctest::Approx(0.5));

    // f == 0
    CHECK(apply_green(grid, [](const Vec&) { return 0.0; }, Vec(0.2, 0.2)) ==
          doctest::Approx(0.0));

    // f(y) = y_1 solves (1/2) Lap u = -f/...: u = x_1 (1-|x|^2)/(d+2)
    for (const Vec x : {Vec(0.25, 0.1), Vec(-0.5, 0.3), Vec(0.0, 0.0)}) {
        const double v = apply_green(grid, [](const Vec& y) { return y[0]; }, x);
        CHECK(v == doctest::Approx(x[0] * (1.0 - x.norm2()) / 4.0).epsilon(5e-4));
    }

    // linearity
    auto f = [](const Vec& y) { return std::cos(y[0]) + y[1]; };
    auto f2 = [&](const Vec& y) { return 2.0 * f(y); };
    const Vec x(0.1, -0.2);
    CHECK(apply_green(grid, f2, x) == doctest::Approx(2.0 * apply_green(grid, f, x)));
}

TEST_CASE("apply_poisson: harmonic extension on the grid") {
    const BoundaryGrid bg = BoundaryGrid::circle(256);
    auto one = [](const BoundaryPoint&) { return 1.0; };
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        const double r = 0.85 * std::sqrt(rng.uniform_co());
        const double th = kTwoPi * rng.uniform_co();
        const Vec x(r * std::cos(th), r * std::sin(th));
        CHECK(apply_poisson(bg, one, x) == doctest::Approx(1.0).epsilon(1e-12));
        // coordinate functions are harmonic
        const double v = apply_poisson(bg, [](const BoundaryPoint& z) { return z.embed()[0]; }, x);
        CHECK(v == doctest::Approx(x[0]).epsilon(1e-6));
    }

    // positivity and the maximum principle
    auto g = [](const BoundaryPoint& z) { return z.embed()[0] > 0.0 ? 2.0 + z.embed()[1] : 0.1; };
    double lo = 1e30, hi = -1e30;
    for (const auto& z : bg.nodes) {
        lo = std::min(lo, g(z));
        hi = std::max(hi, g(z));
    }
    for (int i = 0; i < 20; ++i) {
        const double r = 0.97 * std::sqrt(rng.uniform_co());
        const double th = kTwoPi * rng.uniform_co();
        const Vec x(r * std::cos(th), r * std::sin(th));
        const double v = apply_poisson(bg, g, x);
        CHECK(v >= lo);
        CHECK(v <= hi);
        CHECK(v >= 0.0);
    }
}

TEST_CASE("refinement consistency on smooth data") {
    auto f = [](const Vec& y) { return std::exp(-y.norm2()) + 0.3 * y[0]; };
    const Vec x(0.35, -0.15);
    const double c = apply_green(InteriorGrid::disc(24, 48), f, x);
    const double fine = apply_green(InteriorGrid::disc(48, 96), f, x);
    CHECK(std::abs(fine - c) / std::abs(fine) < 0.01);

    auto g = [](const BoundaryPoint& z) { return std::cos(3.0 * z.angle()); };
    const double pc = apply_poisson(BoundaryGrid::circle(64), g, x);
    const double pf = apply_poisson(BoundaryGrid::circle(128), g, x);
    CHECK(std::abs(pf - pc) < 0.01 * std::max(1.0, std::abs(pf)));
}

TEST_CASE("weighted lp norms") {
    Domain d2(2);
    const std::vector<std::pair<Vec, double>> mu = {{Vec(0.0, 0.0), 1.0}};

    CHECK(lp_norm(d2, [](const Vec&) { return 0.0; }, 2.0, mu).value == doctest::Approx(0.0));

    for (double p : {1.0, 2.0, 2.9}) {
        const LpResult r = lp_norm(d2, [](const Vec&) { return 1.0; }, p, mu);
        CHECK(!r.diverged);
        CHECK(r.value == doctest::Approx(std::pow(0.5, 1.0 / p)).epsilon(2e-3));
    }

    // homogeneity and monotonicity
    auto f = [](const Vec& y) { return std::abs(y[0]) + 0.1; };
    auto f2 = [&](const Vec& y) { return 2.0 * f(y); };
    auto fbig = [&](const Vec& y) { return f(y) + 0.5; };
    const double n1 = lp_norm(d2, f, 1.7, mu, 48).value;
    CHECK(lp_norm(d2, f2, 1.7, mu, 48).value == doctest::Approx(2.0 * n1).epsilon(1e-10));
    CHECK(lp_norm(d2, fbig, 1.7, mu, 48).value > n1);

    // boundary-kernel integrand: finite below the critical power, flagged
    // divergent above it
    Domain dom(2);
    const Vec z(1.0, 0.0);
    auto pker = [&](const Vec& x) { return poisson_kernel(dom, x, z); };
    const LpResult ok = lp_norm(d2, pker, 2.9, mu, 96);
    CHECK(!ok.diverged);
    CHECK(std::isfinite(ok.value));
    const LpResult bad = lp_norm(d2, pker, 3.4, mu, 96);
    CHECK(bad.diverged);
}
