#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sbx/checks.hpp"

using namespace sbx;

TEST_CASE("poisson-increment exponent table") {
    // branch p < (2+a)/2: exponent p
    const ExponentReport r1 = lemma41_check(1.0, 1.0);
    CHECK(r1.predicted == doctest::Approx(1.0));
    CHECK(std::abs(r1.fit.slope - 1.0) <= 0.15);
    CHECK(r1.stable);
    CHECK(r1.pass);

    // branch p > (2+a)/2: exponent 2 + a - p
    const ExponentReport r2 = lemma41_check(1.0, 2.5);
    CHECK(r2.predicted == doctest::Approx(0.5));
    CHECK(std::abs(r2.fit.slope - 0.5) <= 0.15);
    CHECK(r2.pass);

    // critical case: lower bound with slack only
    const ExponentReport rc = lemma41_check(1.0, 1.5);
    CHECK(rc.predicted_is_lower_bound);
    CHECK(rc.fit.slope >= rc.predicted - 0.2);
    CHECK(rc.pass);

    // zero separation integrates to zero by symmetry of the integrand
    CHECK(detail::poisson_bdry(0.3, 0.2) ==
          doctest::Approx(poisson_kernel(Domain(2), Vec(0.7 * std::cos(0.2), 0.7 * std::sin(0.2)),
                                         Vec(1.0, 0.0)))
              .epsilon(1e-12));
    const double coincident = detail::disc_integral(
        [&](double t, double th) {
            const double dp = detail::poisson_bdry(t, th - 0.7) - detail::poisson_bdry(t, th - 0.7);
            return t * std::pow(std::abs(dp), 2.5);
        },
        {0.7}, 1e-10, 1.3);
    CHECK(coincident == 0.0);

    CHECK_THROWS(lemma41_check(1.0, 3.5)); // p outside (0, 2+a)
    CHECK_THROWS(lemma41_check(1.0, 1.0, 1, 3));
}

TEST_CASE("reports are deterministic") {
    const ExponentReport a = lemma41_check(1.0, 2.5);
    const ExponentReport b = lemma41_check(1.0, 2.5);
    CHECK(a.fit.slope == b.fit.slope);
    for (std::size_t i = 0; i < a.lhs.size(); ++i) CHECK(a.lhs[i] == b.lhs[i]);
}

TEST_CASE("interior Lipschitz bound of the kernel increment") {
    const LipschitzReport rep = lemma41b_check(0.5, 6000);
    CHECK(rep.max_ratio > 0.0);
    CHECK(rep.stable);
    CHECK(rep.shape_consistent);
}

TEST_CASE("green-weighted increment exponents") {
    const ExponentReport r1 = lemma42_check(1.0);
    CHECK(std::abs(r1.fit.slope - 1.0) <= 0.15);
    CHECK(r1.pass);
    const ExponentReport r2 = lemma42_check(2.0);
    CHECK(r2.predicted == doctest::Approx(1.0));
    CHECK(std::abs(r2.fit.slope - 1.0) <= 0.15);
    CHECK(r2.pass);
    CHECK_THROWS(lemma42_check(3.1));
}

TEST_CASE("green-poisson compound integral: finite region and divergence flag") {
    const SupIntegralReport ok = bound39_check(2.9);
    CHECK(!ok.diverged);
    CHECK(ok.max_refinement_change <= 0.02);
    CHECK(ok.sup > 0.0);
    CHECK(ok.symmetric_ok);

    const SupIntegralReport bad = bound39_check(3.2);
    CHECK(bad.diverged);
}
