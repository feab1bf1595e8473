#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "sbx/config.hpp"
#include "sbx/manifest.hpp"

using namespace sbx;

namespace {
const char* kMinimal =
    "d = 2\n"
    "beta = 0.5\n"
    "n = 1000\n"
    "dt = 1e-4\n"
    "mu = (0,0):1\n"
    "seed = 7\n";
}

TEST_CASE("minimal config is accepted") {
    const RunConfig rc = parse_config_text(kMinimal);
    CHECK(rc.sim.d == 2);
    CHECK(rc.sim.beta == doctest::Approx(0.5));
    CHECK(rc.sim.n == 1000);
    CHECK(rc.sim.dt == doctest::Approx(1e-4));
    CHECK(rc.sim.seed == 7);
    REQUIRE(rc.sim.mu.size() == 1);
    CHECK(rc.sim.mu[0].second == doctest::Approx(1.0));
    CHECK(rc.experiment == "simulate");
}

TEST_CASE("constraint violations carry the line number and the constraint") {
    try {
        parse_config_text("d = 2\nbeta = 1.2\nmu = (0,0):1\n");
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("(0,1]") != std::string::npos);
    }

    try {
        parse_config_text(std::string(kMinimal) + "granularity = 3\n");
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(e.line == 7);
        CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
        CHECK(std::string(e.what()).find("granularity") != std::string::npos);
    }
}

TEST_CASE("density experiments outside the subcritical regime are rejected") {
    const std::string text =
        "d = 3\n"
        "beta = 1.0\n"
        "n = 100\n"
        "dt = 1e-3\n"
        "mu = (0,0,0):1\n"
        "experiment = density\n";
    try {
        parse_config_text(text);
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("1 + 2/beta") != std::string::npos);
    }
    // d = 3 with beta = 0.9 sits inside d < 1 + 2/beta = 3.22 and is fine,
    // with or without the density experiment
    CHECK_NOTHROW(parse_config_text(
        "d = 3\nbeta = 0.9\nn = 100\ndt = 1e-3\nmu = (0,0,0):1\nexperiment = density\n"));
    CHECK_NOTHROW(
        parse_config_text("d = 3\nbeta = 0.9\nn = 100\ndt = 1e-3\nmu = (0,0,0):1\n"));
}

TEST_CASE("atom lists and eps schedules") {
    const RunConfig rc = parse_config_text(
        "d = 2\nbeta = 0.7\nn = 10\ndt = 1e-3\n"
        "mu = (0,0):0.5, (0.3,-0.2):0.25\n"
        "eps_list = 0.2, 0.1, 0.05\n");
    REQUIRE(rc.sim.mu.size() == 2);
    CHECK(rc.sim.mu[1].first[0] == doctest::Approx(0.3));
    CHECK(rc.sim.mu[1].first[1] == doctest::Approx(-0.2));
    CHECK(rc.sim.mu[1].second == doctest::Approx(0.25));
    REQUIRE(rc.sim.eps_list.size() == 3);
    CHECK(rc.sim.eps_list[2] == doctest::Approx(0.05));

    CHECK_THROWS_AS(parse_config_text("d = 2\nbeta = 0.5\nmu = (1,0):1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("d = 3\nbeta = 0.5\nmu = (0,0):1\n"), ConfigError);
}

TEST_CASE("config hash is platform-stable and text-sensitive") {
    const std::string unix_text = "a = 1\nb = 2\n";
    const std::string dos_text = "a = 1\r\nb = 2\r\n";
    CHECK(config_hash(unix_text) == config_hash(dos_text));
    CHECK(config_hash(unix_text) != config_hash("a = 1\nb = 3\n"));
}

TEST_CASE("floats format deterministically and round-trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456.789012345, 0.0}) {
        const std::string s = fmt_double(v);
        CHECK(std::stod(s) == v);
        CHECK(fmt_double(v) == s);
    }
}
