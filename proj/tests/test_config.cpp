#include "doctest.h"

#include "usq/error.hpp"
#include "usq/expression.hpp"
#include "usq/toml.hpp"

#include <cmath>
#include <numbers>

using namespace usq;

TEST_SUITE("config") {
    TEST_CASE("toml scalars, tables and arrays") {
        const auto doc = parse_toml(R"(
# comment
scenario = "two-photon-rabi"   # trailing comment
n_max = 20
rate = 1.8e-4
big = 1_000
flag = true
literal = 'C:\path'
escaped = "a\tb\"c"
neg = -0.5
inf_val = inf

[model]
theta = "pi/6"
"quoted key" = 3
dotted.inner = 4

[[frames]]
label = "a"
omega = 1.0

[[frames]]
label = "b"
omega = 0.0

[dissipation]
channels = [
  { label = "cavity", operator = "a", rate = 2e-4 },
  { label = "qubit", operator = "sigma_minus", rate = 0 },   # trailing comma allowed
]
)");
        CHECK(doc["scenario"] == "two-photon-rabi");
        CHECK(doc["n_max"] == 20);
        CHECK(doc["rate"].get<double>() == doctest::Approx(1.8e-4));
        CHECK(doc["big"] == 1000);
        CHECK(doc["flag"] == true);
        CHECK(doc["literal"] == "C:\\path");
        CHECK(doc["escaped"] == "a\tb\"c");
        CHECK(doc["neg"].get<double>() == -0.5);
        CHECK(std::isinf(doc["inf_val"].get<double>()));
        CHECK(doc["model"]["theta"] == "pi/6");
        CHECK(doc["model"]["quoted key"] == 3);
        CHECK(doc["model"]["dotted"]["inner"] == 4);
        REQUIRE(doc["frames"].size() == 2);
        CHECK(doc["frames"][1]["label"] == "b");
        REQUIRE(doc["dissipation"]["channels"].size() == 2);
        CHECK(doc["dissipation"]["channels"][0]["operator"] == "a");
        CHECK(doc["dissipation"]["channels"][1]["rate"] == 0);
    }

    TEST_CASE("toml sub-tables of arrays of tables") {
        const auto doc = parse_toml("[[drive.pulses]]\nwidth = 1\n[[drive.pulses]]\nwidth = 2\n[drive]\noperator = \"sigma_x\"\n");
        REQUIRE(doc["drive"]["pulses"].size() == 2);
        CHECK(doc["drive"]["pulses"][1]["width"] == 2);
        CHECK(doc["drive"]["operator"] == "sigma_x");
    }

    TEST_CASE("toml errors carry line numbers") {
        CHECK_THROWS_WITH_AS(parse_toml("a = 1\nb = \n"), doctest::Contains("line 2"), ConfigError);
        CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), ConfigError);
        CHECK_THROWS_AS(parse_toml("a = \"unterminated\n"), ConfigError);
        CHECK_THROWS_AS(parse_toml("[table\n"), ConfigError);
        CHECK_THROWS_AS(parse_toml("a = 1 b = 2\n"), ConfigError);
        CHECK_THROWS_AS(parse_toml("a = [1, 2\n"), ConfigError);
    }

    TEST_CASE("expression arithmetic") {
        const ExpressionContext ctx{.symbols = {{"tau", 2.0}, {"T_R", 40.0}}, .spectrum = nullptr};
        CHECK(evaluate_expression("1 + 2 * 3", ctx) == 7.0);
        CHECK(evaluate_expression("(1 + 2) * 3", ctx) == 9.0);
        CHECK(evaluate_expression("-2 * -3", ctx) == 6.0);
        CHECK(evaluate_expression("T_R / 20", ctx) == 2.0);
        CHECK(evaluate_expression("8 * tau", ctx) == 16.0);
        CHECK(evaluate_expression("2.6e-2 / 2e-4", ctx) == doctest::Approx(130.0));
        CHECK(evaluate_expression("pi / 3", ctx) == doctest::Approx(std::numbers::pi / 3));
        CHECK(evaluate_expression("sqrt(2) / 2", ctx) == doctest::Approx(std::sqrt(0.5)));
        CHECK(evaluate_expression("atan(1) * 4", ctx) == doctest::Approx(std::numbers::pi));
    }

    TEST_CASE("expression spectrum functions") {
        // Empty cavity: E_k = k.
        const Spectrum s = diagonalize(number_op(6));
        const ExpressionContext ctx{.symbols = {}, .spectrum = &s};
        CHECK(evaluate_expression("level(3)", ctx) == doctest::Approx(3.0));
        CHECK(evaluate_expression("gap(1, 4)", ctx) == doctest::Approx(3.0));
        CHECK(evaluate_expression("midpoint(2, 3)", ctx) == doctest::Approx(2.5));
        CHECK_THROWS_AS(evaluate_expression("level(6)", ctx), ConfigError);
    }

    TEST_CASE("expression errors") {
        const ExpressionContext ctx;
        CHECK_THROWS_AS(evaluate_expression("unknown + 1", ctx), ConfigError);
        CHECK_THROWS_AS(evaluate_expression("1 +", ctx), ConfigError);
        CHECK_THROWS_AS(evaluate_expression("(1", ctx), ConfigError);
        CHECK_THROWS_AS(evaluate_expression("sqrt(1, 2)", ctx), ConfigError);
        CHECK_THROWS_AS(evaluate_expression("midpoint(2, 3)", ctx), ConfigError); // no spectrum
        CHECK_THROWS_AS(evaluate_expression("1 2", ctx), ConfigError);
    }
}
