#include "doctest.h"

#include "usq/error.hpp"
#include "usq/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace usq;

namespace {

const RunOptions quiet{.workers = 1, .n_max = std::nullopt, .probe_convergence = false, .log = false};

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("usq_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

// Weakly driven qubit in a Rabi cavity, small enough to run in a fraction of a second.
const std::string kCustom = R"cfg(scenario = "custom"
name = "small"
n_max = 6

[model]
kind = "rabi"
omega_q = 1.0
coupling = 0.05

[dissipation]
channels = [ { label = "cavity", operator = "a", rate = 1e-2 } ]

[drive]
operator = "sigma_x"

[[drive.pulses]]
amplitude = 0.5
width = 2.0
center = "6 * tau"
carrier = "level(1)"

[time]
end = 30.0
dt = 0.5

[solver]
step = 0.005

[[frames]]
label = "rotating"
omega = 1.0

[[frames]]
label = "aligned"
omega = 1.0
phi = "auto"
)cfg";

} // namespace

TEST_SUITE("scenario") {
    TEST_CASE("config structure is validated") {
        CHECK_THROWS_AS(parse_scenario("n_max = 5\n"), ConfigError);
        CHECK_THROWS_AS(parse_scenario("scenario = \"fig9\"\n"), ConfigError);
        CHECK_THROWS_AS(parse_scenario("scenario = \"custom\"\nn_max = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_scenario("scenario = \"custom\"\nname = \"a/b\"\n"), ConfigError);
        CHECK_THROWS_AS(parse_scenario("scenario = \"custom\"\n", "yaml"), ConfigError);
        const auto cfg = parse_scenario("{\"scenario\": \"ground-sweep\"}", "json");
        CHECK(cfg.kind == ScenarioKind::ground_sweep);
        CHECK(cfg.name == "ground_sweep");
        CHECK(cfg.n_max == 40);

        const auto unknown_key = parse_scenario("scenario = \"custom\"\nbogus = 1\n");
        CHECK_THROWS_AS(run_scenario(unknown_key, quiet), ConfigError);
        const auto bad_rate = parse_scenario(
            "scenario = \"custom\"\nn_max = 4\n[dissipation]\nchannels = [{operator = \"a\", rate = -1}]\n");
        CHECK_THROWS_AS(run_scenario(bad_rate, quiet), ConfigError);
        const auto bad_op = parse_scenario(
            "scenario = \"custom\"\nn_max = 4\n[dissipation]\nchannels = [{operator = \"b\", rate = 1}]\n");
        CHECK_THROWS_AS(run_scenario(bad_op, quiet), ConfigError);
        const auto bad_symbol =
            parse_scenario("scenario = \"custom\"\nn_max = 4\n[time]\nend = \"nowhere * 2\"\n");
        CHECK_THROWS_AS(run_scenario(bad_symbol, quiet), ConfigError);
    }

    TEST_CASE("numbers are written with round-trip precision") {
        CHECK(format_number(0.1) == "0.1");
        CHECK(format_number(-2.5e-12) == "-2.5e-12");
        CHECK(format_number(1.0) == "1");
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1e3, 1e3);
        for (int i = 0; i < 1000; ++i) {
            const double v = u(rng) * std::pow(10.0, (i % 30) - 15);
            CHECK(std::stod(format_number(v)) == v);
        }
    }

    TEST_CASE("empty trajectory gives a header-only csv") {
        const SeriesTable empty{.label = "x", .frame = {}, .rows = {}};
        CHECK(format_series_csv(empty) == std::string(kSeriesHeader) + "\n");
        CHECK(parse_series_csv(format_series_csv(empty)).empty());
    }

    TEST_CASE("csv round trip preserves values and missing fields") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n(0.0, 1.0);
        SeriesTable table{.label = "x", .frame = {}, .rows = {}};
        for (int i = 0; i < 200; ++i) {
            SeriesRow r{.t = 0.1 * i};
            r.s1n_gen = n(rng);
            r.s2n_gen = n(rng) * 1e-9;
            if (i % 3 != 0) {
                r.s1n_std = n(rng);
                r.s2n_std = n(rng);
            }
            r.flux = std::abs(n(rng));
            if (i % 2 == 0) {
                r.pop_q = std::abs(n(rng));
            }
            table.rows.push_back(r);
        }
        const auto text = format_series_csv(table);
        CHECK(text.find('\r') == std::string::npos);
        const auto back = parse_series_csv(text);
        REQUIRE(back.size() == table.rows.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < back.size(); ++i) {
            const auto& a = table.rows[i];
            const auto& b = back[i];
            worst = std::max(worst, std::abs(a.t - b.t));
            for (auto m : {&SeriesRow::s1n_gen, &SeriesRow::s2n_gen, &SeriesRow::s1n_std, &SeriesRow::s2n_std,
                           &SeriesRow::flux, &SeriesRow::pop_q}) {
                REQUIRE((a.*m).has_value() == (b.*m).has_value());
                if (a.*m) {
                    worst = std::max(worst, std::abs(*(a.*m) - *(b.*m)));
                }
            }
        }
        CHECK(worst <= 1e-12);
    }

    TEST_CASE("malformed csv is rejected") {
        CHECK_THROWS_AS(parse_series_csv("t,a\n1,2\n"), ConfigError);
        CHECK_THROWS_AS(parse_series_csv(std::string(kSeriesHeader) + "\n1,2,3\n"), ConfigError);
        CHECK_THROWS_AS(parse_series_csv(std::string(kSeriesHeader) + "\n1,x,,,,,\n"), ConfigError);
        CHECK_THROWS_AS(parse_series_csv(std::string(kSeriesHeader) + "\n,1,,,,,\n"), ConfigError);
        CHECK_THROWS_AS(parse_series_csv(""), ConfigError);
    }

    TEST_CASE("small ground sweep at weak coupling is near zero") {
        const auto cfg = parse_scenario(R"cfg(scenario = "ground-sweep"
n_max = 20
[sweep.coupling]
min = 0.05
max = 0.05
count = 2
[sweep.detuning]
min = 0.0
max = 0.5
count = 2
)cfg");
        const auto r = run_scenario(cfg, quiet);
        REQUIRE(r.map);
        CHECK(r.map->values.size() == 4);
        for (double v : r.map->values) {
            CHECK(std::abs(v) < 5e-3);
        }
        CHECK(r.convergence["passed"] == true);
    }

    TEST_CASE("ground sweep is converged in the truncation") {
        SqueezingGrid grid{.couplings = linspace(0.05, 1.4, 4), .detunings = linspace(-0.5, 1.0, 4)};
        const auto a = ground_squeezing_map(grid, 40);
        const auto b = ground_squeezing_map(grid, 80);
        double worst = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
        }
        CHECK(worst < 1e-4);
    }

    TEST_CASE("ground sweep output does not depend on the worker count") {
        const std::string text = R"cfg(scenario = "ground-sweep"
n_max = 15
[sweep.coupling]
min = 0.1
max = 1.2
count = 7
[sweep.detuning]
min = -0.4
max = 0.8
count = 5
)cfg";
        const auto cfg = parse_scenario(text);
        RunOptions one = quiet;
        RunOptions three = quiet;
        three.workers = 3;
        CHECK(format_map_csv(*run_scenario(cfg, one).map) == format_map_csv(*run_scenario(cfg, three).map));
    }

    TEST_CASE("custom scenario runs, is deterministic and emits all files") {
        const auto cfg = parse_scenario(kCustom);
        const auto r1 = run_scenario(cfg, quiet);
        const auto r2 = run_scenario(cfg, quiet);
        REQUIRE(r1.series.size() == 2);
        CHECK(r1.series[0].rows.size() == 61);
        CHECK(format_series_csv(r1.series[0]) == format_series_csv(r2.series[0]));
        CHECK(format_series_csv(r1.series[1]) == format_series_csv(r2.series[1]));
        // Before the pulse the system sits in its dressed ground state.
        const auto& first = r1.series[0].rows.front();
        CHECK(std::abs(*first.s1n_gen) < 1e-10);
        CHECK(std::abs(*first.flux) < 1e-10);
        CHECK(r1.metrics["max_flux"].get<double>() > 1e-4);
        CHECK(r1.convergence["passed"] == true);
        CHECK(r1.metadata["trajectory"]["warnings"] == 0);
        // The aligned frame puts the strongest squeezing into S1.
        const auto& metrics = r1.metrics["frames"];
        CHECK(metrics["aligned"]["min_s1n_gen"].get<double>() <= metrics["rotating"]["min_s1n_gen"].get<double>());

        const auto dir = scratch_dir("emit");
        const auto paths = emit(r1, dir);
        REQUIRE(paths.size() == 4);
        CHECK(read_file(dir / "small_rotating.csv") == format_series_csv(r1.series[0]));
        CHECK(read_file(dir / "small.config.toml") == kCustom);
        const auto side = nlohmann::json::parse(read_file(dir / "small.json"));
        CHECK(side["config"]["text"] == kCustom);
        CHECK(side["scenario"] == "custom");
        CHECK(side["spectrum"]["levels"].size() == 8);
        CHECK(side["convergence"].contains("energy_delta"));
        CHECK(side.contains("wall_time_seconds"));
        const auto rows = parse_series_csv(read_file(dir / "small_aligned.csv"));
        REQUIRE(rows.size() == r1.series[1].rows.size());
        CHECK(rows.back().s2n_gen == r1.series[1].rows.back().s2n_gen);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("loading from a file keeps the bytes") {
        const auto dir = scratch_dir("load");
        std::filesystem::create_directories(dir);
        const std::string text = "scenario = \"custom\"\r\nn_max = 4   \n\n# trailing\n";
        {
            std::ofstream out(dir / "c.toml", std::ios::binary);
            out << text;
        }
        const auto cfg = load_scenario(dir / "c.toml");
        CHECK(cfg.text == text);
        CHECK_THROWS_AS(load_scenario(dir / "missing.toml"), ConfigError);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("emit reports the offending path") {
        const auto dir = scratch_dir("blocked");
        std::filesystem::create_directories(dir);
        {
            std::ofstream out(dir / "file");
            out << "x";
        }
        RunResult r;
        r.name = "n";
        r.config_text = "scenario = \"custom\"\n";
        r.config_format = "toml";
        CHECK_THROWS_WITH_AS(emit(r, dir / "file" / "sub"), doctest::Contains("file"), Error);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("two-photon scenario rejects the standard Rabi model") {
        const auto cfg = parse_scenario(R"cfg(scenario = "two-photon-rabi"
n_max = 8
[model]
coupling = 0.15
theta = 0.0
)cfg");
        CHECK_THROWS_AS(run_scenario(cfg, quiet), ConfigError);
    }

    TEST_CASE("cascade scenario rejects a coupling too weak for the two-photon transition") {
        const auto cfg = parse_scenario(R"cfg(scenario = "cascade-squeeze"
n_max = 8
[model]
coupling = 1e-7
)cfg");
        CHECK_THROWS_WITH_AS(run_scenario(cfg, quiet), doctest::Contains("too weak"), ConfigError);
    }

    TEST_CASE("cascade scenario needs two pulses") {
        const auto cfg = parse_scenario(R"cfg(scenario = "cascade-squeeze"
n_max = 8
[model]
coupling = 0.4
)cfg");
        CHECK_THROWS_AS(run_scenario(cfg, quiet), ConfigError);
    }
}
