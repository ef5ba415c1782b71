// usq_cli: runs a scenario file and writes CSV series, a JSON sidecar and a
// copy of the configuration.
//
//   usq_cli run configs/two_photon.toml --out results --workers 4
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include "CLI11.hpp"
#include "usq/error.hpp"
#include "usq/scenario.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Output squeezing scenarios for ultrastrongly coupled cavity systems"};
    app.require_subcommand(1);

    std::string config;
    std::string out = "results";
    int workers = 0;
    int n_max = 0;
    bool probe = false;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "Run a scenario file (TOML, or JSON by extension)");
    run->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory")->capture_default_str();
    run->add_option("--workers", workers, "Worker threads (default: USQ_WORKERS or all cores)")
        ->check(CLI::PositiveNumber);
    run->add_option("--nmax", n_max, "Override the photon-number truncation")->check(CLI::Range(2, 400));
    run->add_flag("--probe-convergence", probe, "Re-run the dynamics at n_max + 10 and report the deltas");
    run->add_flag("-q,--quiet", quiet, "No progress output");

    CLI11_PARSE(app, argc, argv);

    try {
        const usq::ScenarioConfig cfg = usq::load_scenario(config);
        usq::RunOptions opts;
        if (workers > 0) {
            opts.workers = workers;
        }
        if (n_max > 0) {
            opts.n_max = n_max;
        }
        opts.probe_convergence = probe;
        opts.log = !quiet;
        const usq::RunResult result = usq::run_scenario(cfg, opts);
        for (const auto& path : usq::emit(result, out)) {
            std::cout << path.string() << '\n';
        }
        if (!result.convergence.value("passed", true)) {
            std::cerr << "warning: truncation convergence check above tolerance\n";
        }
        return 0;
    } catch (const usq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const usq::StepTooLarge& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const usq::InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const usq::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
