// Command-line driver: configured runs, convergence studies and the
// verification suites.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgwave/checks.hpp"
#include "sgwave/config.hpp"
#include "sgwave/runner.hpp"

namespace {

int print_results(const std::vector<sgw::CheckResult>& results) {
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] criterion %d: %s — %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.details.c_str());
        all = all && r.pass;
    }
    return all ? 0 : 3;
}

sgw::json load_config(const std::string& path, std::uint64_t seed_override, bool has_seed) {
    std::ifstream in(path);
    sgw::json doc = in ? sgw::json::parse(in) : sgw::builtin_config(path);
    if (has_seed) doc["seed"] = seed_override;
    return doc;
}

int do_run(const std::string& config, const std::string& out, std::uint64_t seed, bool has_seed,
           unsigned threads, const std::string& diag, const std::string& measure_file) {
    sgw::json doc = load_config(config, seed, has_seed);
    if (!diag.empty()) {
        sgw::json sel = sgw::json::array();
        std::stringstream ss(diag);
        std::string name;
        while (std::getline(ss, name, ',')) sel.push_back({{"name", name}});
        doc["diagnostics"] = sel;
    }
    if (!measure_file.empty()) doc["noise"] = {{"file", measure_file}};
    sgw::Experiment ex = sgw::parse_experiment(doc);
    sgw::json summary = sgw::run_experiment(ex, out, threads);
    std::printf("artifact written to %s (config %s)\n", out.c_str(),
                summary["config_hash"].get<std::string>().c_str());
    return 0;
}

int do_convergence(const std::string& config, const std::string& axis, int levels,
                   const std::string& out, std::uint64_t seed, bool has_seed) {
    namespace fs = std::filesystem;
    sgw::json doc = load_config(config, seed, has_seed);
    fs::create_directories(out);
    sgw::RateTable table = sgw::convergence_study(doc, axis, levels);
    sgw::write_rate_table(table, fs::path(out) / "rates.csv", axis);
    if (axis == "m")
        std::printf("axis m: distance slope %.3f\n", table.order);
    else
        std::printf("axis %s: fitted order %.3f\n", axis.c_str(), table.order);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic wave simulator on sphere targets"};
    app.require_subcommand(1);

    std::string config, out = "out", axis = "dt", diag, measure_file;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    int levels = 3;
    bool has_seed = false;

    auto add_common = [&](CLI::App* cmd, bool need_config) {
        auto* opt = cmd->add_option("--config", config, "config file or builtin preset name");
        if (need_config) opt->required();
        cmd->add_option("--out", out, "artifact directory");
        cmd->add_option("--seed", seed, "master seed override")
            ->each([&](const std::string&) { has_seed = true; });
        cmd->add_option("--threads", threads, "worker threads for ensembles");
    };

    auto* run = app.add_subcommand("run", "execute one configured experiment");
    add_common(run, true);
    run->add_option("--diag", diag, "comma-separated diagnostic selection");
    run->add_option("--spectral-measure", measure_file, "noise measure file (atom list)");

    auto* conv = app.add_subcommand("convergence", "refinement study along one axis");
    add_common(conv, true);
    conv->add_option("--axis", axis, "dt, h or m");
    conv->add_option("--levels", levels, "number of geometric levels");

    auto* noise = app.add_subcommand("noise-test", "noise-law verification suite");
    auto* geom = app.add_subcommand("geometry-test", "geometry-identity verification suite");
    auto* energy = app.add_subcommand("energy-check", "energy-inequality verification suite");
    add_common(noise, false);
    add_common(geom, false);
    add_common(energy, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return do_run(config, out, seed, has_seed, threads, diag, measure_file);
        if (conv->parsed()) return do_convergence(config, axis, levels, out, seed, has_seed);
        if (noise->parsed()) return print_results({sgw::checks::noise_law()});
        if (geom->parsed())
            return print_results(
                {sgw::checks::geometry_identities(), sgw::checks::reconstruction(0)});
        if (energy->parsed()) return print_results({sgw::checks::energy_inequality()});
    } catch (const sgw::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const sgw::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const sgw::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
