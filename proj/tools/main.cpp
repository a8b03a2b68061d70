#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "ipw/errors.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// One line on stderr: `ipw: error kind=<kind> exit=<code> message="<text>"`.
int fail(const char* kind, int code, const std::string& what) {
    std::string message;
    for (char c : what) {
        if (c == '\n' || c == '\r') message += ' ';
        else if (c == '"' || c == '\\') message += {'\\', c};
        else message += c;
    }
    std::cerr << "ipw: error kind=" << kind << " exit=" << code << " message=\"" << message << "\"\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ion-photon entanglement workbench"};
    app.set_version_flag("--version", "ipw " IPW_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool gnuplot = false;
    app.add_option("--config", config_path, "Configuration file (sectioned key = value)");
    auto* out_opt = app.add_option("--out", out_dir, "Output directory");
    auto* seed_opt = app.add_option("--seed", seed, "Base seed");
    app.add_flag("--gnuplot", gnuplot, "Write a gnuplot script next to each CSV");

    auto* bloch = app.add_subcommand("bloch", "Double-excitation error versus pi-pulse duration");
    auto* aperture = app.add_subcommand("aperture", "Solid angle versus polarization-mixing trade-off curves");
    auto* g2 = app.add_subcommand("g2", "Photon statistics");
    g2->require_subcommand(1);
    g2->fallthrough();
    auto* simulate = g2->add_subcommand("simulate", "Simulate a click stream, write it, then analyze it");
    auto* analyze = g2->add_subcommand("analyze", "Analyze an existing click-stream file (binary or CSV)");
    std::string input;
    analyze->add_option("input", input, "Click-stream file")->required();
    auto* entangle = app.add_subcommand("entangle", "Fringes and fidelities for the full aperture and both stops");
    auto* config = app.add_subcommand("config", "Print every configuration key with its default and meaning");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", kExitValidation, e.what());
    }

    if (config->parsed()) {
        ipw::cli::write_documented_defaults(std::cout);
        return 0;
    }

    ipw::cli::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = ipw::cli::load_config(config_path);
        if (out_opt->count()) cfg.out_dir = out_dir;
        if (seed_opt->count()) cfg.seed = seed;
        if (gnuplot) cfg.gnuplot = true;
        cfg.validate();
    } catch (const ipw::ValidationError& e) {
        return fail("validation", kExitValidation, e.what());
    }

    try {
        if (bloch->parsed()) ipw::cli::cmd_bloch(cfg, std::cout);
        else if (aperture->parsed()) ipw::cli::cmd_aperture(cfg, std::cout);
        else if (simulate->parsed()) ipw::cli::cmd_g2_simulate(cfg, std::cout);
        else if (analyze->parsed()) ipw::cli::cmd_g2_analyze(cfg, input, std::cout);
        else if (entangle->parsed()) ipw::cli::cmd_entangle(cfg, std::cout);
    } catch (const ipw::ValidationError& e) {
        return fail("validation", kExitValidation, e.what());
    } catch (const ipw::DataError& e) {
        return fail("data", kExitRuntime, e.what());
    } catch (const ipw::NumericalError& e) {
        return fail("numerical", kExitRuntime, e.what());
    } catch (const std::exception& e) {
        return fail("runtime", kExitRuntime, e.what());
    }
    return 0;
}
