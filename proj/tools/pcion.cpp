#include "pcion/errors.hpp"
#include "pcion/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace pcion;

int main(int argc, char** argv)
{
    CLI::App app{"Electron mass and ionization-energy corrections in a 1D layered medium"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<int> figure;
    std::optional<int> workers;

    auto* run = app.add_subcommand("run", "compute A, B and the ionization table for one config");
    run->add_option("--config", config_path, "JSON config")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--figure", figure, "plot script to emit (2, 3 or 4)")
        ->check(CLI::IsMember({2, 3, 4}));
    run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

    auto* sw = app.add_subcommand("sweep", "evaluate the config's sweep grid");
    sw->add_option("--config", config_path, "JSON config")->required();
    sw->add_option("--out", out_dir, "output directory")->required();
    sw->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pipeline::kConfigError;
    }

    pipeline::RunConfig config;
    try {
        config = pipeline::load_config(config_path);
        if (workers) {
            config.workers = *workers;
            config.cutoff.workers = *workers;
        }
    } catch (const std::exception& e) {
        const int code = pipeline::exit_code_for(e);
        const auto text = pipeline::error_json(e, code);
        std::cerr << text << '\n';
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (!ec)
            std::ofstream(std::filesystem::path(out_dir) / "error.json") << text << '\n';
        return code;
    }
    if (run->parsed())
        return pipeline::run(config, out_dir, figure);
    return pipeline::sweep(config, out_dir);
}
