#pragma once

#include "run_config.hpp"

#include <memory>

namespace vbd::cli {

// A subcommand: registers its flags on construction, run() returns the exit status.
class Command {
public:
    virtual ~Command() = default;
    virtual int run() = 0;
    CLI::App* app() const { return app_; }

protected:
    Command(CLI::App& parent, const std::string& name, const std::string& help)
        : app_(parent.add_subcommand(name, help)), rc_(*app_, name) {}

    // Resolves --config, validates, writes run.json and returns the manifest.
    json start();

    CLI::App* app_;
    RunConfig rc_;
    std::uint64_t seed_ = 0;
};

std::vector<std::unique_ptr<Command>> make_commands(CLI::App& app);

}  // namespace vbd::cli
