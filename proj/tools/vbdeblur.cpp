#include "commands.hpp"

#include "vbdeblur/error.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Blind deconvolution with a variational-Bayes image prior"};
    app.require_subcommand(1);
    auto commands = vbd::cli::make_commands(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    for (auto& cmd : commands) {
        if (!cmd->app()->parsed()) continue;
        try {
            return cmd->run();
        } catch (const vbd::cli::UsageError& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            return 2;
        } catch (const vbd::InvalidArgument& e) {
            std::cerr << "invalid input: " << e.what() << "\n";
            return 2;
        } catch (const vbd::DimensionError& e) {
            std::cerr << "invalid input: " << e.what() << "\n";
            return 2;
        } catch (const vbd::IoError& e) {
            std::cerr << "i/o error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
