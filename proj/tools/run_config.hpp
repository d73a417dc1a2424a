#pragma once

// Command parameters that live in two places at once: CLI flags and the
// run-manifest JSON. Every parameter is registered once as a key bound to a
// variable; --config fills keys that were not given on the command line.

#include "vbdeblur/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace vbd::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Bad flags, config keys or values. Exit status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json to_json_value(int v);
json to_json_value(std::int64_t v);
json to_json_value(std::uint64_t v);
json to_json_value(double v);  // non-finite values as "inf" / "-inf" / "nan"
json to_json_value(bool v);
json to_json_value(const std::string& v);
json to_json_value(const std::vector<double>& v);
json to_json_value(const std::vector<std::string>& v);

void from_json_value(const json& j, int& v);
void from_json_value(const json& j, std::int64_t& v);
void from_json_value(const json& j, std::uint64_t& v);
void from_json_value(const json& j, double& v);
void from_json_value(const json& j, bool& v);
void from_json_value(const json& j, std::string& v);
void from_json_value(const json& j, std::vector<double>& v);
void from_json_value(const json& j, std::vector<std::string>& v);

class RunConfig {
public:
    RunConfig(CLI::App& app, std::string command);

    // Registers --key (underscores become dashes) bound to `ref`.
    template <class T>
    CLI::Option* add(const std::string& key, T& ref, const std::string& help) {
        std::string flag = "--" + key;
        for (auto& c : flag) c = c == '_' ? '-' : c;
        CLI::Option* opt;
        if constexpr (std::is_same_v<T, bool>)
            opt = app_.add_flag(flag, ref, help);
        else
            opt = app_.add_option(flag, ref, help)->capture_default_str();
        if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<std::string>>)
            opt->delimiter(',');
        fields_.push_back({key, opt, [&ref] { return to_json_value(ref); },
                           [&ref, key](const json& j) {
                               try {
                                   from_json_value(j, ref);
                               } catch (const std::exception& e) {
                                   throw UsageError("config key '" + key + "': " + e.what());
                               }
                           }});
        return opt;
    }

    const std::string& command() const { return command_; }
    const fs::path& out() const { return out_; }
    fs::path out_path(const std::string& name) const { return out_ / name; }

    // Applies --config (if given) and returns the resolved manifest.
    json resolve();
    json manifest() const;

private:
    struct Field {
        std::string key;
        CLI::Option* opt;
        std::function<json()> get;
        std::function<void(const json&)> set;
    };

    CLI::App& app_;
    std::string command_;
    std::vector<Field> fields_;
    fs::path out_ = "vbdeblur-out";
    std::string config_;
};

// Solver flags shared by the estimation commands.
struct SolverFlags {
    std::string prior = "jeffreys";
    std::string mode = "vb";
    std::string lambda = "learned:auto";
    int max_iters = 100;

    void add_to(RunConfig& rc, bool with_mode = true);
    solver::SolverConfig build() const;
};

// "schedule:beta,floor" (or "schedule"), "learned:auto" (or "learned"), "learned:<d>".
solver::LambdaPolicy parse_lambda_policy(const std::string& text);
std::string to_string(const solver::LambdaPolicy& policy);
solver::Mode parse_mode(const std::string& text);
std::string to_string(solver::Mode mode);

void write_json(const fs::path& path, const json& j);

}  // namespace vbd::cli
