#include "run_config.hpp"

#include "vbdeblur/error.hpp"
#include "vbdeblur/io.hpp"

#include <cmath>

namespace vbd::cli {

json to_json_value(int v) { return v; }
json to_json_value(std::int64_t v) { return v; }
json to_json_value(std::uint64_t v) { return v; }
json to_json_value(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}
json to_json_value(bool v) { return v; }
json to_json_value(const std::string& v) { return v; }
json to_json_value(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(to_json_value(x));
    return a;
}
json to_json_value(const std::vector<std::string>& v) { return v; }

void from_json_value(const json& j, int& v) { v = j.get<int>(); }
void from_json_value(const json& j, std::int64_t& v) { v = j.get<std::int64_t>(); }
void from_json_value(const json& j, std::uint64_t& v) { v = j.get<std::uint64_t>(); }
void from_json_value(const json& j, double& v) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") v = std::numeric_limits<double>::infinity();
        else if (s == "-inf") v = -std::numeric_limits<double>::infinity();
        else if (s == "nan") v = std::numeric_limits<double>::quiet_NaN();
        else throw std::invalid_argument("expected a number, got '" + s + "'");
        return;
    }
    if (!j.is_number()) throw std::invalid_argument("expected a number");
    v = j.get<double>();
}
void from_json_value(const json& j, bool& v) { v = j.get<bool>(); }
void from_json_value(const json& j, std::string& v) { v = j.get<std::string>(); }
void from_json_value(const json& j, std::vector<double>& v) {
    if (!j.is_array()) throw std::invalid_argument("expected an array");
    v.clear();
    for (const auto& e : j) {
        double x = 0.0;
        from_json_value(e, x);
        v.push_back(x);
    }
}
void from_json_value(const json& j, std::vector<std::string>& v) { v = j.get<std::vector<std::string>>(); }

RunConfig::RunConfig(CLI::App& app, std::string command) : app_(app), command_(std::move(command)) {
    app_.add_option("--out", out_, "output directory")->capture_default_str();
    app_.add_option("--config", config_, "run-manifest JSON to re-execute; explicit flags override it");
}

json RunConfig::resolve() {
    if (!config_.empty()) {
        json j;
        try {
            j = json::parse(io::read_text(config_));
        } catch (const json::exception& e) {
            throw UsageError("config '" + config_ + "': " + e.what());
        }
        if (!j.is_object()) throw UsageError("config '" + config_ + "' must be a JSON object");
        if (j.contains("command") && j["command"] != command_)
            throw UsageError("config '" + config_ + "' is for command '" + j["command"].dump() + "'");
        for (const auto& [key, value] : j.items()) {
            if (key == "command") continue;
            const auto it = std::find_if(fields_.begin(), fields_.end(), [&](const Field& f) { return f.key == key; });
            if (it == fields_.end()) throw UsageError("config '" + config_ + "': unknown key '" + key + "'");
            if (it->opt->count() == 0) it->set(value);
        }
    }
    return manifest();
}

json RunConfig::manifest() const {
    json j;
    j["command"] = command_;
    for (const auto& f : fields_) j[f.key] = f.get();
    return j;
}

void SolverFlags::add_to(RunConfig& rc, bool with_mode) {
    rc.add("prior", prior, "jeffreys | affine:a,b | gg:p | gsm:w/v,...");
    if (with_mode) rc.add("mode", mode, "vb | map");
    rc.add("lambda", lambda, "schedule:beta,floor | learned:auto | learned:d");
    rc.add("max_iters", max_iters, "solver sweeps per pyramid level");
}

solver::SolverConfig SolverFlags::build() const {
    solver::SolverConfig cfg;
    try {
        cfg.prior = priors::parse(prior);
        cfg.mode = parse_mode(mode);
        cfg.lambda = parse_lambda_policy(lambda);
        cfg.max_iters = max_iters;
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

namespace {

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("bad number '" + s + "' in " + what);
}

}  // namespace

solver::LambdaPolicy parse_lambda_policy(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (kind == "schedule") {
        solver::Schedule s;
        if (!args.empty()) {
            const auto comma = args.find(',');
            if (comma == std::string::npos) throw UsageError("expected schedule:beta,floor, got '" + text + "'");
            s.beta = parse_number(args.substr(0, comma), "--lambda");
            s.floor = parse_number(args.substr(comma + 1), "--lambda");
        }
        if (!(s.beta > 1.0) || !(s.floor > 0.0)) throw UsageError("schedule needs beta > 1 and floor > 0");
        return s;
    }
    if (kind == "learned") {
        solver::Learned l;
        if (!args.empty() && args != "auto") {
            l.d = parse_number(args, "--lambda");
            if (!(*l.d >= 0.0)) throw UsageError("learned-lambda d must be >= 0");
        }
        return l;
    }
    throw UsageError("unknown lambda policy '" + text + "'");
}

std::string to_string(const solver::LambdaPolicy& policy) {
    if (const auto* s = std::get_if<solver::Schedule>(&policy))
        return "schedule:" + io::Csv::num(s->beta) + "," + io::Csv::num(s->floor);
    const auto& l = std::get<solver::Learned>(policy);
    return l.d ? "learned:" + io::Csv::num(*l.d) : "learned:auto";
}

solver::Mode parse_mode(const std::string& text) {
    if (text == "vb") return solver::Mode::vb;
    if (text == "map") return solver::Mode::map;
    throw UsageError("unknown mode '" + text + "' (expected vb or map)");
}

std::string to_string(solver::Mode mode) { return mode == solver::Mode::vb ? "vb" : "map"; }

void write_json(const fs::path& path, const json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

}  // namespace vbd::cli
