#pragma once

// Self-checks of the penalty and solver properties the method rests on:
// concavity orderings, limits of the coupled penalty, monotone descent,
// scale invariance and the noise floor. Used by `vbdeblur verify`.

#include <functional>
#include <string>
#include <vector>

namespace vbd::verify {

struct CheckResult {
    std::string name;
    std::string group;  // "priors", "penalty", "concavity" or "solver"
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct Check {
    std::string name;
    std::string group;
    std::function<CheckResult()> run;
};

const std::vector<Check>& all_checks();

// Checks whose name or group contains `filter` (all of them when empty).
std::vector<CheckResult> run_checks(const std::string& filter = {});

}  // namespace vbd::verify
