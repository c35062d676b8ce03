#pragma once

#include <string>
#include <vector>

namespace deepsplit {

struct SelftestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fast property checks: RNG moments, gradient finite differences, Adam
/// recursion, Milstein identities, closed-form references and the Zakai
/// oracle on a Gaussian case. Runs in a few seconds.
std::vector<SelftestResult> run_selftest();

}  // namespace deepsplit
