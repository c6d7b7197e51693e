#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bcp {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Runs the embedded property suite (Laplacian structure, gradient checks,
// inverse-pair checks, ...) on generated instances. inject_fault flips a
// deliberate perturbation into one property's input so the failure path
// can be exercised.
std::vector<PropertyResult> run_selftest(std::uint64_t seed, bool inject_fault = false);

} // namespace bcp
