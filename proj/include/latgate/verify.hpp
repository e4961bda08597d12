#pragma once

#include <functional>
#include <string>

#include "latgate/dynamics.hpp"

namespace latgate {

struct VerifyOptions {
    IntegratorOpts integ;
    std::uint64_t seed = 7;
    std::function<void(const std::string&)> report = nullptr;  // per-check line
};

struct VerifyCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Fast acceptance subset: noiseless echo cancellation, rotation-composition
// equivalence, perturbative-vs-exact phase consistency, estimator round
// trips.  Returns the per-check outcomes.
std::vector<VerifyCheck> run_verify(const VerifyOptions& opts = {});

}  // namespace latgate
