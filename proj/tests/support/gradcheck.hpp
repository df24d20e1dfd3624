#pragma once

#include <cstdint>
#include <string>

#include "dimrank/model.hpp"

namespace dimrank::testing {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst;  // parameter name of the worst component
    std::size_t components = 0;
};

/// Draws one random configuration (weights, embeddings, context, label) in
/// double precision, away from ReLU kinks, and compares every analytic
/// gradient component against central differences of the scalar oracle.
GradCheckResult gradient_check(std::uint64_t seed, const ModelDims& dims, double step = 1e-5);

}  // namespace dimrank::testing
