#pragma once

// Reference computations written independently of the library: plain loops
// over raw arrays, double precision, no shared helpers.

#include <cstdint>
#include <functional>
#include <vector>

namespace dimrank::testing {

/// Raw network parameters, laid out the obvious way.
struct RawNet {
    std::size_t n = 0, m = 0, p = 0, h = 0;
    std::vector<std::vector<double>> w1;  // h rows of n + m + p
    std::vector<double> b1, w2;
    double b2 = 0;
};

/// sigmoid(w2 . relu(W1 x + b1) + b2) with x = [u; d; c], accumulated in
/// long double.
long double oracle_score(const RawNet& net, const std::vector<double>& u, const std::vector<double>& d,
                    const std::vector<double>& c);

/// magnitude * BCE.
long double oracle_loss(long double p, int target, double magnitude);

/// Central difference of f around x[i] with step h; restores x[i].
long double central_difference(const std::function<long double()>& f, double& xi, double h);

/// Relative error with a floor on the denominator so values near zero are
/// compared absolutely.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Area under the ROC curve by pair counting; ties count half.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace dimrank::testing
