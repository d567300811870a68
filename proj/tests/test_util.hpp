#pragma once

#include <doctest.h>

#include <functional>
#include <vector>

#include "psim/autodiff.hpp"
#include "psim/matrix.hpp"

namespace psim::testutil {

inline Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
    return m;
}

/// Builds a scalar graph from leaves and compares analytic gradients of every
/// leaf entry against central finite differences.
inline double fd_check(
    const std::function<ad::NodeId(ad::Tape&, const std::vector<ad::NodeId>&)>& build,
    std::vector<Matrix> inputs, double h = 1e-6) {
    auto eval = [&](const std::vector<Matrix>& ins) {
        ad::Tape t;
        std::vector<ad::NodeId> ids;
        for (const auto& m : ins) ids.push_back(t.leaf(m));
        ad::NodeId root = build(t, ids);
        return t.value(root)(0, 0);
    };

    ad::Tape t;
    std::vector<ad::NodeId> ids;
    for (const auto& m : inputs) ids.push_back(t.leaf(m));
    ad::NodeId root = build(t, ids);
    t.backward(root);

    double worst = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Matrix& g = t.grad(ids[i]);
        for (int r = 0; r < inputs[i].rows(); ++r)
            for (int c = 0; c < inputs[i].cols(); ++c) {
                std::vector<Matrix> plus = inputs, minus = inputs;
                plus[i](r, c) += h;
                minus[i](r, c) -= h;
                double fd = (eval(plus) - eval(minus)) / (2.0 * h);
                double ref = std::max({std::abs(fd), std::abs(g(r, c)), 1e-8});
                worst = std::max(worst, std::abs(fd - g(r, c)) / ref);
            }
    }
    return worst;
}

}  // namespace psim::testutil
