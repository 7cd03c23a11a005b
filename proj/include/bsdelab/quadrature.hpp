#pragma once

#include <cstddef>
#include <vector>

namespace bsdelab {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Nodes and weights for E[f(N)], N ~ N(0,1). Weights sum to one.
const QuadratureRule& gauss_hermite(std::size_t n);

// Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(std::size_t n);

} // namespace bsdelab
