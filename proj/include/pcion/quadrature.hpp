#pragma once

#include <span>
#include <vector>

namespace pcion::quadrature {

// Gauss-Legendre rule on [-1, 1].
struct GaussRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Nodes by Newton iteration on P_n from the Chebyshev guess; exact for
// polynomials of degree 2n - 1.
GaussRule gauss_legendre(int order);

// Rule mapped onto [a, b], appended to (nodes, weights).
void append_mapped(const GaussRule& rule, double a, double b, std::vector<double>& nodes,
                   std::vector<double>& weights);

// Pairwise (tree) summation in index order. The result depends only on the
// values and their order, never on how they were produced.
double pairwise_sum(std::span<const double> values);

} // namespace pcion::quadrature
