#pragma once

#include <functional>
#include <vector>

namespace pcion::roots {

// All roots of f on [x0, x1] found by marching with the caller's step rule,
// splitting brackets at interior extrema that cross zero, and refining each
// bracket with TOMS 748 to near machine precision. Roots come back sorted.
//
// `step(x)` returns the largest safe step from x; it must keep at most two
// roots inside any three consecutive samples.
std::vector<double> find_all(const std::function<double(double)>& f,
                             const std::function<double(double)>& step, double x0, double x1);

// Root of f inside a sign-changing bracket.
double refine(const std::function<double(double)>& f, double a, double b, double fa, double fb);

} // namespace pcion::roots
