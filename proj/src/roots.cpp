#include "pcion/roots.hpp"

#include "pcion/errors.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pcion::roots {

double refine(const std::function<double(double)>& f, double a, double b, double fa, double fb)
{
    std::uintmax_t iters = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 3);
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    if (iters >= 200)
        throw ConvergenceError("root not converged in bracket [" + std::to_string(a) + ", " +
                               std::to_string(b) + "]");
    return 0.5 * (r.first + r.second);
}

namespace {

// Roots hidden in [a, b] where |f| shrinks toward one end without a sign
// change: minimize s f on the interval and split at the minimum.
void split_at_minimum(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, std::vector<double>& roots)
{
    if (fa == 0.0 || fb == 0.0 || std::signbit(fa) != std::signbit(fb))
        return;
    const double s = fa > 0.0 ? 1.0 : -1.0;
    auto g = [&](double x) { return s * f(x); };
    const auto mn = boost::math::tools::brent_find_minima(g, a, b, 40);
    if (mn.second < 0.0 && mn.first > a && mn.first < b) {
        const double fmid = s * mn.second;
        roots.push_back(refine(f, a, mn.first, fa, fmid));
        roots.push_back(refine(f, mn.first, b, fmid, fb));
    } else if (mn.second < 1e-13 && mn.first > a && mn.first < b) {
        // Touches zero within rounding: a degenerate pair, reported once.
        roots.push_back(mn.first);
    }
}

} // namespace

std::vector<double> find_all(const std::function<double(double)>& f,
                             const std::function<double(double)>& step, double x0, double x1)
{
    std::vector<double> roots;
    if (!(x1 > x0))
        return roots;
    const double span = x1 - x0;
    double xa = x0, fa = f(xa);
    if (fa == 0.0)
        roots.push_back(xa);
    double xm = 0.0, fm = 0.0;
    bool have_prev = false;
    while (xa < x1) {
        double xb = std::min(xa + std::max(step(xa), 1e-12 * span), x1);
        if (x1 - xb < 1e-12 * span)
            xb = x1;
        const double fb = f(xb);
        if (fb == 0.0) {
            roots.push_back(xb);
        } else if (fa != 0.0 && std::signbit(fa) != std::signbit(fb)) {
            roots.push_back(refine(f, xa, xb, fa, fb));
        } else if (have_prev && fa != 0.0 && fm != 0.0 && std::signbit(fm) == std::signbit(fa) &&
                   std::signbit(fa) == std::signbit(fb) && std::abs(fa) < std::abs(fm) &&
                   std::abs(fa) <= std::abs(fb)) {
            // The samples approach zero and recede: a root pair may hide
            // between xm and xb.
            split_at_minimum(f, xm, xb, fm, fb, roots);
        }
        // The end intervals have no outer neighbour for the extremum test.
        if (!have_prev && fb != 0.0 && std::abs(fb) > std::abs(fa))
            split_at_minimum(f, xa, xb, fa, fb, roots);
        if (xb >= x1 && have_prev && fa != 0.0 && std::abs(fb) < std::abs(fa))
            split_at_minimum(f, xa, xb, fa, fb, roots);
        xm = xa;
        fm = fa;
        xa = xb;
        fa = fb;
        have_prev = true;
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [&](double a, double b) { return std::abs(a - b) <= 1e-14 * span; }),
                roots.end());
    return roots;
}

} // namespace pcion::roots
