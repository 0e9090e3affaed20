#include "pcion/qed_mass.hpp"

#include "pcion/constants.hpp"
#include "pcion/errors.hpp"
#include "pcion/quadrature.hpp"
#include "pcion/roots.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace pcion::qed {

using bloch::KPoint;
using bloch::Polarization;
using bloch::Stack1D;

namespace {

constexpr double hbar_c = Constants::hbar_c_ev_nm;
constexpr double alpha = Constants::fine_structure;
constexpr double pi = Constants::pi;
constexpr double kPhaseStep = 0.2;
constexpr Polarization kPols[2] = {Polarization::TE, Polarization::TM};

// Largest k_rho step at fixed energy that advances every propagating layer
// phase by at most kPhaseStep.
double k_rho_step(double omega_ev, double k_rho, const Stack1D& stack, double cap)
{
    double h = cap;
    const double layers[2][2] = {{stack.n_h(omega_ev), stack.d_h_nm}, {stack.n_l, stack.d_l_nm}};
    for (const auto& L : layers) {
        const double k0n = omega_ev * L[0] / hbar_c;
        if (k_rho >= k0n)
            continue;
        const double kappa = std::sqrt(k0n * k0n - k_rho * k_rho);
        const double target = std::max(kappa - kPhaseStep / L[1], 0.0);
        h = std::min(h, std::sqrt(k0n * k0n - target * target) - k_rho);
    }
    return std::max(h, 1e-12 * cap);
}

double trace_at(double omega_ev, double k_rho, Polarization pol, const Stack1D& stack)
{
    return std::clamp(bloch::half_trace(omega_ev, k_rho, pol, stack), -1e300, 1e300);
}

struct Window
{
    double lo = 0.0;
    double hi = 0.0;
    double k_max = 0.0;
    std::vector<double> events;
};

Window make_window(const Stack1D& stack, double lo, double hi)
{
    Window w{lo, hi, k_rho_extent(stack, hi), {hi}};
    if (lo > 0.0)
        w.events.push_back(lo);
    if (const auto* t = std::get_if<materials::TabulatedIndex>(&stack.n_h.variant())) {
        const double r = t->rolloff_ev();
        if (r > lo && r < hi)
            w.events.push_back(r);
    }
    return w;
}

void sort_unique(std::vector<double>& v, double tol)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [&](double a, double b) { return b - a <= tol; }),
            v.end());
}

// k_z values where an energy event surface has a fold or touches k_rho = 0
// or k_rho = k_max: arccos of the half-trace at its stationary points.
std::vector<double> outer_breakpoints(const Stack1D& stack, const Window& w, int grading)
{
    const double L = stack.period();
    const double zone = pi / L;
    std::vector<double> pts = {-zone, 0.0, zone};
    for (int j = 1; j <= grading; ++j) {
        pts.push_back(zone * std::ldexp(1.0, -j));
        pts.push_back(-zone * std::ldexp(1.0, -j));
    }
    // A fold within rounding of |D| = 1 sits on the zone centre or edge, which
    // are breakpoints already; arccos would put a sliver panel next to them.
    auto add = [&](double d) {
        if (std::abs(d) < 1.0 - 1e-10) {
            const double kz = std::acos(d) / L;
            pts.push_back(kz);
            pts.push_back(-kz);
        }
    };
    const double cap = w.k_max / 64.0;
    for (double e : w.events) {
        for (auto pol : kPols) {
            auto D = [&](double kr) { return trace_at(e, kr, pol, stack); };
            std::vector<double> xs, ds;
            for (double x = 0.0;;) {
                xs.push_back(x);
                ds.push_back(D(x));
                if (x >= w.k_max)
                    break;
                x = std::min(x + k_rho_step(e, x, stack, cap), w.k_max);
            }
            add(ds.front());
            add(ds.back());
            for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
                const double l = ds[i] - ds[i - 1], r = ds[i + 1] - ds[i];
                if (!(l * r < 0.0))
                    continue;
                // Minimize s D; a maximum already above 1 (or minimum below
                // -1) cannot reach the allowed band.
                const double s = l > 0.0 ? -1.0 : 1.0;
                if (s * ds[i] <= -1.0)
                    continue;
                auto g = [&](double x) { return s * D(x); };
                const auto mn = boost::math::tools::brent_find_minima(g, xs[i - 1], xs[i + 1], 40);
                add(s * mn.second);
            }
        }
    }
    std::vector<double> kept;
    for (double p : pts)
        if (p >= -zone && p <= zone)
            kept.push_back(p);
    sort_unique(kept, 1e-9 * zone);
    return kept;
}

std::vector<double> inner_breakpoints(const Stack1D& stack, const Window& w, double kz)
{
    const double L = stack.period();
    std::vector<double> pts = {0.0, w.k_max};
    const double cos_kl = std::cos(kz * L);
    const double cap = w.k_max / 64.0;
    for (double e : w.events) {
        for (auto pol : kPols) {
            auto f = [&](double kr) { return cos_kl - trace_at(e, kr, pol, stack); };
            auto step = [&](double kr) { return k_rho_step(e, kr, stack, cap); };
            for (double r : roots::find_all(f, step, 0.0, w.k_max))
                pts.push_back(r);
        }
    }
    // Geometric panels around the light-cone apex near the zone center.
    const double a = std::abs(kz);
    if (a > 0.0) {
        const double top = std::min(w.k_max, 4.0 * stack.reciprocal());
        for (double x = 0.25 * a; x < top; x *= 2.0)
            pts.push_back(x);
    }
    sort_unique(pts, 1e-9 * w.k_max);
    return pts;
}

struct ModeWeights
{
    double a = 0.0, b = 0.0, ion = 0.0;
};

// G-resolved weights of the amplitude that carries the tilted polarization:
// sum |E(G)|^2 {k_Gz^2, 2 k_rho^2 - k_Gz^2, k_Gz^2 - 2 k_rho^2} / k_G^2.
ModeWeights tilted(const bloch::ModeProfile& p, const CutoffConfig& c)
{
    const auto fc = bloch::fourier_coefficients(p, c.m_start, true, c.fourier_tail);
    const double kr2 = p.k.k_rho * p.k.k_rho;
    std::vector<double> va, vb, vi;
    for (int m = -fc.m_max; m <= fc.m_max; ++m) {
        const double kg = p.k.k_z + 2.0 * pi * m / p.period;
        const double k2 = kr2 + kg * kg;
        const double e2 = std::norm(fc.at(m));
        va.push_back(e2 * kg * kg / k2);
        vb.push_back(e2 * (2.0 * kr2 - kg * kg) / k2);
        vi.push_back(e2 * (kg * kg - 2.0 * kr2) / k2);
    }
    return {quadrature::pairwise_sum(va), quadrature::pairwise_sum(vb),
            quadrature::pairwise_sum(vi)};
}

// Weights of the amplitude whose polarization stays in the layer plane:
// total power, entering A with +1 and B with -1.
ModeWeights flat(const bloch::ModeProfile& p, const CutoffConfig& c)
{
    double s = 0.0;
    if (p.k.pol == Polarization::TE) {
        s = p.primary_mean_square();
    } else {
        const auto fc = bloch::fourier_coefficients(p, c.m_start, true, c.fourier_tail);
        std::vector<double> v;
        for (const auto& e : fc.scalar)
            v.push_back(std::norm(e));
        s = quadrature::pairwise_sum(v);
    }
    return {s, -s, s};
}

ModeWeights mode_weights(const bloch::ModeProfile& p, const CutoffConfig& c)
{
    const bool te = p.k.pol == Polarization::TE;
    const bool use_tilted = (c.pairing == Pairing::in_plane) ? !te : te;
    return use_tilted ? tilted(p, c) : flat(p, c);
}

struct Sampler
{
    const Stack1D& stack;
    const CutoffConfig& cut;
    const Window& win;
    const bloch::BandSolver& solver;
    const quadrature::GaussRule& rule;
    int shells;

    // Inner k_rho integral at one k_z; fills 3 * shells values.
    void inner(double kz, std::vector<double>& out, std::size_t& nodes, std::size_t& modes) const
    {
        const auto bps = inner_breakpoints(stack, win, kz);
        std::vector<double> kr, wr;
        for (std::size_t i = 0; i + 1 < bps.size(); ++i)
            quadrature::append_mapped(rule, bps[i], bps[i + 1], kr, wr);
        const std::size_t bins = 3 * static_cast<std::size_t>(shells);
        std::vector<std::vector<double>> terms(bins, std::vector<double>(kr.size(), 0.0));
        const double width = win.hi - win.lo;
        for (std::size_t j = 0; j < kr.size(); ++j) {
            for (auto pol : kPols) {
                const KPoint k{kr[j], kz, pol};
                for (double w : solver.solve(k)) {
                    if (w < win.lo || w >= win.hi)
                        continue;
                    const auto prof = bloch::mode_profile(w, k, stack);
                    const auto mw = mode_weights(prof, cut);
                    const int s = std::clamp(
                        static_cast<int>(std::floor((w - win.lo) / width * shells)), 0, shells - 1);
                    const double f = wr[j] * kr[j] / (w * w);
                    terms[3 * s + 0][j] += f * mw.a;
                    terms[3 * s + 1][j] += f * mw.b;
                    terms[3 * s + 2][j] += f * mw.ion;
                    ++modes;
                }
            }
        }
        nodes += kr.size();
        out.resize(bins);
        for (std::size_t b = 0; b < bins; ++b)
            out[b] = quadrature::pairwise_sum(terms[b]);
    }
};

// Lower bound on the band count at the zone center from the optical phase at
// the window top; catches a scan that skips bands.
void check_band_count(const Stack1D& stack, const bloch::BandSolver& solver, double hi)
{
    const double phase = hi / hbar_c * (stack.n_h(hi) * stack.d_h_nm + stack.n_l * stack.d_l_nm);
    const KPoint k{0.0, 0.3 * pi / stack.period(), Polarization::TE};
    const auto n = static_cast<double>(solver.solve(k).size());
    const double expected = std::floor(phase / pi) - 1.0;
    if (n < expected)
        throw ConvergenceError("band count " + std::to_string(static_cast<int>(n)) +
                               " below empty-lattice estimate " +
                               std::to_string(static_cast<int>(expected)));
}

} // namespace

std::string to_string(Pairing p) { return p == Pairing::in_plane ? "in_plane" : "swapped"; }

Pairing pairing_from_string(const std::string& s)
{
    if (s == "in_plane")
        return Pairing::in_plane;
    if (s == "swapped")
        return Pairing::swapped;
    throw InvalidArgument("unknown pairing '" + s + "'");
}

void CutoffConfig::validate() const
{
    if (!(lambda_ev > 0.0) || !std::isfinite(lambda_ev))
        throw InvalidArgument("cutoff energy must be positive");
    if (order < 8)
        throw InvalidArgument("quadrature order must be at least 8");
    if (m_start < 1)
        throw InvalidArgument("m_start must be positive");
    if (!(fourier_tail > 0.0) || fourier_tail >= 1e-2)
        throw InvalidArgument("fourier_tail must be in (0, 1e-2)");
    if (grading_levels < 0 || grading_levels > 40)
        throw InvalidArgument("grading_levels must be in [0, 40]");
    if (energy_shells < 1 || energy_shells > 1000)
        throw InvalidArgument("energy_shells must be in [1, 1000]");
    if (workers < 1)
        throw InvalidArgument("workers must be positive");
}

double k_rho_extent(const Stack1D& stack, double omega_max_ev)
{
    const int n = 4096;
    double best = omega_max_ev * stack.n_l;
    for (int i = 1; i <= n; ++i) {
        const double w = omega_max_ev * i / n;
        best = std::max(best, w * stack.n_h(w));
    }
    // Margin for a peak between samples.
    return best * (1.0 + 1e-3) / hbar_c;
}

GridSums sample_window(const Stack1D& stack, const CutoffConfig& cutoff, int order,
                       double omega_lo_ev, double omega_hi_ev)
{
    stack.validate();
    cutoff.validate();
    if (!(omega_lo_ev >= 0.0) || !(omega_hi_ev > omega_lo_ev))
        throw InvalidArgument("energy window must satisfy 0 <= lo < hi");

    const Window win = make_window(stack, omega_lo_ev, omega_hi_ev);
    const bloch::BandSolver solver(stack, omega_hi_ev);
    check_band_count(stack, solver, omega_hi_ev);
    const auto rule = quadrature::gauss_legendre(order);

    GridSums out;
    out.order = order;
    out.omega_lo_ev = omega_lo_ev;
    out.omega_hi_ev = omega_hi_ev;
    out.shells = cutoff.energy_shells;

    const auto obp = outer_breakpoints(stack, win, cutoff.grading_levels);
    for (std::size_t i = 0; i + 1 < obp.size(); ++i)
        quadrature::append_mapped(rule, obp[i], obp[i + 1], out.kz, out.kz_weight);
    const std::size_t n = out.kz.size();
    out.kz_nodes = n;
    out.inner.assign(n, {});

    const Sampler sampler{stack, cutoff, win, solver, rule, cutoff.energy_shells};
    std::vector<std::size_t> nodes(n, 0), modes(n, 0);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                sampler.inner(out.kz[i], out.inner[i], nodes[i], modes[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int nw = std::min<int>(cutoff.workers, static_cast<int>(std::max<std::size_t>(n, 1)));
    if (nw <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nw; ++t)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    for (std::size_t i = 0; i < n; ++i) {
        out.nodes += nodes[i];
        out.modes += modes[i];
    }
    return out;
}

WindowIntegral reduce(const GridSums& sums)
{
    const double pre = alpha / pi * hbar_c * hbar_c * hbar_c;
    const double pre_ion = -2.0 * alpha / (3.0 * pi) * hbar_c * hbar_c * hbar_c;
    const std::size_t n = sums.kz.size();
    WindowIntegral r;
    r.nodes = sums.nodes;
    r.modes = sums.modes;
    const double width = (sums.omega_hi_ev - sums.omega_lo_ev) / sums.shells;
    std::vector<double> v(n), sa, sb, si;
    for (int s = 0; s < sums.shells; ++s) {
        double parts[3];
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < n; ++i)
                v[i] = sums.kz_weight[i] * sums.inner[i][3 * s + c];
            parts[c] = quadrature::pairwise_sum(v);
        }
        Shell sh;
        sh.omega_lo_ev = sums.omega_lo_ev + s * width;
        sh.omega_hi_ev = s + 1 == sums.shells ? sums.omega_hi_ev : sh.omega_lo_ev + width;
        sh.a_ev = pre * parts[0];
        sh.b_ev = pre * parts[1];
        r.shells.push_back(sh);
        sa.push_back(sh.a_ev);
        sb.push_back(sh.b_ev);
        si.push_back(pre_ion * parts[2]);
    }
    r.a_ev = quadrature::pairwise_sum(sa);
    r.b_ev = quadrature::pairwise_sum(sb);
    r.ionization_ev = quadrature::pairwise_sum(si);
    return r;
}

double tol_zero(double lambda_ev) { return 1e-4 * Constants::vacuum_mass_ev(lambda_ev); }

std::vector<int> sampling_orders(const CutoffConfig& cutoff)
{
    if (cutoff.refine)
        return {cutoff.order, 2 * cutoff.order};
    return {cutoff.order};
}

MassCoefficients assemble(const Stack1D& stack, const CutoffConfig& cutoff,
                          std::span<const GridSums> grids)
{
    if (grids.empty())
        throw InvalidArgument("no sampled grids");
    const double lam = cutoff.lambda_ev;
    MassCoefficients c;
    c.lambda_ev = lam;
    c.vacuum_ev = Constants::vacuum_mass_ev(lam);
    c.tail_ev = he_tail(stack.n_h.tail_c1(lam), stack.d_h_nm, stack.d_l_nm, lam);

    const auto fine = reduce(grids.back());
    c.a_ev = fine.a_ev - c.vacuum_ev + c.tail_ev;
    c.b_ev = fine.b_ev;
    c.ionization_direct_ev = fine.ionization_ev;
    c.shells = fine.shells;
    c.nodes = fine.nodes;
    c.modes = fine.modes;
    c.a_coarse_ev = c.a_ev;
    c.b_coarse_ev = c.b_ev;
    if (grids.size() > 1) {
        const auto coarse = reduce(grids.front());
        c.a_coarse_ev = coarse.a_ev - c.vacuum_ev + c.tail_ev;
        c.b_coarse_ev = coarse.b_ev;
        const double change = std::abs(c.a_ev - c.a_coarse_ev) + std::abs(c.b_ev - c.b_coarse_ev);
        const double scale = std::max(std::abs(c.a_ev) + std::abs(c.b_ev), tol_zero(lam));
        c.refinement_delta = change / scale;
    }
    // A change below the zero tolerance is below resolution either way.
    const double change = c.refinement_delta * std::max(std::abs(c.a_ev) + std::abs(c.b_ev), tol_zero(lam));
    if (c.refinement_delta > 0.05 && change > tol_zero(lam)) {
        c.converged = false;
        c.message = "grid refinement changed A, B by " +
                    std::to_string(100.0 * c.refinement_delta) + "%";
    }
    return c;
}

MassCoefficients compute_AB(const Stack1D& stack, const CutoffConfig& cutoff)
{
    std::vector<GridSums> grids;
    for (int order : sampling_orders(cutoff))
        grids.push_back(sample_window(stack, cutoff, order, 0.0, cutoff.lambda_ev));
    return assemble(stack, cutoff, grids);
}

double he_tail(double c1_ev2, double d_h_nm, double d_l_nm, double lambda_ev)
{
    if (!(lambda_ev > 0.0))
        throw InvalidArgument("cutoff energy must be positive");
    if (!(d_h_nm > 0.0) || !(d_l_nm >= 0.0))
        throw InvalidArgument("layer thicknesses must be positive");
    return 2.0 * alpha / (3.0 * pi) * c1_ev2 * d_h_nm / ((d_h_nm + d_l_nm) * lambda_ev);
}

void ElectronDirection::validate() const
{
    if (!(theta >= 0.0 && theta <= pi))
        throw InvalidArgument("theta must lie in [0, pi]");
    if (!std::isfinite(phi))
        throw InvalidArgument("phi must be finite");
}

double delta_m(const MassCoefficients& c, const ElectronDirection& dir)
{
    dir.validate();
    const double ct = std::cos(dir.theta);
    return c.a_ev + c.b_ev * ct * ct;
}

double estimate_mass_correction(double mean_index, double lambda_ev)
{
    if (!(mean_index >= 1.0))
        throw InvalidArgument("mean index must be at least 1");
    if (!(lambda_ev >= 0.0))
        throw InvalidArgument("cutoff energy must be non-negative");
    return alpha / pi * lambda_ev * mean_index * mean_index;
}

double cross_term_residual(const Stack1D& stack, const CutoffConfig& cutoff,
                           std::span<const KPoint> samples, int m_max, int n_phi)
{
    stack.validate();
    cutoff.validate();
    if (m_max < 0 || n_phi < 4)
        throw InvalidArgument("need m_max >= 0 and at least 4 azimuth points");
    const bloch::BandSolver solver(stack, cutoff.lambda_ev);
    const double dirs[][2] = {{0.0, 0.0}, {0.4, 0.3}, {pi / 4, 1.1}, {pi / 2, 2.0}, {2.5, -0.7}};
    double worst = 0.0;
    for (const auto& s : samples) {
        const auto te = solver.solve({s.k_rho, s.k_z, Polarization::TE});
        const auto tm = solver.solve({s.k_rho, s.k_z, Polarization::TM});
        const std::size_t nb = std::min(te.size(), tm.size());
        for (std::size_t band = 0; band < nb; ++band) {
            const auto p1 = bloch::mode_profile(te[band], {s.k_rho, s.k_z, Polarization::TE}, stack);
            const auto p2 = bloch::mode_profile(tm[band], {s.k_rho, s.k_z, Polarization::TM}, stack);
            for (int m = -m_max; m <= m_max; ++m) {
                const auto e1 = bloch::polarization_amplitude(p1, m, bloch::fourier_component(p1, m));
                const auto e2 = bloch::polarization_amplitude(p2, m, bloch::fourier_component(p2, m));
                const double kg = s.k_z + stack.reciprocal_vector(m);
                const double k = std::hypot(s.k_rho, kg);
                for (const auto& d : dirs) {
                    const double st = std::sin(d[0]), ct = std::cos(d[0]);
                    double cross = 0.0, diag = 0.0;
                    for (int j = 0; j < n_phi; ++j) {
                        const double phi = 2.0 * pi * j / n_phi;
                        // In-plane direction of k_rho at azimuth phi.
                        const double u = st * std::cos(d[1] - phi);   // I . k_rho-hat
                        const double v = st * std::sin(d[1] - phi);   // I . (z x k_rho-hat)
                        const double s_proj = v;
                        const double p_proj = (kg * u - s.k_rho * ct) / k;
                        const bloch::cplx a = s_proj * e1, b = p_proj * e2;
                        cross += 2.0 * std::real(a * std::conj(b));
                        diag += std::norm(a) + std::norm(b);
                    }
                    if (diag > 0.0)
                        worst = std::max(worst, std::abs(cross) / diag);
                }
            }
        }
    }
    return worst;
}

} // namespace pcion::qed
