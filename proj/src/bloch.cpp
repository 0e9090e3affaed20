#include "pcion/bloch.hpp"

#include "pcion/constants.hpp"
#include "pcion/errors.hpp"
#include "pcion/roots.hpp"


#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace pcion::bloch {

namespace {

constexpr double hbar_c = Constants::hbar_c_ev_nm;
constexpr double kPhaseStep = 0.2;  // max phase advance per layer between scan points

std::atomic<std::uint64_t> g_solves{0};

// Layer propagator on the state (F, F'/chi), written as
//   exp(scale) * [[c, chi*ds], [-kappa2*ds/chi, c]].
// For evanescent layers the growing exponential is factored into `scale`.
struct LayerMatrix
{
    double c = 1.0;
    double ds = 0.0;  // d * sin(kappa d) / (kappa d), or the sinh analogue
    double kappa2 = 0.0;
    double chi = 1.0;
    double scale = 0.0;
};

LayerMatrix layer_matrix(double k0, double n, double d, double k_rho, double chi)
{
    LayerMatrix m;
    m.chi = chi;
    m.kappa2 = k0 * k0 * n * n - k_rho * k_rho;
    const double x = m.kappa2 * d * d;
    if (x >= 0.0) {
        const double r = std::sqrt(x);
        m.c = std::cos(r);
        m.ds = r < 1e-4 ? d * (1.0 - x / 6.0) : d * std::sin(r) / r;
    } else {
        const double r = std::sqrt(-x);
        if (r < 1e-4) {
            m.c = 1.0 - x / 2.0;
            m.ds = d * (1.0 - x / 6.0);
        } else {
            const double e2 = std::exp(-2.0 * r);
            m.c = 0.5 * (1.0 + e2);
            m.ds = d * 0.5 * (1.0 - e2) / r;
            m.scale = r;
        }
    }
    return m;
}

struct CellTrace
{
    double d_scaled = 0.0;  // D exp(-scale)
    double scale = 0.0;
    double magnitude = 0.0; // size of the largest term, scaled the same way
};

CellTrace cell_trace(double omega_ev, double k_rho, Polarization pol, const Stack1D& stack)
{
    const double k0 = omega_ev / hbar_c;
    const double nh = stack.n_h(omega_ev);
    const double eh = nh * nh, el = stack.n_l * stack.n_l;
    const double chi_h = pol == Polarization::TM ? eh : 1.0;
    const double chi_l = pol == Polarization::TM ? el : 1.0;
    const auto h = layer_matrix(k0, nh, stack.d_h_nm, k_rho, chi_h);
    const auto l = layer_matrix(k0, stack.n_l, stack.d_l_nm, k_rho, chi_l);
    const double rho = chi_h / chi_l;
    const double t1 = h.c * l.c;
    const double t2 = 0.5 * h.ds * l.ds * (rho * l.kappa2 + h.kappa2 / rho);
    return {t1 - t2, h.scale + l.scale, std::max(std::abs(t1), std::abs(t2))};
}

// Clamped so that deeply evanescent cells give a huge but finite value with
// the right sign.
double residual_from(const CellTrace& t, double cos_kl)
{
    constexpr double big = 1e300;
    if (t.scale == 0.0)
        return cos_kl - t.d_scaled;
    if (t.scale > 690.0)
        return t.d_scaled > 0.0 ? -big : big;
    return std::clamp(cos_kl - t.d_scaled * std::exp(t.scale), -big, big);
}

void require_finite(double v, const char* what)
{
    if (!std::isfinite(v))
        throw InvalidArgument(std::string(what) + " must be finite");
}

// int_0^d exp(c t) dt
cplx exp_integral(cplx c, double d)
{
    const cplx x = c * d;
    if (std::abs(x) < 1e-2) {
        return d * (1.0 + x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120 + x / 720.0)))));
    }
    return (std::exp(x) - 1.0) / c;
}

// Same, given exp(c d) already.
cplx exp_integral(cplx c, double d, cplx exp_cd)
{
    const cplx x = c * d;
    if (std::abs(x) < 1e-2)
        return exp_integral(c, d);
    return (exp_cd - 1.0) / c;
}

cplx layer_kappa(double kappa2, double d)
{
    const double floor_k = 1e-6 / d;
    if (kappa2 >= 0.0)
        return {std::max(std::sqrt(kappa2), floor_k), 0.0};
    const double g = std::sqrt(-kappa2);
    if (g < floor_k)
        return {floor_k, 0.0};
    return {0.0, g};
}

// Amplitudes from the state (F, F'/chi) at the start of the layer.
void amplitudes_from_start(LayerField& L, double chi, cplx F, cplx u)
{
    const cplx i(0.0, 1.0);
    const cplx w = chi * u / (i * L.kappa);
    const cplx e = std::exp(i * L.kappa * L.d);
    L.a = 0.5 * (F + w);
    L.b = 0.5 * (F - w) / e;
}

// Amplitudes of an evanescent layer from the field values at both ends.
void amplitudes_from_ends(LayerField& L, cplx FA, cplx FB)
{
    const double e = std::exp(-L.kappa.imag() * L.d);
    const double den = 1.0 - e * e;
    L.a = (FA - FB * e) / den;
    L.b = (FB - FA * e) / den;
}

bool two_ended(const LayerField& L) { return L.kappa.imag() * L.d > 2.0; }

struct LayerIntegrals
{
    double i11 = 0.0;  // int |e1|^2 = int |e2|^2
    cplx i12;          // int e1 conj(e2)
};

LayerIntegrals layer_integrals(const LayerField& L)
{
    const cplx i(0.0, 1.0);
    LayerIntegrals out;
    const double g = L.kappa.imag();
    out.i11 = exp_integral(cplx(-2.0 * g, 0.0), L.d).real();
    const cplx kc = std::conj(L.kappa);
    out.i12 = std::exp(-i * kc * L.d) * exp_integral(i * (L.kappa + kc), L.d);
    return out;
}

// (int |a e1 + s b e2|^2) for s = +1 / -1.
double combo_norm(const LayerField& L, const LayerIntegrals& I, double s)
{
    return std::norm(L.a) * I.i11 + std::norm(L.b) * I.i11 +
           2.0 * s * (L.a * std::conj(L.b) * I.i12).real();
}

} // namespace

std::string to_string(Polarization pol) { return pol == Polarization::TE ? "TE" : "TM"; }

void Stack1D::validate() const
{
    if (!(d_h_nm > 0.0) || !(d_l_nm > 0.0) || !std::isfinite(d_h_nm) || !std::isfinite(d_l_nm))
        throw InvalidArgument("layer thicknesses must be positive and finite");
    if (!(n_l > 0.0) || !std::isfinite(n_l))
        throw InvalidArgument("low-index layer index must be positive");
}

double Stack1D::reciprocal() const { return 2.0 * Constants::pi / period(); }

double Stack1D::reciprocal_vector(int m) const { return m * reciprocal(); }

void KPoint::validate(const Stack1D& stack) const
{
    require_finite(k_rho, "k_rho");
    require_finite(k_z, "k_z");
    if (k_rho < 0.0)
        throw InvalidArgument("k_rho must be non-negative");
    if (std::abs(k_z) > Constants::pi / stack.period() + 1e-12)
        throw InvalidArgument("k_z must lie in the first Brillouin zone");
}

double half_trace(double omega_ev, double k_rho, Polarization pol, const Stack1D& stack)
{
    require_finite(omega_ev, "omega");
    require_finite(k_rho, "k_rho");
    const auto t = cell_trace(omega_ev, k_rho, pol, stack);
    return t.scale == 0.0 ? t.d_scaled : t.d_scaled * std::exp(t.scale);
}

double dispersion_residual(double omega_ev, const KPoint& k, const Stack1D& stack)
{
    require_finite(omega_ev, "omega");
    require_finite(k.k_rho, "k_rho");
    require_finite(k.k_z, "k_z");
    if (omega_ev < 0.0)
        throw InvalidArgument("omega must be non-negative");
    const auto t = cell_trace(omega_ev, k.k_rho, k.pol, stack);
    return residual_from(t, std::cos(k.k_z * stack.period()));
}

// ---------------------------------------------------------------------------

BandSolver::BandSolver(const Stack1D& stack, double omega_max_ev)
    : stack_(stack), omega_max_(omega_max_ev)
{
    stack_.validate();
    if (!(omega_max_ > 0.0) || !std::isfinite(omega_max_))
        throw InvalidArgument("omega_max must be positive");
    cap_ = 0.1 * hbar_c * Constants::pi / stack_.period();

    // A pole at omega = 0 (Sellmeier form) keeps the scan off the origin.
    const bool pole = stack_.n_h.kind() == "sellmeier" && !stack_.n_h.is_vacuum();
    omega_lo_ = pole ? 1e-3 * omega_max_ : 0.0;

    const int n_fine = 8192;
    fine_step_ = (omega_max_ - omega_lo_) / n_fine;
    std::vector<double> wn(n_fine + 1);
    for (int i = 0; i <= n_fine; ++i) {
        const double w = omega_lo_ + i * fine_step_;
        wn[i] = w * stack_.n_h(w);
    }
    std::vector<double> base(n_fine);
    for (int i = 0; i < n_fine; ++i) {
        // Neighbouring secants guard against a peak inside one interval.
        double s = std::abs(wn[i + 1] - wn[i]) / fine_step_;
        if (i > 0)
            s = std::max(s, std::abs(wn[i] - wn[i - 1]) / fine_step_);
        if (i + 2 <= n_fine)
            s = std::max(s, std::abs(wn[i + 2] - wn[i + 1]) / fine_step_);
        base[i] = s;
    }
    slope_levels_.push_back(std::move(base));
    for (std::size_t w = 1; 2 * w <= static_cast<std::size_t>(n_fine); w *= 2) {
        const auto& prev = slope_levels_.back();
        std::vector<double> next(prev.size() - w);
        for (std::size_t i = 0; i < next.size(); ++i)
            next[i] = std::max(prev[i], prev[i + w]);
        slope_levels_.push_back(std::move(next));
    }
}

std::uint64_t BandSolver::solve_count() { return g_solves.load(); }

double BandSolver::slope_bound(double w0, double w1) const
{
    const auto& lvl0 = slope_levels_.front();
    const int n = static_cast<int>(lvl0.size());
    int i0 = static_cast<int>(std::floor((w0 - omega_lo_) / fine_step_));
    int i1 = static_cast<int>(std::floor((w1 - omega_lo_) / fine_step_));
    i0 = std::clamp(i0, 0, n - 1);
    i1 = std::clamp(i1, i0, n - 1);
    const int len = i1 - i0 + 1;
    int level = 0;
    while ((2 << level) <= len)
        ++level;
    const auto& t = slope_levels_[level];
    return std::max(t[i0], t[i1 - (1 << level) + 1]);
}

double BandSolver::next_step(double w, double k_rho) const
{
    double h = cap_;
    const double nh = stack_.n_h(w);
    const double g_h = std::max(slope_bound(w, std::min(w + h, omega_max_)), 1e-12);
    const struct { double n, d, g; } layers[2] = {{nh, stack_.d_h_nm, g_h},
                                                   {stack_.n_l, stack_.d_l_nm, stack_.n_l}};
    for (const auto& L : layers) {
        const double wn = w * L.n;
        const double k0n = wn / hbar_c;
        const double kappa = std::sqrt(std::max(k0n * k0n - k_rho * k_rho, 0.0));
        const double delta = kPhaseStep / L.d;
        const double up = hbar_c * std::hypot(kappa + delta, k_rho) - wn;
        double allowed = up;
        if (kappa > delta)
            allowed = std::min(allowed, wn - hbar_c * std::hypot(kappa - delta, k_rho));
        h = std::min(h, allowed / L.g);
    }
    return std::max(h, 1e-12 * omega_max_);
}

std::vector<double> BandSolver::solve(const KPoint& k) const
{
    k.validate(stack_);
    g_solves.fetch_add(1, std::memory_order_relaxed);

    const double cos_kl = std::cos(k.k_z * stack_.period());
    auto f = [&](double w) { return residual_from(cell_trace(w, k.k_rho, k.pol, stack_), cos_kl); };
    auto step = [&](double w) { return next_step(w, k.k_rho); };
    auto out = roots::find_all(f, step, omega_lo_, omega_max_);
    // A root at omega = 0 is the static solution, not a band.
    out.erase(std::remove_if(out.begin(), out.end(), [](double w) { return w <= 0.0; }), out.end());
    return out;
}

std::vector<double> solve_bands(const KPoint& k, const Stack1D& stack, double omega_max_ev)
{
    return BandSolver(stack, omega_max_ev).solve(k);
}

// ---------------------------------------------------------------------------

ModeProfile mode_profile(double omega_ev, const KPoint& k, const Stack1D& stack)
{
    stack.validate();
    k.validate(stack);
    require_finite(omega_ev, "omega");
    if (!(omega_ev > 0.0))
        throw InvalidArgument("mode frequency must be positive");

    const double L = stack.period();
    const double cos_kl = std::cos(k.k_z * L);
    const auto tr = cell_trace(omega_ev, k.k_rho, k.pol, stack);
    {
        const double res = std::abs(cos_kl * std::exp(-std::min(tr.scale, 700.0)) - tr.d_scaled);
        if (res > 1e-8 * std::max(tr.magnitude, std::exp(-std::min(tr.scale, 700.0))))
            throw InvalidArgument("frequency " + std::to_string(omega_ev) + " eV is not on a band");
    }

    const double k0 = omega_ev / hbar_c;
    const double nh = stack.n_h(omega_ev);
    const double eh = nh * nh, el = stack.n_l * stack.n_l;
    const bool tm = k.pol == Polarization::TM;
    const double chi[2] = {tm ? eh : 1.0, tm ? el : 1.0};
    const auto mh = layer_matrix(k0, nh, stack.d_h_nm, k.k_rho, chi[0]);
    const auto ml = layer_matrix(k0, stack.n_l, stack.d_l_nm, k.k_rho, chi[1]);

    // Scaled cell matrix M = M_l M_h.
    auto mat = [](const LayerMatrix& m) {
        return std::array<double, 4>{m.c, m.chi * m.ds, -m.kappa2 * m.ds / m.chi, m.c};
    };
    const auto A = mat(mh), B = mat(ml);
    const std::array<double, 4> M = {B[0] * A[0] + B[1] * A[2], B[0] * A[1] + B[1] * A[3],
                                     B[2] * A[0] + B[3] * A[2], B[2] * A[1] + B[3] * A[3]};
    const cplx lambda = std::polar(1.0, k.k_z * L);
    const cplx lam_s = tr.scale > 700.0 ? cplx(0.0) : lambda * std::exp(-tr.scale);

    // Eigenvector of M for eigenvalue lambda from the better-conditioned row.
    const cplx r1a = M[1], r1b = lam_s - M[0];
    const cplx r2a = lam_s - M[3], r2b = M[2];
    const double n1 = std::hypot(std::abs(r1a), std::abs(r1b));
    const double n2 = std::hypot(std::abs(r2a), std::abs(r2b));
    const double mnorm = std::abs(M[0]) + std::abs(M[1]) + std::abs(M[2]) + std::abs(M[3]) +
                         std::abs(lam_s);
    if (std::max(n1, n2) < 1e-10 * mnorm)
        throw ConvergenceError("degenerate Bloch eigenproblem at band edge (cell matrix ~ identity)");
    const cplx F0 = n1 >= n2 ? r1a : r2a;
    const cplx u0 = n1 >= n2 ? r1b : r2b;

    ModeProfile p;
    p.k = k;
    p.omega_ev = omega_ev;
    p.period = L;
    p.band_edge = std::abs(std::abs(cos_kl) - 1.0) < 1e-9;
    auto& H = p.layers[0];
    auto& Lw = p.layers[1];
    H.z0 = 0.0;
    H.d = stack.d_h_nm;
    H.eps = eh;
    H.kappa = layer_kappa(mh.kappa2, H.d);
    Lw.z0 = stack.d_h_nm;
    Lw.d = stack.d_l_nm;
    Lw.eps = el;
    Lw.kappa = layer_kappa(ml.kappa2, Lw.d);

    // State at the h/l interface, carried through whichever layer is not
    // strongly evanescent.
    cplx F1, u1;
    if (!two_ended(H)) {
        const double s = mh.scale == 0.0 ? 1.0 : std::exp(mh.scale);
        F1 = s * (A[0] * F0 + A[1] * u0);
        u1 = s * (A[2] * F0 + A[3] * u0);
    } else {
        if (two_ended(Lw))
            throw InvalidArgument("no propagating layer: frequency is not on a band");
        const double s = ml.scale == 0.0 ? 1.0 : std::exp(ml.scale);
        // Inverse of the unit-determinant propagator.
        const cplx Fe = lambda * F0, ue = lambda * u0;
        F1 = s * (B[3] * Fe - B[1] * ue);
        u1 = s * (-B[2] * Fe + B[0] * ue);
    }

    if (two_ended(H))
        amplitudes_from_ends(H, F0, F1);
    else
        amplitudes_from_start(H, chi[0], F0, u0);
    if (two_ended(Lw))
        amplitudes_from_ends(Lw, F1, lambda * F0);
    else
        amplitudes_from_start(Lw, chi[1], F1, u1);

    const double norm = p.energy_norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw ConvergenceError("mode normalization failed");
    const double scale = std::sqrt(0.5 / norm);
    // Fix the global phase so the largest amplitude is real and positive.
    cplx ref = H.a;
    for (const auto* c : {&H.b, &Lw.a, &Lw.b})
        if (std::abs(*c) > std::abs(ref))
            ref = *c;
    const cplx phase = std::abs(ref) > 0.0 ? std::conj(ref) / std::abs(ref) : cplx(1.0);
    for (auto& layer : p.layers) {
        layer.a *= scale * phase;
        layer.b *= scale * phase;
    }
    return p;
}

std::array<cplx, 3> ModeProfile::field(double z) const
{
    const cplx i(0.0, 1.0);
    const double cells = std::floor(z / period);
    double t = z - cells * period;
    const cplx bloch = std::polar(1.0, k.k_z * period * cells);
    const LayerField& Ly = t < layers[0].d ? layers[0] : layers[1];
    t -= Ly.z0;
    const cplx e1 = std::exp(i * Ly.kappa * t);
    const cplx e2 = std::exp(-i * Ly.kappa * (t - Ly.d));
    const cplx F = Ly.a * e1 + Ly.b * e2;
    if (k.pol == Polarization::TE)
        return {0.0, bloch * F, 0.0};
    const double w = omega_ev / hbar_c;
    const cplx ex = Ly.kappa * (Ly.a * e1 - Ly.b * e2) / (w * Ly.eps);
    const cplx ez = -k.k_rho * F / (w * Ly.eps);
    return {bloch * ex, 0.0, bloch * ez};
}

std::array<double, 3> ModeProfile::mean_square() const
{
    std::array<double, 3> out{0.0, 0.0, 0.0};
    const double w = omega_ev / hbar_c;
    for (const auto& Ly : layers) {
        const auto I = layer_integrals(Ly);
        const double plus = combo_norm(Ly, I, 1.0);
        if (k.pol == Polarization::TE) {
            out[1] += plus;
        } else {
            const double minus = combo_norm(Ly, I, -1.0);
            const double f = 1.0 / (w * w * Ly.eps * Ly.eps);
            out[0] += std::norm(Ly.kappa) * minus * f;
            out[2] += k.k_rho * k.k_rho * plus * f;
        }
    }
    for (auto& v : out)
        v /= period;
    return out;
}

double ModeProfile::primary_mean_square() const
{
    double total = 0.0;
    for (const auto& Ly : layers)
        total += combo_norm(Ly, layer_integrals(Ly), 1.0);
    return total / period;
}

double ModeProfile::energy_norm() const
{
    double total = 0.0;
    const double w = omega_ev / hbar_c;
    for (const auto& Ly : layers) {
        const auto I = layer_integrals(Ly);
        const double plus = combo_norm(Ly, I, 1.0);
        if (k.pol == Polarization::TE) {
            total += Ly.eps * plus;
        } else {
            const double minus = combo_norm(Ly, I, -1.0);
            total += (std::norm(Ly.kappa) * minus + k.k_rho * k.k_rho * plus) / (w * w * Ly.eps);
        }
    }
    return total / period;
}

// ---------------------------------------------------------------------------

namespace {

// Per-layer pieces of the Fourier integral for one Q = k_z + G_m:
//   sum = a I(i(kappa - Q), d) + s b exp(-i Q d) I(i(kappa + Q), d),
// multiplied by exp(-i Q z0).
struct LayerSums
{
    cplx plus, minus;
};

LayerSums layer_sums(const LayerField& Ly, double Q)
{
    const cplx i(0.0, 1.0);
    const cplx I1 = exp_integral(i * (Ly.kappa - Q), Ly.d);
    const cplx I2 = exp_integral(i * (Ly.kappa + Q), Ly.d);
    const cplx front = std::polar(1.0, -Q * Ly.z0);
    const cplx back = std::polar(1.0, -Q * Ly.d);
    return {front * (Ly.a * I1 + Ly.b * back * I2), front * (Ly.a * I1 - Ly.b * back * I2)};
}

std::array<cplx, 3> assemble(const ModeProfile& p, const LayerSums (&s)[2])
{
    const double invL = 1.0 / p.period;
    if (p.k.pol == Polarization::TE)
        return {0.0, (s[0].plus + s[1].plus) * invL, 0.0};
    const double w = p.omega_ev / hbar_c;
    cplx ex = 0.0, ez = 0.0;
    for (int j = 0; j < 2; ++j) {
        const auto& Ly = p.layers[j];
        ex += Ly.kappa / (w * Ly.eps) * s[j].minus;
        ez += -p.k.k_rho / (w * Ly.eps) * s[j].plus;
    }
    return {ex * invL, 0.0, ez * invL};
}

} // namespace

cplx polarization_amplitude(const ModeProfile& p, int m, const std::array<cplx, 3>& e)
{
    if (p.k.pol == Polarization::TE)
        return e[1];
    const double q = p.k.k_z + m * 2.0 * Constants::pi / p.period;
    const double kg = std::hypot(q, p.k.k_rho);
    if (kg == 0.0)
        return e[0];
    return (q * e[0] - p.k.k_rho * e[2]) / kg;
}

std::array<cplx, 3> fourier_component(const ModeProfile& p, int m)
{
    const double Q = p.k.k_z + m * 2.0 * Constants::pi / p.period;
    const LayerSums s[2] = {layer_sums(p.layers[0], Q), layer_sums(p.layers[1], Q)};
    return assemble(p, s);
}

namespace {

void fill_table(const ModeProfile& p, int M, FourierCoefficients& out)
{
    const cplx i(0.0, 1.0);
    const double b = 2.0 * Constants::pi / p.period;
    out.m_max = M;
    out.cartesian.assign(2 * M + 1, {});
    out.scalar.assign(2 * M + 1, 0.0);
    out.primary.assign(2 * M + 1, 0.0);

    // Exponentials advance by a constant factor per step in m; restart from
    // direct evaluation every 64 steps to bound accumulated rounding.
    struct Rec
    {
        cplx e1, e2, front, back;     // exp(i(k-Q)d), exp(i(k+Q)d), exp(-iQ z0), exp(-iQd)
        cplx s1, s2, sf, sb;          // per-step factors
    };
    auto start = [&](const LayerField& Ly, double Q) {
        Rec r;
        r.e1 = std::exp(i * (Ly.kappa - Q) * Ly.d);
        r.e2 = std::exp(i * (Ly.kappa + Q) * Ly.d);
        r.front = std::polar(1.0, -Q * Ly.z0);
        r.back = std::polar(1.0, -Q * Ly.d);
        r.s1 = std::polar(1.0, -b * Ly.d);
        r.s2 = std::polar(1.0, b * Ly.d);
        r.sf = std::polar(1.0, -b * Ly.z0);
        r.sb = r.s1;
        return r;
    };
    Rec rec[2];
    for (int m = -M; m <= M; ++m) {
        const double Q = p.k.k_z + m * b;
        if ((m + M) % 64 == 0) {
            rec[0] = start(p.layers[0], Q);
            rec[1] = start(p.layers[1], Q);
        }
        LayerSums s[2];
        for (int j = 0; j < 2; ++j) {
            const auto& Ly = p.layers[j];
            auto& r = rec[j];
            const cplx I1 = exp_integral(i * (Ly.kappa - Q), Ly.d, r.e1);
            const cplx I2 = exp_integral(i * (Ly.kappa + Q), Ly.d, r.e2);
            s[j] = {r.front * (Ly.a * I1 + Ly.b * r.back * I2),
                    r.front * (Ly.a * I1 - Ly.b * r.back * I2)};
            r.e1 *= r.s1;
            r.e2 *= r.s2;
            r.front *= r.sf;
            r.back *= r.sb;
        }
        const auto e = assemble(p, s);
        out.cartesian[m + M] = e;
        out.scalar[m + M] = polarization_amplitude(p, m, e);
        out.primary[m + M] = (s[0].plus + s[1].plus) / p.period;
    }
}

} // namespace

FourierCoefficients fourier_coefficients(const ModeProfile& p, int m_max, bool grow, double tail_tol)
{
    if (m_max < 1)
        throw InvalidArgument("m_max must be >= 1");
    const double b = 2.0 * Constants::pi / p.period;
    int M = m_max;
    if (grow) {
        double kmax = std::abs(p.k.k_z);
        for (const auto& Ly : p.layers)
            kmax = std::max(kmax, std::abs(Ly.kappa));
        M = std::max(M, static_cast<int>(std::ceil(2.0 * kmax / b)) + 4);
    }
    FourierCoefficients out;
    for (;;) {
        fill_table(p, M, out);
        if (!grow)
            return out;
        double total = 0.0, last = 0.0;
        for (int m = -M; m <= M; ++m)
            total += std::norm(out.scalar[m + M]);
        for (int m = (3 * M) / 4; m <= M; ++m)
            last = std::max(last, std::norm(out.scalar[M + m]) + std::norm(out.scalar[M - m]));
        // Coefficients of a field with a kinked derivative fall as m^-2, so
        // the shells beyond M sum to about M/3 times the last shell.
        const double tail = last * M / 3.0;
        if (tail <= tail_tol * total || total == 0.0)
            return out;
        if (M > (1 << 15))
            throw ConvergenceError("Fourier series did not converge within 65536 shells");
        M *= 2;
    }
}

} // namespace pcion::bloch
