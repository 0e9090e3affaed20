#pragma once

#include "pcion/materials.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace pcion::bloch {

using cplx = std::complex<double>;

enum class Polarization { TE, TM };

std::string to_string(Polarization pol);

// Two-layer unit cell: a high-index layer of thickness d_h followed by a
// uniform low-index layer of thickness d_l. The low index is air unless a
// test needs a uniform medium.
struct Stack1D
{
    double d_h_nm = 50.0;
    double d_l_nm = 50.0;
    materials::IndexModel n_h = materials::IndexModel::constant(1.0);
    double n_l = 1.0;

    void validate() const;
    double period() const { return d_h_nm + d_l_nm; }
    double reciprocal() const;              // b_z = 2 pi / L, nm^-1
    double reciprocal_vector(int m) const;  // G_m = m b_z
};

struct KPoint
{
    double k_rho = 0.0;  // nm^-1
    double k_z = 0.0;    // nm^-1, first zone
    Polarization pol = Polarization::TE;

    void validate(const Stack1D& stack) const;
};

// cos(k_z L) - D(omega) with D the half-trace of the cell transfer matrix.
// Written in kappa^2 so evanescent layers need no branch choice.
double dispersion_residual(double omega_ev, const KPoint& k, const Stack1D& stack);

// Half-trace D(omega) alone, for a given transverse wavenumber.
double half_trace(double omega_ev, double k_rho, Polarization pol, const Stack1D& stack);

// Roots of the dispersion residual on (0, omega_max]. The scan grid depends
// only on the stack, omega_max and k_rho; the grid of n(omega) derivatives
// is built once per solver so repeated k-points are cheap.
class BandSolver
{
public:
    BandSolver(const Stack1D& stack, double omega_max_ev);

    std::vector<double> solve(const KPoint& k) const;

    // Number of solve() calls made by all solvers in this process.
    static std::uint64_t solve_count();

    const Stack1D& stack() const { return stack_; }
    double omega_max() const { return omega_max_; }

private:
    double slope_bound(double w0, double w1) const;
    double next_step(double w, double k_rho) const;

    Stack1D stack_;
    double omega_max_;
    double cap_;
    double omega_lo_ = 0.0;
    // Range-maximum table of |d(omega n_h)/d omega| over a fine uniform grid.
    std::vector<std::vector<double>> slope_levels_;
    double fine_step_ = 0.0;
};

std::vector<double> solve_bands(const KPoint& k, const Stack1D& stack, double omega_max_ev);

// Field inside one layer, local coordinate t in [0, d]:
//   F(t) = a exp(i kappa t) + b exp(-i kappa (t - d)),   Im kappa >= 0,
// where F is E_y (TE) or H_y (TM). Both exponentials are bounded by 1.
struct LayerField
{
    double z0 = 0.0;        // nm, start of the layer in the cell
    double d = 0.0;         // nm
    double eps = 1.0;
    cplx kappa;             // nm^-1
    cplx a, b;
};

struct ModeProfile
{
    KPoint k;
    double omega_ev = 0.0;
    double period = 0.0;
    std::array<LayerField, 2> layers;
    bool band_edge = false;  // |cos(k_z L)| within 1e-9 of 1

    // Cartesian field at z (any real z, Bloch-extended), with the in-plane
    // wavevector along x.
    std::array<cplx, 3> field(double z) const;
    // (1/L) int eps |E|^2 dz, closed form.
    double energy_norm() const;
    // (1/L) int |E_x|^2, |E_y|^2, |E_z|^2 dz, closed form.
    std::array<double, 3> mean_square() const;
    // (1/L) int |F|^2 dz for the solved scalar F (E_y or H_y).
    double primary_mean_square() const;
};

// Transfer-matrix Bloch eigenvector normalized to (1/L) int eps |E|^2 = 1/2.
// Throws InvalidArgument when omega is not on a band and ConvergenceError when
// the cell matrix is a multiple of the identity (eigenvector undetermined).
ModeProfile mode_profile(double omega_ev, const KPoint& k, const Stack1D& stack);

struct FourierCoefficients
{
    int m_max = 0;
    // Index m + m_max.
    std::vector<std::array<cplx, 3>> cartesian;
    // Amplitude along the polarization vector of k + G_m: E_y for TE, the
    // in-plane transverse projection for TM.
    std::vector<cplx> scalar;
    // Coefficients of the solved scalar F itself (E_y or H_y), which is
    // continuous across interfaces for both polarizations.
    std::vector<cplx> primary;

    cplx at(int m) const { return scalar.at(static_cast<std::size_t>(m + m_max)); }
};

// Closed-form layer integrals of exp(-i (k_z + G_m) z) times the field for
// |m| <= m_max. With `grow` set, m_max is doubled until the estimated tail of
// sum |scalar|^2 beyond m_max is below tail_tol of the total.
FourierCoefficients fourier_coefficients(const ModeProfile& profile, int m_max, bool grow = true,
                                         double tail_tol = 1e-6);

// Single coefficient E(G_m) components without building the full table.
std::array<cplx, 3> fourier_component(const ModeProfile& profile, int m);

// Polarization amplitude for reciprocal index m given the Cartesian components.
cplx polarization_amplitude(const ModeProfile& profile, int m, const std::array<cplx, 3>& e);

} // namespace pcion::bloch
