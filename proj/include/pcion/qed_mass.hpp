#pragma once

#include "pcion/bloch.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pcion::qed {

// Which field component carries the geometric weight (k_Gz^2, 2k_rho^2 - k_Gz^2)/k^2.
// `in_plane`: the TM (p-polarized) amplitude, whose polarization vector tilts
// with k + G. `swapped`: the TE amplitude; kept only for comparison runs.
enum class Pairing { in_plane, swapped };

std::string to_string(Pairing p);
Pairing pairing_from_string(const std::string& s);

struct CutoffConfig
{
    double lambda_ev = 35.0;
    int order = 8;                 // Gauss-Legendre points per panel, both axes
    int m_start = 8;               // first G truncation; grown until the tail is small
    double fourier_tail = 1e-6;    // relative G-sum tail
    int grading_levels = 12;       // geometric panels toward k_z = 0 and k = 0
    int energy_shells = 7;
    Pairing pairing = Pairing::in_plane;
    bool refine = true;            // also evaluate at order 2N
    int workers = 1;

    void validate() const;
};

// Largest in-plane wavenumber carried by a mode below omega_max:
// max over omega <= omega_max of omega n_max(omega) / hbar c, nm^-1.
double k_rho_extent(const bloch::Stack1D& stack, double omega_max_ev);

struct Shell
{
    double omega_lo_ev = 0.0;
    double omega_hi_ev = 0.0;
    double a_ev = 0.0;   // PC side only, no subtraction
    double b_ev = 0.0;
};

// Integrated contributions of the modes with omega in [omega_lo, omega_hi)
// at one quadrature order. Pure data: reduce() turns it into eV.
struct GridSums
{
    int order = 0;
    double omega_lo_ev = 0.0;
    double omega_hi_ev = 0.0;
    std::size_t kz_nodes = 0;
    std::size_t nodes = 0;
    std::size_t modes = 0;
    // Per k_z node: k_z, weight, then per shell the inner integrals of the
    // A weight, the B weight and the direct ionization integrand.
    std::vector<double> kz;
    std::vector<double> kz_weight;
    std::vector<std::vector<double>> inner;  // [node][3 * shell + {0,1,2}]
    int shells = 0;
};

struct WindowIntegral
{
    double a_ev = 0.0;
    double b_ev = 0.0;
    double ionization_ev = 0.0;   // -(2 alpha / 3 pi) sum (w_TM (q^2 - 2 k_rho^2)/k^2 + w_TE)/omega^2
    std::vector<Shell> shells;
    std::size_t nodes = 0;
    std::size_t modes = 0;
};

// Band sampling on the breakpoint-adapted grid; every dispersion solve of a
// mass calculation happens here.
GridSums sample_window(const bloch::Stack1D& stack, const CutoffConfig& cutoff, int order,
                       double omega_lo_ev, double omega_hi_ev);

WindowIntegral reduce(const GridSums& sums);

struct MassCoefficients
{
    double a_ev = 0.0;
    double b_ev = 0.0;
    double tail_ev = 0.0;
    double lambda_ev = 0.0;
    double vacuum_ev = 0.0;         // subtracted (4 alpha / 3 pi) Lambda
    double refinement_delta = 0.0;  // |change| between orders N and 2N over max(|A|+|B|, tol_zero)
    double a_coarse_ev = 0.0;
    double b_coarse_ev = 0.0;
    double ionization_direct_ev = 0.0;
    std::vector<Shell> shells;
    std::size_t nodes = 0;
    std::size_t modes = 0;
    bool converged = true;
    std::string message;
};

// Tolerance below which A and B count as zero: 1e-4 (4 alpha / 3 pi) Lambda.
double tol_zero(double lambda_ev);

// Combine the sampled grids (fine last) into coefficients.
MassCoefficients assemble(const bloch::Stack1D& stack, const CutoffConfig& cutoff,
                          std::span<const GridSums> grids);

MassCoefficients compute_AB(const bloch::Stack1D& stack, const CutoffConfig& cutoff);

// Sampling orders used by compute_AB: {N} or {N, 2N}.
std::vector<int> sampling_orders(const CutoffConfig& cutoff);

// (2 alpha / 3 pi) C1 d_h / ((d_h + d_l) Lambda), eV.
double he_tail(double c1_ev2, double d_h_nm, double d_l_nm, double lambda_ev);

struct ElectronDirection
{
    double theta = 0.0;
    double phi = 0.0;

    void validate() const;
};

double delta_m(const MassCoefficients& c, const ElectronDirection& dir);

// (alpha / pi) Lambda <n>^2.
double estimate_mass_correction(double mean_index, double lambda_ev);

// Largest azimuthal TE x TM cross integral relative to the diagonal terms, over
// the given k-points, all bands below Lambda, |m| <= m_max and a fixed set of
// electron directions, using an n_phi-point azimuth rule.
double cross_term_residual(const bloch::Stack1D& stack, const CutoffConfig& cutoff,
                           std::span<const bloch::KPoint> samples, int m_max = 4,
                           int n_phi = 64);

} // namespace pcion::qed
