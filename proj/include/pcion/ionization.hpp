#pragma once

#include "pcion/qed_mass.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pcion::ionization {

struct OrbitalState
{
    int l = 0;
    int m = 0;

    void validate() const;
};

struct AtomRecord
{
    std::string symbol;
    double e_ion_ev = 0.0;
    OrbitalState valence{};
};

// <l m| cos^2 theta |l m> = (2l^2 + 2l - 1 - 2m^2) / ((2l - 1)(2l + 3)); 1/3 for l = 0.
double angular_average(const OrbitalState& s);

double delta_m_state(const qed::MassCoefficients& c, const OrbitalState& s);

struct MinimalMass
{
    double value_ev = 0.0;
    double theta = 0.0;
};

// Minimum of A + B cos^2 theta: theta = 0 when B < 0, otherwise pi/2.
MinimalMass delta_m_min(const qed::MassCoefficients& c);

// Minimal free-electron correction minus the bound-state expectation.
double ionization_shift(const qed::MassCoefficients& c, const OrbitalState& s);

struct ReportRow
{
    std::string symbol;
    double e_vacuum_ev = 0.0;
    double shift_ev = 0.0;
    double e_pc_ev = 0.0;
    bool outside_perturbative = false;  // |shift| > E_ion / 2
};

// Throws InvalidArgument when the list is empty or any shifted energy is <= 0.
std::vector<ReportRow> shifted_table(std::span<const AtomRecord> atoms, double shift_ev);

// `symbol,E_ion_ev` CSV with a header row; '#' lines are comments.
std::vector<AtomRecord> read_atoms(const std::filesystem::path& path);

// `symbol,E_ion_vacuum_ev,dE_ion_ev,E_ion_pc_ev,flag` text.
std::string report_csv(std::span<const ReportRow> rows);

} // namespace pcion::ionization
