#pragma once

#include <numbers>

namespace pcion {

// Single conversion point between natural units and the eV / nm pair used in
// every public interface.
struct Constants
{
    static constexpr double hbar_c_ev_nm = 197.3269804;   // eV nm
    static constexpr double fine_structure = 7.2973525693e-3;
    static constexpr double pi = std::numbers::pi;

    // Wavevector (nm^-1) <-> energy (eV).
    static constexpr double to_ev(double k_per_nm) { return k_per_nm * hbar_c_ev_nm; }
    static constexpr double to_per_nm(double e_ev) { return e_ev / hbar_c_ev_nm; }

    // Vacuum electromagnetic mass with a sharp energy cutoff, (4 alpha / 3 pi) Lambda.
    static constexpr double vacuum_mass_ev(double cutoff_ev)
    {
        return 4.0 * fine_structure / (3.0 * pi) * cutoff_ev;
    }
};

} // namespace pcion
