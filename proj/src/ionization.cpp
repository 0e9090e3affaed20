#include "pcion/ionization.hpp"

#include "pcion/constants.hpp"
#include "pcion/errors.hpp"
#include "pcion/format.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pcion::ionization {

void OrbitalState::validate() const
{
    if (l < 0)
        throw InvalidArgument("orbital quantum number l must be non-negative");
    if (m < -l || m > l)
        throw InvalidArgument("magnetic quantum number must satisfy |m| <= l");
}

double angular_average(const OrbitalState& s)
{
    s.validate();
    if (s.l == 0)
        return 1.0 / 3.0;
    const double l = s.l, m = s.m;
    return (2.0 * l * l + 2.0 * l - 1.0 - 2.0 * m * m) / ((2.0 * l - 1.0) * (2.0 * l + 3.0));
}

double delta_m_state(const qed::MassCoefficients& c, const OrbitalState& s)
{
    return c.a_ev + c.b_ev * angular_average(s);
}

MinimalMass delta_m_min(const qed::MassCoefficients& c)
{
    if (c.b_ev < 0.0)
        return {c.a_ev + c.b_ev, 0.0};
    return {c.a_ev, 0.5 * Constants::pi};
}

double ionization_shift(const qed::MassCoefficients& c, const OrbitalState& s)
{
    // A drops out exactly: both terms are taken relative to it.
    const double b = c.b_ev;
    const double lowest = b < 0.0 ? b : 0.0;
    return lowest - b * angular_average(s);
}

std::vector<ReportRow> shifted_table(std::span<const AtomRecord> atoms, double shift_ev)
{
    if (atoms.empty())
        throw InvalidArgument("atom list is empty");
    if (!std::isfinite(shift_ev))
        throw InvalidArgument("ionization shift must be finite");
    std::vector<ReportRow> rows;
    for (const auto& a : atoms) {
        if (!(a.e_ion_ev > 0.0))
            throw InvalidArgument("ionization energy of " + a.symbol + " must be positive");
        ReportRow r{a.symbol, a.e_ion_ev, shift_ev, a.e_ion_ev + shift_ev,
                    std::abs(shift_ev) > 0.5 * a.e_ion_ev};
        if (!(r.e_pc_ev > 0.0))
            throw InvalidArgument("shifted ionization energy of " + a.symbol +
                                  " is not positive; outside the perturbative regime");
        rows.push_back(r);
    }
    return rows;
}

std::vector<AtomRecord> read_atoms(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open atom table " + path.string());
    std::vector<AtomRecord> out;
    std::string line;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        if (!header) {
            if (line != "symbol,E_ion_ev")
                throw ConfigError(path.string() + ": expected header 'symbol,E_ion_ev'");
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        AtomRecord a;
        a.symbol = line.substr(0, comma);
        if (!parse_number(line.substr(comma + 1), a.e_ion_ev) || !(a.e_ion_ev > 0.0))
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": bad ionization energy");
        out.push_back(a);
    }
    if (out.empty())
        throw ConfigError(path.string() + ": no atoms");
    return out;
}

std::string report_csv(std::span<const ReportRow> rows)
{
    std::ostringstream os;
    os << "symbol,E_ion_vacuum_ev,dE_ion_ev,E_ion_pc_ev,flag\n";
    for (const auto& r : rows)
        os << r.symbol << ',' << fixed(r.e_vacuum_ev, 6) << ',' << fixed(r.shift_ev, 6) << ','
           << fixed(r.e_pc_ev, 6) << ',' << (r.outside_perturbative ? "nonperturbative" : "ok")
           << '\n';
    return os.str();
}

} // namespace pcion::ionization
