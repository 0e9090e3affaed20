#include "pcion/materials.hpp"

#include "pcion/errors.hpp"

// Boost 1.74 pchip calls isnan unqualified.
#include <math.h>

#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

namespace pcion::materials {

struct TabulatedIndex::Interpolant
{
    // Boost's pchip needs at least four knots; shorter tables use linear segments.
    std::optional<boost::math::interpolators::pchip<std::vector<double>>> pchip;
};

namespace {

void require_finite_nonnegative(double omega_ev)
{
    if (!std::isfinite(omega_ev))
        throw InvalidArgument("photon energy must be finite");
    if (omega_ev < 0.0)
        throw InvalidArgument("photon energy must be non-negative");
}

double linear_interp(std::span<const IndexSample> s, double w)
{
    auto it = std::upper_bound(s.begin(), s.end(), w,
                               [](double x, const IndexSample& p) { return x < p.omega_ev; });
    if (it == s.begin())
        return s.front().n;
    if (it == s.end())
        return s.back().n;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double t = (w - lo.omega_ev) / (hi.omega_ev - lo.omega_ev);
    return lo.n + t * (hi.n - lo.n);
}

std::string_view trim(std::string_view v)
{
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t' || v.front() == '\r'))
        v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r'))
        v.remove_suffix(1);
    return v;
}

double parse_double(std::string_view v, const std::filesystem::path& path, int line)
{
    v = trim(v);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(path.string() + ":" + std::to_string(line) + ": not a number: '" +
                          std::string(v) + "'");
    return out;
}

} // namespace

TabulatedIndex::TabulatedIndex(std::vector<IndexSample> samples, double rolloff_ev,
                               double rolloff_exponent)
    : samples_(std::move(samples)), rolloff_ev_(rolloff_ev), exponent_(rolloff_exponent)
{
    if (samples_.empty())
        throw InvalidArgument("index table is empty");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (!std::isfinite(s.omega_ev) || !std::isfinite(s.n))
            throw InvalidArgument("index table contains non-finite values");
        if (s.n <= 0.0)
            throw InvalidArgument("index table contains n <= 0");
        if (i > 0 && !(s.omega_ev > samples_[i - 1].omega_ev))
            throw InvalidArgument("index table energies must be strictly increasing");
    }
    if (!(rolloff_ev_ > 0.0) || !std::isfinite(rolloff_ev_))
        throw InvalidArgument("rolloff energy must be positive");
    if (!(exponent_ > 0.0) || !std::isfinite(exponent_))
        throw InvalidArgument("rolloff exponent must be positive");

    auto interp = std::make_shared<Interpolant>();
    if (samples_.size() >= 4) {
        std::vector<double> x, y;
        x.reserve(samples_.size());
        y.reserve(samples_.size());
        for (const auto& s : samples_) {
            x.push_back(s.omega_ev);
            y.push_back(s.n);
        }
        interp->pchip.emplace(std::move(x), std::move(y));
    }
    interp_ = std::move(interp);
    n_roll_ = interpolate(std::min(rolloff_ev_, samples_.back().omega_ev));
}

double TabulatedIndex::interpolate(double w) const
{
    if (w <= samples_.front().omega_ev)
        return samples_.front().n;
    if (w >= samples_.back().omega_ev)
        return samples_.back().n;
    if (interp_->pchip)
        return (*interp_->pchip)(w);
    return linear_interp(samples_, w);
}

double TabulatedIndex::operator()(double omega_ev) const
{
    if (omega_ev > rolloff_ev_)
        return 1.0 + (n_roll_ - 1.0) * std::pow(rolloff_ev_ / omega_ev, exponent_);
    return interpolate(omega_ev);
}

IndexModel IndexModel::constant(double n)
{
    if (!(n > 0.0) || !std::isfinite(n))
        throw InvalidArgument("constant index must be positive and finite");
    return IndexModel(ConstantIndex{n});
}

IndexModel IndexModel::sellmeier(double c1_ev2, double c2_ev4)
{
    if (!std::isfinite(c1_ev2) || !std::isfinite(c2_ev4))
        throw InvalidArgument("Sellmeier coefficients must be finite");
    if (c1_ev2 < 0.0 || c2_ev4 < 0.0)
        throw InvalidArgument("Sellmeier coefficients must be non-negative");
    return IndexModel(SellmeierTail{c1_ev2, c2_ev4});
}

IndexModel IndexModel::tabulated(std::vector<IndexSample> samples, double rolloff_ev,
                                 double rolloff_exponent)
{
    return IndexModel(TabulatedIndex(std::move(samples), rolloff_ev, rolloff_exponent));
}

double IndexModel::operator()(double omega_ev) const
{
    require_finite_nonnegative(omega_ev);
    const double base = std::visit(
        [omega_ev](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantIndex>) {
                return m.n;
            } else if constexpr (std::is_same_v<T, SellmeierTail>) {
                if (m.c1_ev2 == 0.0 && m.c2_ev4 == 0.0)
                    return 1.0;
                const double k2 = omega_ev * omega_ev;
                return 1.0 + m.c1_ev2 / k2 + m.c2_ev4 / (k2 * k2);
            } else {
                return m(omega_ev);
            }
        },
        model_);
    if (scale_ == 1.0)
        return base;
    return 1.0 + scale_ * (base - 1.0);
}

IndexModel IndexModel::scaled(double excess_scale) const
{
    if (!(excess_scale > 0.0) || !std::isfinite(excess_scale))
        throw InvalidArgument("index scale must be positive");
    IndexModel out = *this;
    out.scale_ *= excess_scale;
    return out;
}

std::string IndexModel::kind() const
{
    switch (model_.index()) {
    case 0: return "constant";
    case 1: return "sellmeier";
    default: return "tabulated";
    }
}

double IndexModel::tail_c1(double cutoff_ev) const
{
    if (!(cutoff_ev > 0.0))
        throw InvalidArgument("cutoff must be positive");
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantIndex>)
                return 0.0;
            else if constexpr (std::is_same_v<T, SellmeierTail>)
                return scale_ * m.c1_ev2;
            else
                return ((*this)(cutoff_ev) - 1.0) * cutoff_ev * cutoff_ev;
        },
        model_);
}

bool IndexModel::is_vacuum() const
{
    return std::visit(
        [](const auto& m) -> bool {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantIndex>)
                return m.n == 1.0;
            else if constexpr (std::is_same_v<T, SellmeierTail>)
                return m.c1_ev2 == 0.0 && m.c2_ev4 == 0.0;
            else
                return std::all_of(m.samples().begin(), m.samples().end(),
                                   [](const IndexSample& s) { return s.n == 1.0; });
        },
        model_);
}

void MetamaterialSpec::validate() const
{
    if (!(period_nm > 0.0) || !(gap_nm > 0.0))
        throw InvalidArgument("metamaterial period and gap must be positive");
    if (gap_nm > period_nm)
        throw InvalidArgument("metamaterial gap cannot exceed the period");
}

IndexModel build_effective_model(const MetamaterialSpec& spec,
                                 std::span<const PermittivitySample> dielectric,
                                 double rolloff_ev, double rolloff_exponent)
{
    spec.validate();
    if (dielectric.empty())
        throw InvalidArgument("dielectric table is empty");
    const double ratio = spec.enhancement();
    std::vector<IndexSample> out;
    out.reserve(dielectric.size());
    for (const auto& s : dielectric) {
        if (s.eps < 0.0)
            throw InvalidArgument("gap permittivity is negative at " + std::to_string(s.omega_ev) +
                                  " eV");
        out.push_back({s.omega_ev, std::sqrt(ratio * s.eps)});
    }
    return IndexModel::tabulated(std::move(out), rolloff_ev, rolloff_exponent);
}

double mean_index(const IndexModel& model, double omega_max_ev, double omega_min_ev)
{
    if (!(omega_max_ev > 0.0) || !std::isfinite(omega_max_ev))
        throw InvalidArgument("mean_index: upper energy must be positive");
    if (!(omega_min_ev >= 0.0) || !(omega_min_ev < omega_max_ev))
        throw InvalidArgument("mean_index: need 0 <= omega_min < omega_max");
    if (const auto* s = std::get_if<SellmeierTail>(&model.variant());
        s && omega_min_ev == 0.0 && (s->c1_ev2 != 0.0 || s->c2_ev4 != 0.0))
        throw InvalidArgument("mean_index: Sellmeier model has a pole at zero energy");

    // Integrate knot to knot so every piece is smooth.
    std::vector<double> breaks{omega_min_ev, omega_max_ev};
    if (const auto* t = std::get_if<TabulatedIndex>(&model.variant())) {
        for (const auto& s : t->samples())
            breaks.push_back(s.omega_ev);
        breaks.push_back(t->rolloff_ev());
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    using boost::math::quadrature::gauss_kronrod;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = breaks[i], hi = breaks[i + 1];
        if (hi <= omega_min_ev || lo >= omega_max_ev)
            continue;
        total += gauss_kronrod<double, 15>::integrate([&](double w) { return model(w); }, lo, hi,
                                                      20, 1e-9);
    }
    return total / (omega_max_ev - omega_min_ev);
}

std::vector<PermittivitySample> to_permittivity(std::span<const IndexSample> table)
{
    std::vector<PermittivitySample> out;
    out.reserve(table.size());
    for (const auto& s : table)
        out.push_back({s.omega_ev, s.n * s.n});
    return out;
}

std::vector<IndexSample> read_index_table(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open index table " + path.string());
    std::string line;
    int lineno = 0;
    bool header = false;
    std::vector<IndexSample> out;
    while (std::getline(in, line)) {
        ++lineno;
        auto v = trim(line);
        if (v.empty() || v.front() == '#')
            continue;
        if (!header) {
            if (v != "omega_ev,n")
                throw ConfigError(path.string() + ": expected header 'omega_ev,n'");
            header = true;
            continue;
        }
        const auto comma = v.find(',');
        if (comma == std::string_view::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected two columns");
        out.push_back({parse_double(v.substr(0, comma), path, lineno),
                       parse_double(v.substr(comma + 1), path, lineno)});
    }
    if (!header)
        throw ConfigError(path.string() + ": missing header");
    if (out.empty())
        throw ConfigError(path.string() + ": table has no rows");
    return out;
}

void write_index_table(const std::filesystem::path& path, std::span<const IndexSample> table)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << "omega_ev,n\n";
    char buf[64];
    for (const auto& s : table) {
        auto r1 = std::to_chars(buf, buf + sizeof buf, s.omega_ev);
        out.write(buf, r1.ptr - buf);
        out << ',';
        auto r2 = std::to_chars(buf, buf + sizeof buf, s.n);
        out.write(buf, r2.ptr - buf);
        out << '\n';
    }
}

} // namespace pcion::materials
