#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace pcion::materials {

// One row of a refractive-index table.
struct IndexSample
{
    double omega_ev = 0.0;
    double n = 1.0;
};

// One row of a permittivity table (real, lossless).
struct PermittivitySample
{
    double omega_ev = 0.0;
    double eps = 1.0;
};

struct ConstantIndex
{
    double n = 1.0;
};

// n(w) = 1 + C1 / w^2 + C2 / w^4 with w the photon energy in eV.
struct SellmeierTail
{
    double c1_ev2 = 0.0;
    double c2_ev4 = 0.0;
};

// Tabulated n(w): monotone cubic inside the table, constant below it, and a
// power-law return to 1 above the rolloff energy:
//   n(w) = 1 + (n_roll - 1) (w_roll / w)^p,   w > w_roll.
// Between the last sample and w_roll (when w_roll lies past the table) the
// last sample is held.
class TabulatedIndex
{
public:
    TabulatedIndex(std::vector<IndexSample> samples, double rolloff_ev, double rolloff_exponent);

    double operator()(double omega_ev) const;

    std::span<const IndexSample> samples() const { return samples_; }
    double rolloff_ev() const { return rolloff_ev_; }
    double rolloff_exponent() const { return exponent_; }
    // Index at the rolloff energy; the amplitude of the power-law tail.
    double rolloff_index() const { return n_roll_; }

private:
    double interpolate(double omega_ev) const;

    std::vector<IndexSample> samples_;
    double rolloff_ev_ = 0.0;
    double exponent_ = 2.0;
    double n_roll_ = 1.0;
    struct Interpolant;
    // Immutable; copies of the model share it.
    std::shared_ptr<const Interpolant> interp_;
};

// Refractive index of the high-index layer as a function of photon energy.
//
// The optional excess scale s maps n -> 1 + s (n - 1); it is used to build the
// index-scaled families of a base model without copying its data.
class IndexModel
{
public:
    using Variant = std::variant<ConstantIndex, SellmeierTail, TabulatedIndex>;

    static IndexModel constant(double n);
    static IndexModel sellmeier(double c1_ev2, double c2_ev4 = 0.0);
    static IndexModel tabulated(std::vector<IndexSample> samples, double rolloff_ev,
                                double rolloff_exponent = 2.0);

    // eval_index: n(w) for w >= 0 (eV). Throws InvalidArgument for w < 0 or
    // non-finite w.
    double operator()(double omega_ev) const;

    IndexModel scaled(double excess_scale) const;

    const Variant& variant() const { return model_; }
    double excess_scale() const { return scale_; }
    std::string kind() const;

    // Leading 1/w^2 coefficient of n - 1 seen at and above `cutoff_ev`, used by
    // the analytic high-energy tail. Zero for constant models, which never roll
    // off.
    double tail_c1(double cutoff_ev) const;

    // True when n(w) is identically 1.
    bool is_vacuum() const;

private:
    explicit IndexModel(Variant v) : model_(std::move(v)) {}

    Variant model_;
    double scale_ = 1.0;
};

// Nanoparticle-superlattice metamaterial: n_eff = sqrt((a / g) eps_d).
struct MetamaterialSpec
{
    double period_nm = 30.0;  // a
    double gap_nm = 0.5;      // g

    void validate() const;
    double enhancement() const { return period_nm / gap_nm; }
};

IndexModel build_effective_model(const MetamaterialSpec& spec,
                                 std::span<const PermittivitySample> dielectric,
                                 double rolloff_ev, double rolloff_exponent = 2.0);

// Flat average of n over [omega_min, omega_max] by adaptive Gauss-Kronrod,
// relative tolerance 1e-6.
double mean_index(const IndexModel& model, double omega_max_ev, double omega_min_ev = 0.0);

std::vector<PermittivitySample> to_permittivity(std::span<const IndexSample> table);

// `omega_ev,n` CSV with a header row.
std::vector<IndexSample> read_index_table(const std::filesystem::path& path);
void write_index_table(const std::filesystem::path& path, std::span<const IndexSample> table);

} // namespace pcion::materials
