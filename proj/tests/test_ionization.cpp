#include "pcion/errors.hpp"
#include "pcion/ionization.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pcion;
using ionization::OrbitalState;

namespace {

// <cos^2> from the associated Legendre density by Gauss-Legendre in x = cos theta.
double cos2_oracle(int l, int m)
{
    const int n = 64;
    double num = 0.0, den = 0.0;
    for (int i = 1; i <= n; ++i) {
        double x = std::cos(M_PI * (i - 0.25) / (n + 0.5)), dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const double p = std::assoc_legendre(l, std::abs(m), x);
        num += w * p * p * x * x;
        den += w * p * p;
    }
    return num / den;
}

qed::MassCoefficients coeffs(double a, double b)
{
    qed::MassCoefficients c;
    c.a_ev = a;
    c.b_ev = b;
    return c;
}

} // namespace

TEST_CASE("angular average of cos^2")
{
    CHECK(ionization::angular_average({0, 0}) == 1.0 / 3.0);
    for (int l = 1; l <= 6; ++l) {
        double sum = 0.0;
        for (int m = -l; m <= l; ++m) {
            const double v = ionization::angular_average({l, m});
            CHECK(v == doctest::Approx(cos2_oracle(l, m)).epsilon(1e-10));
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(std::abs(sum / (2 * l + 1) - 1.0 / 3.0) < 1e-12);
    }
    CHECK_THROWS_AS(ionization::angular_average({1, 2}), InvalidArgument);
    CHECK_THROWS_AS(ionization::angular_average({-1, 0}), InvalidArgument);
}

TEST_CASE("state and minimal corrections")
{
    CHECK(ionization::delta_m_state(coeffs(2.0, 3.0), {0, 0}) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(ionization::delta_m_state(coeffs(2.5, 0.0), {3, 1}) == 2.5);
    CHECK(ionization::delta_m_state(coeffs(1.0, 2.0), {1, 0}) ==
          doctest::Approx(1.0 + 2.0 * cos2_oracle(1, 0)).epsilon(1e-12));

    auto m1 = ionization::delta_m_min(coeffs(1.0, -3.0));
    CHECK(m1.value_ev == -2.0);
    CHECK(m1.theta == 0.0);
    auto m2 = ionization::delta_m_min(coeffs(1.0, 3.0));
    CHECK(m2.value_ev == 1.0);
    CHECK(m2.theta == doctest::Approx(M_PI / 2));
    auto m3 = ionization::delta_m_min(coeffs(1.0, 0.0));
    CHECK(m3.value_ev == 1.0);
    CHECK(m3.theta == doctest::Approx(M_PI / 2));
}

TEST_CASE("ionization shift algebra")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), b = u(rng);
        const double s = ionization::ionization_shift(coeffs(a, b), {0, 0});
        CHECK(s <= 0.0);
        CHECK(s == ionization::ionization_shift(coeffs(u(rng), b), {0, 0}));
        const double expect = b <= 0.0 ? 2.0 / 3.0 * b : -b / 3.0;
        CHECK(std::abs(s - expect) <= 1e-12 * std::max(1.0, std::abs(b)));
    }
    CHECK(ionization::ionization_shift(coeffs(7.0, 0.0), {0, 0}) == 0.0);
}

TEST_CASE("shifted ionization table")
{
    const std::vector<ionization::AtomRecord> atoms = {{"H", 13.598, {}}, {"Cs", 3.894, {}}};
    auto rows = ionization::shifted_table(atoms, -0.91);
    CHECK(rows[0].e_pc_ev == doctest::Approx(12.69).epsilon(1e-3));
    rows = ionization::shifted_table(atoms, -1.32);
    CHECK(rows[1].e_pc_ev == doctest::Approx(2.57).epsilon(2e-3));
    CHECK_FALSE(rows[1].outside_perturbative);

    rows = ionization::shifted_table(atoms, 0.0);
    CHECK(rows[0].e_pc_ev == 13.598);
    CHECK(rows[1].e_pc_ev == 3.894);

    rows = ionization::shifted_table(atoms, -2.5);
    CHECK(rows[1].outside_perturbative);
    CHECK_FALSE(rows[0].outside_perturbative);
    CHECK_THROWS_AS(ionization::shifted_table(atoms, -4.0), InvalidArgument);
    CHECK_THROWS_AS(ionization::shifted_table({}, -1.0), InvalidArgument);

    const auto csv = ionization::report_csv(ionization::shifted_table(atoms, -1.32));
    CHECK(csv == "symbol,E_ion_vacuum_ev,dE_ion_ev,E_ion_pc_ev,flag\n"
                 "H,13.598000,-1.320000,12.278000,ok\n"
                 "Cs,3.894000,-1.320000,2.574000,ok\n");
}

TEST_CASE("bundled atom table")
{
    const auto atoms = ionization::read_atoms(PCION_DATA_DIR "/atoms.csv");
    REQUIRE(atoms.size() == 7);
    CHECK(atoms[0].symbol == "H");
    CHECK(atoms[0].e_ion_ev == 13.598);
    CHECK(atoms[5].symbol == "Cs");
    CHECK(atoms[5].e_ion_ev == 3.894);
    for (const auto& a : atoms)
        CHECK(a.valence.l == 0);
    CHECK_THROWS_AS(ionization::read_atoms("/nonexistent/atoms.csv"), ConfigError);
}
