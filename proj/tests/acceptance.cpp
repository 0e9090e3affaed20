// Acceptance gate: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include "oracles/homogeneous.hpp"
#include "oracles/transfer_matrix.hpp"
#include "pcion/bloch.hpp"
#include "pcion/constants.hpp"
#include "pcion/ionization.hpp"
#include "pcion/pipeline.hpp"
#include "pcion/qed_mass.hpp"
#include "pcion/quadrature.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace pcion;
using bloch::KPoint;
using bloch::Polarization;
using bloch::Stack1D;
namespace fs = std::filesystem;

namespace {

constexpr double hc = Constants::hbar_c_ev_nm;
constexpr double alpha = Constants::fine_structure;
constexpr double pi = Constants::pi;

// Frozen value of the plane-wave oracle for n = 1.5, Lambda = 10 eV.
constexpr double kHomogeneousOracle = 0.0154854631052;

const fs::path source_dir(PCION_SOURCE_DIR);
const fs::path work_dir(PCION_WORK_DIR);

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail)
{
    std::printf("%s  %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

// Runs one criterion; an escaping exception counts as its failure.
void guarded(int id, const char* name, const std::function<void()>& body)
{
    try {
        body();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

template <typename... Args>
std::string fmt(const char* f, Args... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds(const std::function<void()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    body();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Stack1D make_stack(double n_h, double d_h, double d_l)
{
    Stack1D s;
    s.d_h_nm = d_h;
    s.d_l_nm = d_l;
    s.n_h = materials::IndexModel::constant(n_h);
    return s;
}

qed::CutoffConfig cutoff(double lambda)
{
    qed::CutoffConfig c;
    c.lambda_ev = lambda;
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// dE_ion column of the first data row of an ionization report.
double report_shift(const fs::path& p)
{
    std::istringstream in(slurp(p));
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::vector<std::string> cells;
    std::stringstream rs(row);
    for (std::string c; std::getline(rs, c, ',');)
        cells.push_back(c);
    return cells.size() == 5 ? std::stod(cells[2]) : NAN;
}

struct ConfigRun
{
    int code = -1;
    double seconds = 0.0;
    fs::path out;
};

ConfigRun run_config(const std::string& name, const fs::path& out, const fs::path& cache,
                     int workers = 1)
{
    ::setenv("PCION_CACHE_DIR", cache.c_str(), 1);
    auto cfg = pipeline::load_config(source_dir / "configs" / name);
    cfg.workers = cfg.cutoff.workers = workers;
    ConfigRun r;
    r.out = out;
    r.seconds = seconds([&] { r.code = pipeline::run(cfg, out); });
    return r;
}

void vacuum_cancellation()
{
    bool ok = true;
    std::string detail;
    for (double lam : {5.0, 10.0, 35.0}) {
        qed::MassCoefficients c;
        const double t = seconds([&] { c = qed::compute_AB(Stack1D{}, cutoff(lam)); });
        const double tol = 1e-4 * (4.0 * alpha / (3.0 * pi)) * lam;
        const bool here = std::abs(c.a_ev) < tol && std::abs(c.b_ev) < tol && t < 60.0;
        ok = ok && here;
        detail += fmt("L=%g |A|=%.1e |B|=%.1e tol=%.1e %.1fs; ", lam, std::abs(c.a_ev),
                      std::abs(c.b_ev), tol, t);
    }
    report(1, "vacuum cancellation", ok, detail);
}

void homogeneous_oracle()
{
    const double live = oracle::homogeneous_mass(1.5, 10.0, 0.0);
    // Uniform medium: both layers carry n = 1.5.
    Stack1D s = make_stack(1.5, 20.0, 20.0);
    s.n_l = 1.5;
    qed::MassCoefficients c;
    const double t = seconds([&] { c = qed::compute_AB(s, cutoff(10.0)); });
    const double rel = std::abs(c.a_ev / kHomogeneousOracle - 1.0);
    const bool ok = rel < 0.01 && std::abs(live / kHomogeneousOracle - 1.0) < 1e-9 &&
                    std::abs(c.b_ev) < 0.01 * kHomogeneousOracle && t < 300.0;
    report(2, "homogeneous-medium oracle", ok,
           fmt("A=%.10f oracle=%.10f rel=%.2e B=%.1e %.1fs", c.a_ev, kHomogeneousOracle, rel,
               c.b_ev, t));
}

void dispersion()
{
    // Quarter-wave stack, n_h d_h = d_l.
    const auto s = make_stack(2.0, 50.0, 100.0);
    const double w0 = pi * hc / (2.0 * 2.0 * s.d_h_nm);
    auto f = [&](double w) {
        return oracle::half_trace(w / hc, 2.0, s.d_h_nm, 1.0, s.d_l_nm, 0.0, false) + 1.0;
    };
    const double lo = oracle::bisect(f, 0.5 * w0, w0), hi = oracle::bisect(f, w0, 1.5 * w0);
    const KPoint edge{0.0, pi / s.period(), Polarization::TE};
    const auto roots = bloch::solve_bands(edge, s, 1.2 * hi);
    double gap_err = 1.0;
    if (roots.size() >= 2)
        gap_err = std::max(std::abs(roots[0] / lo - 1.0), std::abs(roots[1] / hi - 1.0));

    double degeneracy = 0.0;
    bool same_count = true;
    const auto d = make_stack(3.3, 44.0, 61.0);
    for (double frac : {0.1, 0.5, 0.93}) {
        const double kz = frac * pi / d.period();
        const auto te = bloch::solve_bands({0.0, kz, Polarization::TE}, d, 25.0);
        const auto tm = bloch::solve_bands({0.0, kz, Polarization::TM}, d, 25.0);
        same_count = same_count && te.size() == tm.size() && !te.empty();
        for (std::size_t i = 0; i < std::min(te.size(), tm.size()); ++i)
            degeneracy = std::max(degeneracy, std::abs(te[i] - tm[i]) / te[i]);
    }

    const auto e = make_stack(1.0, 30.0, 70.0);
    const double L = e.period(), b = 2.0 * pi / L, top = 3.0 * hc * pi / L;
    double fold = 0.0;
    bool fold_count = true;
    for (double frac : {0.37, 0.55, 0.81}) {
        const double q = frac * pi / L;
        for (auto pol : {Polarization::TE, Polarization::TM}) {
            const auto r = bloch::solve_bands({0.0, q, pol}, e, top);
            std::vector<double> expect;
            for (int m = -4; m <= 4; ++m)
                if (const double w = hc * std::abs(q + m * b); w > 0.0 && w <= top)
                    expect.push_back(w);
            std::sort(expect.begin(), expect.end());
            const auto& got = r;
            fold_count = fold_count && got.size() == expect.size();
            for (std::size_t i = 0; i < std::min(got.size(), expect.size()); ++i)
                fold = std::max(fold, std::abs(got[i] / expect[i] - 1.0));
        }
    }
    const bool ok = gap_err < 1e-8 && same_count && degeneracy < 1e-9 && fold_count && fold < 1e-10;
    report(3, "dispersion correctness", ok,
           fmt("gap edges rel %.1e (1e-8), TE/TM %.1e (1e-9), empty lattice %.1e (1e-10)%s",
               gap_err, degeneracy, fold, fold_count && same_count ? "" : ", band count mismatch"));
}

void mode_integrity()
{
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> ud(20.0, 150.0), un(1.1, 5.0), uf(-1.0, 1.0),
        ukr(0.0, 0.1);
    double norm_err = 0.0, gl_err = 0.0, parseval_err = 0.0;
    int checked = 0;
    const auto rule = quadrature::gauss_legendre(200);
    while (checked < 100) {
        const auto s = make_stack(un(rng), ud(rng), ud(rng));
        const KPoint k{ukr(rng), uf(rng) * pi / s.period(),
                       (checked % 2) ? Polarization::TM : Polarization::TE};
        const auto roots = bloch::solve_bands(k, s, 20.0);
        if (roots.empty())
            continue;
        const double w = roots[rng() % roots.size()];
        const auto p = bloch::mode_profile(w, k, s);
        norm_err = std::max(norm_err, std::abs(p.energy_norm() / 0.5 - 1.0));

        double gl = 0.0;
        for (const auto& layer : p.layers)
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double z = layer.z0 + 0.5 * layer.d * (1.0 + rule.nodes[i]);
                const auto e = p.field(z);
                gl += 0.5 * layer.d * rule.weights[i] * layer.eps *
                      (std::norm(e[0]) + std::norm(e[1]) + std::norm(e[2]));
            }
        gl_err = std::max(gl_err, std::abs(gl / s.period() / 0.5 - 1.0));

        const auto fc = bloch::fourier_coefficients(p, 4096, false);
        double sum = 0.0;
        for (const auto& c : fc.primary)
            sum += std::norm(c);
        parseval_err = std::max(parseval_err, std::abs(sum / p.primary_mean_square() - 1.0));
        ++checked;
    }
    const bool ok = norm_err < 1e-8 && gl_err < 1e-8 && parseval_err < 1e-8;
    report(4, "mode integrity", ok,
           fmt("100 samples: normalization %.1e, quadrature re-check %.1e, Parseval %.1e (1e-8)",
               norm_err, gl_err, parseval_err));
}

void cross_term()
{
    const auto s = make_stack(4.0, 20.0, 20.0);
    std::vector<KPoint> pts;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 24; ++i)
        pts.push_back({0.15 * u(rng), (2.0 * u(rng) - 1.0) * pi / s.period(), Polarization::TE});
    const double r = qed::cross_term_residual(s, cutoff(8.0), pts, 4, 64);
    report(5, "cross-term cancellation", r < 1e-10, fmt("max relative residual %.1e (1e-10)", r));
}

void high_energy_tail(const ConfigRun& meta)
{
    const double lam = 35.0, c1 = 100.0, f = 0.5;
    const auto r = oracle::gauss(32, 0.0, 1.0);
    double integral = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        const double k = lam / r.x[i];
        integral += r.w[i] * 4.0 * pi / (k * k) * lam / (r.x[i] * r.x[i]);
    }
    const double radial = alpha / (6.0 * pi * pi) * c1 * f * integral;
    const double closed = qed::he_tail(c1, 20.0, 20.0, lam);
    const double rel = std::abs(closed / radial - 1.0);

    double share = NAN;
    if (meta.code == 0) {
        const auto j = read_json(meta.out / "mass_coefficients.json");
        share = j.at("tail_ev").get<double>() / std::abs(j.at("A_ev").get<double>());
    }
    report(6, "high-energy tail", rel < 0.01 && share < 0.05,
           fmt("closed form vs radial quadrature %.1e (0.01); bundled metamaterial tail/|A| = %.3f (0.05)",
               rel, share));
}

void headline(const ConfigRun& g5, const ConfigRun& g7)
{
    const double d5 = g5.code == 0 ? report_shift(g5.out / "ionization_report.csv") : NAN;
    const double d7 = g7.code == 0 ? report_shift(g7.out / "ionization_report.csv") : NAN;
    const double ratio = std::abs(d5 / d7);
    const double total = g5.seconds + g7.seconds;
    const bool ok = d7 >= -1.35 && d7 <= -0.55 && d5 >= -1.95 && d5 <= -0.85 && ratio >= 1.15 &&
                    ratio <= 1.75 && d5 < 0.0 && d7 < 0.0 && total < 1800.0;
    report(7, "headline ionization shifts", ok,
           fmt("dE(g=0.7)=%.4f eV [-1.35,-0.55], dE(g=0.5)=%.4f eV [-1.95,-0.85], ratio %.3f "
               "[1.15,1.75], %.0fs",
               d7, d5, ratio, total));
}

void quadratic_scaling()
{
    ::setenv("PCION_CACHE_DIR", (work_dir / "cache").c_str(), 1);
    const auto cfg = pipeline::load_config(source_dir / "configs" / "index_scale_sweep.json");
    const int code = pipeline::sweep(cfg, work_dir / "scale");
    std::vector<double> xs, ys;
    std::istringstream in(slurp(work_dir / "scale" / "sweep.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream rs(line);
        for (std::string c; std::getline(rs, c, ',');)
            cells.push_back(c);
        if (cells.size() == 9 && cells[8] == "ok") {
            xs.push_back(std::log(std::stod(cells[4])));
            ys.push_back(std::log(std::abs(std::stod(cells[6]))));
        }
    }
    double slope = NAN;
    if (xs.size() == 3) {
        const double mx = (xs[0] + xs[1] + xs[2]) / 3.0, my = (ys[0] + ys[1] + ys[2]) / 3.0;
        double sxy = 0.0, sxx = 0.0;
        for (int i = 0; i < 3; ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        slope = sxy / sxx;
    }
    std::string bs;
    for (double y : ys)
        bs += fmt(" %.5f", std::exp(y));
    report(8, "quadratic index scaling", code == 0 && slope >= 1.5 && slope <= 2.5,
           fmt("log-log slope of |B| vs s in {2,4,8}: %.3f [1.5,2.5]; |B| =%s eV", slope,
               bs.c_str()));
}

void estimate_identity()
{
    const double v = qed::estimate_mass_correction(8.0, 35.0);
    const double exact = alpha / pi * 35.0 * 64.0;
    const bool ok = v >= 4.5 && v <= 5.5 && std::abs(v - exact) <= 1e-10 * exact;
    report(9, "estimate identity", ok, fmt("%.12f eV, formula %.12f eV", v, exact));
}

void ionization_algebra()
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    bool independent = true, nonpositive = true;
    for (int i = 0; i < 100000; ++i) {
        qed::MassCoefficients c;
        c.a_ev = u(rng);
        c.b_ev = u(rng);
        const double shift = ionization::ionization_shift(c, {0, 0});
        auto c2 = c;
        c2.a_ev = u(rng) * 1e3;
        independent = independent && ionization::ionization_shift(c2, {0, 0}) == shift;
        nonpositive = nonpositive && shift <= 0.0;
        const double expect = c.b_ev <= 0.0 ? (2.0 / 3.0) * c.b_ev : -(1.0 / 3.0) * c.b_ev;
        worst = std::max(worst, std::abs(shift - expect));
    }
    report(10, "ionization algebra", independent && nonpositive && worst <= 1e-12,
           fmt("1e5 draws: A-independent %s, <= 0 %s, max branch error %.1e (1e-12)",
               independent ? "yes" : "no", nonpositive ? "yes" : "no", worst));
}

void determinism(const ConfigRun& cold)
{
    const auto again = run_config("metamaterial_g0.5.json", work_dir / "g05_again",
                                  work_dir / "cache");
    const auto eight = run_config("metamaterial_g0.5.json", work_dir / "g05_w8",
                                  work_dir / "cache_w8", 8);
    bool ok = cold.code == 0 && again.code == 0 && eight.code == 0;
    std::string bad;
    for (const char* f : {"index_curve.csv", "ionization_report.csv"}) {
        const auto ref = slurp(cold.out / f);
        if (ref.empty() || slurp(again.out / f) != ref || slurp(eight.out / f) != ref) {
            ok = false;
            bad += std::string(" ") + f;
        }
    }
    const bool json_same = slurp(cold.out / "mass_coefficients.json") ==
                           slurp(eight.out / "mass_coefficients.json");
    report(11, "determinism", ok && json_same,
           fmt("rerun and 1 vs 8 workers: CSV %s, coefficients JSON %s",
               bad.empty() ? "byte-identical" : ("differ:" + bad).c_str(),
               json_same ? "byte-identical" : "differ"));
}

} // namespace

int main()
{
    fs::remove_all(work_dir);
    fs::create_directories(work_dir);
    // Pipeline progress lines go to a file; stdout carries only the verdicts.
    if (!std::freopen((work_dir / "pipeline.log").c_str(), "w", stderr))
        return 2;

    guarded(1, "vacuum cancellation", vacuum_cancellation);
    guarded(2, "homogeneous-medium oracle", homogeneous_oracle);
    guarded(3, "dispersion correctness", dispersion);
    guarded(4, "mode integrity", mode_integrity);
    guarded(5, "cross-term cancellation", cross_term);
    ConfigRun g5, g7;
    try {
        g5 = run_config("metamaterial_g0.5.json", work_dir / "g05", work_dir / "cache");
        g7 = run_config("metamaterial_g0.7.json", work_dir / "g07", work_dir / "cache");
    } catch (const std::exception&) {
        // Reported through the criteria that use these runs.
    }
    guarded(6, "high-energy tail", [&] { high_energy_tail(g5); });
    guarded(7, "headline ionization shifts", [&] { headline(g5, g7); });
    guarded(8, "quadratic index scaling", quadratic_scaling);
    guarded(9, "estimate identity", estimate_identity);
    guarded(10, "ionization algebra", ionization_algebra);
    guarded(11, "determinism", [&] { determinism(g5); });

    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
