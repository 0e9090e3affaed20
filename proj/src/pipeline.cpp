#include "pcion/pipeline.hpp"

#include "pcion/constants.hpp"
#include "pcion/errors.hpp"
#include "pcion/format.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace pcion::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kGridMagic = "pcion-grid v1";

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ConfigError("write failed for " + path.string());
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

void require_file(const fs::path& p, const char* what)
{
    if (!fs::is_regular_file(p))
        throw ConfigError(std::string(what) + " not found: " + p.string());
}

std::vector<double> number_list(const json& j, const char* key)
{
    if (!j.contains(key))
        return {};
    const auto& v = j.at(key);
    if (!v.is_array() || v.empty())
        throw ConfigError(std::string("sweep field '") + key + "' must be a nonempty array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number())
            throw ConfigError(std::string("sweep field '") + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

void canonical_model(std::ostringstream& os, const materials::IndexModel& m)
{
    os << "model=" << m.kind() << '\n' << "excess_scale=" << shortest(m.excess_scale()) << '\n';
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, materials::ConstantIndex>) {
                os << "n=" << shortest(v.n) << '\n';
            } else if constexpr (std::is_same_v<T, materials::SellmeierTail>) {
                os << "c1=" << shortest(v.c1_ev2) << "\nc2=" << shortest(v.c2_ev4) << '\n';
            } else {
                os << "rolloff=" << shortest(v.rolloff_ev())
                   << "\nexponent=" << shortest(v.rolloff_exponent()) << "\nsamples=";
                for (const auto& s : v.samples())
                    os << shortest(s.omega_ev) << ':' << shortest(s.n) << ';';
                os << '\n';
            }
        },
        m.variant());
}

ordered_json coefficients_json(const qed::MassCoefficients& c)
{
    ordered_json j;
    j["A_ev"] = c.a_ev;
    j["B_ev"] = c.b_ev;
    j["tail_ev"] = c.tail_ev;
    j["lambda_ev"] = c.lambda_ev;
    j["refinement_delta"] = c.refinement_delta;
    ordered_json shells = ordered_json::array();
    for (const auto& s : c.shells)
        shells.push_back({{"omega_lo_ev", s.omega_lo_ev},
                          {"omega_hi_ev", s.omega_hi_ev},
                          {"a_ev", s.a_ev},
                          {"b_ev", s.b_ev}});
    j["shells"] = shells;
    j["vacuum_ev"] = c.vacuum_ev;
    j["A_coarse_ev"] = c.a_coarse_ev;
    j["B_coarse_ev"] = c.b_coarse_ev;
    j["ionization_direct_ev"] = c.ionization_direct_ev;
    j["nodes"] = c.nodes;
    j["modes"] = c.modes;
    j["converged"] = c.converged;
    if (!c.message.empty())
        j["message"] = c.message;
    return j;
}

std::string index_curve_csv(const materials::IndexModel& m, double omega_top)
{
    std::ostringstream os;
    os << "omega_ev,n\n";
    const int n = static_cast<int>(std::ceil(omega_top / 0.1));
    for (int i = 1; i <= n; ++i) {
        const double w = 0.1 * i;
        os << fixed(w, 1) << ',' << fixed(m(w), 6) << '\n';
    }
    return os.str();
}

std::string figure2_script()
{
    return "# Effective index of the high-index layer versus photon energy.\n"
           "set datafile separator ','\n"
           "set key autotitle columnhead\n"
           "set xlabel 'photon energy (eV)'\n"
           "set ylabel 'n_{eff}'\n"
           "set terminal pngcairo size 800,500\n"
           "set output 'figure2.png'\n"
           "plot 'index_curve.csv' using 1:2 with lines lw 2 title 'n_{eff}'\n";
}

std::string ionization_script(const std::string& name)
{
    std::ostringstream os;
    os << "# Ionization energies in vacuum and inside the layered medium.\n"
          "set datafile separator ','\n"
          "set xlabel 'element'\n"
          "set ylabel 'ionization energy (eV)'\n"
          "set style data points\n"
          "set terminal pngcairo size 800,500\n"
          "set output '"
       << name
       << ".png'\n"
          "plot 'ionization_report.csv' every ::1 using 0:2:xtic(1) pt 7 ps 1.5 title 'vacuum', \\\n"
          "     '' every ::1 using 0:4 pt 5 ps 1.5 title 'layered medium'\n";
    return os.str();
}

fs::path default_atoms() { return fs::path(PCION_DATA_DIR) / "atoms.csv"; }

double mean_index_for(const materials::IndexModel& m, double lambda)
{
    // The Sellmeier pole at zero is clipped at 1 eV.
    const bool pole = m.kind() == "sellmeier" && !m.is_vacuum();
    return materials::mean_index(m, lambda, pole ? std::min(1.0, 0.5 * lambda) : 0.0);
}

} // namespace

// ---------------------------------------------------------------------------

materials::IndexModel IndexSpec::build() const
{
    materials::IndexModel m = materials::IndexModel::constant(1.0);
    if (kind == "constant") {
        m = materials::IndexModel::constant(n);
    } else if (kind == "sellmeier") {
        m = materials::IndexModel::sellmeier(c1_ev2, c2_ev4);
    } else if (kind == "tabulated") {
        m = materials::IndexModel::tabulated(materials::read_index_table(table), rolloff_ev,
                                             rolloff_exponent);
    } else if (kind == "metamaterial") {
        const auto eps = materials::to_permittivity(materials::read_index_table(table));
        m = materials::build_effective_model({period_nm, gap_nm}, eps, rolloff_ev, rolloff_exponent);
    } else {
        throw ConfigError("unknown index kind '" + kind + "'");
    }
    return scale == 1.0 ? m : m.scaled(scale);
}

bloch::Stack1D RunConfig::stack() const
{
    bloch::Stack1D s;
    s.d_h_nm = d_h_nm;
    s.d_l_nm = d_l_nm;
    s.n_l = n_l;
    s.n_h = index.build();
    return s;
}

RunConfig parse_config(const std::string& text, const fs::path& base)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");

    RunConfig c;
    if (j.contains("stack")) {
        const auto& s = j.at("stack");
        c.d_h_nm = get_or(s, "d_h_nm", c.d_h_nm);
        c.d_l_nm = get_or(s, "d_l_nm", c.d_l_nm);
        c.n_l = get_or(s, "n_l", c.n_l);
    }
    if (j.contains("index")) {
        const auto& s = j.at("index");
        auto& x = c.index;
        x.kind = get_or<std::string>(s, "kind", x.kind);
        x.n = get_or(s, "n", x.n);
        x.c1_ev2 = get_or(s, "c1_ev2", x.c1_ev2);
        x.c2_ev4 = get_or(s, "c2_ev4", x.c2_ev4);
        x.period_nm = get_or(s, "period_nm", x.period_nm);
        x.gap_nm = get_or(s, "gap_nm", x.gap_nm);
        x.rolloff_ev = get_or(s, "rolloff_ev", x.rolloff_ev);
        x.rolloff_exponent = get_or(s, "rolloff_exponent", x.rolloff_exponent);
        x.scale = get_or(s, "scale", x.scale);
        if (x.kind == "tabulated" || x.kind == "metamaterial") {
            if (!s.contains("table"))
                throw ConfigError("index kind '" + x.kind + "' needs a 'table' path");
            x.table = resolve(base, get_or<std::string>(s, "table", ""));
            require_file(x.table, "index table");
        }
    }
    if (j.contains("cutoff")) {
        const auto& s = j.at("cutoff");
        auto& x = c.cutoff;
        x.lambda_ev = get_or(s, "lambda_ev", x.lambda_ev);
        x.order = get_or(s, "order", x.order);
        x.m_start = get_or(s, "m_start", x.m_start);
        x.fourier_tail = get_or(s, "fourier_tail", x.fourier_tail);
        x.grading_levels = get_or(s, "grading_levels", x.grading_levels);
        x.energy_shells = get_or(s, "energy_shells", x.energy_shells);
        x.refine = get_or(s, "refine", x.refine);
        try {
            x.pairing = qed::pairing_from_string(get_or<std::string>(s, "pairing", "in_plane"));
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
    c.atoms = j.contains("atoms") ? resolve(base, get_or<std::string>(j, "atoms", ""))
                                  : default_atoms();
    require_file(c.atoms, "atom table");
    if (j.contains("figure")) {
        const int f = get_or(j, "figure", 0);
        if (f < 2 || f > 4)
            throw ConfigError("figure must be 2, 3 or 4");
        c.figure = f;
    }
    c.workers = get_or(j, "workers", c.workers);
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        if (!s.is_object())
            throw ConfigError("sweep must be an object of arrays");
        SweepGrid g;
        g.period_nm = number_list(s, "period_nm");
        g.gap_nm = number_list(s, "gap_nm");
        g.d_h_nm = number_list(s, "d_h_nm");
        g.d_l_nm = number_list(s, "d_l_nm");
        g.scale = number_list(s, "scale");
        for (const auto& [k, v] : s.items())
            if (k != "period_nm" && k != "gap_nm" && k != "d_h_nm" && k != "d_l_nm" && k != "scale")
                throw ConfigError("unknown sweep field '" + k + "'");
        c.sweep = g;
    }

    // Surface model and numeric problems as configuration errors.
    try {
        c.cutoff.workers = std::max(1, c.workers);
        if (c.workers < 1)
            throw InvalidArgument("workers must be positive");
        c.cutoff.validate();
        c.stack().validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

RunConfig load_config(const fs::path& path)
{
    if (!fs::is_regular_file(path))
        throw ConfigError("config not found: " + path.string());
    return parse_config(read_text(path), fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------

std::string canonical_grid(const bloch::Stack1D& stack, const qed::CutoffConfig& cutoff, int order,
                           double omega_lo_ev, double omega_hi_ev)
{
    std::ostringstream os;
    os << kGridMagic << '\n'
       << "d_h=" << shortest(stack.d_h_nm) << "\nd_l=" << shortest(stack.d_l_nm)
       << "\nn_l=" << shortest(stack.n_l) << '\n';
    canonical_model(os, stack.n_h);
    os << "order=" << order << "\nm_start=" << cutoff.m_start
       << "\nfourier_tail=" << shortest(cutoff.fourier_tail)
       << "\ngrading=" << cutoff.grading_levels << "\nshells=" << cutoff.energy_shells
       << "\npairing=" << qed::to_string(cutoff.pairing) << "\nomega_lo=" << shortest(omega_lo_ev)
       << "\nomega_hi=" << shortest(omega_hi_ev);
    return os.str();
}

std::uint64_t fnv1a64(const std::string& text)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string serialize_grid(const std::string& canonical, const qed::GridSums& g)
{
    std::ostringstream os;
    os << canonical << "\n--\n"
       << g.order << ' ' << shortest(g.omega_lo_ev) << ' ' << shortest(g.omega_hi_ev) << ' '
       << g.shells << ' ' << g.kz_nodes << ' ' << g.nodes << ' ' << g.modes << '\n';
    for (std::size_t i = 0; i < g.kz.size(); ++i) {
        os << shortest(g.kz[i]) << ' ' << shortest(g.kz_weight[i]);
        for (double v : g.inner[i])
            os << ' ' << shortest(v);
        os << '\n';
    }
    os << "end\n";
    return os.str();
}

std::optional<qed::GridSums> parse_grid(const std::string& text, const std::string& canonical)
{
    const std::string head = canonical + "\n--\n";
    if (text.compare(0, head.size(), head) != 0)
        return std::nullopt;
    std::istringstream in(text.substr(head.size()));
    qed::GridSums g;
    std::string lo, hi;
    if (!(in >> g.order >> lo >> hi >> g.shells >> g.kz_nodes >> g.nodes >> g.modes))
        return std::nullopt;
    if (!parse_number(lo, g.omega_lo_ev) || !parse_number(hi, g.omega_hi_ev) || g.shells < 1)
        return std::nullopt;
    const std::size_t width = 3 * static_cast<std::size_t>(g.shells);
    std::string tok;
    for (std::size_t i = 0; i < g.kz_nodes; ++i) {
        double kz = 0.0, w = 0.0;
        if (!(in >> tok) || !parse_number(tok, kz) || !(in >> tok) || !parse_number(tok, w))
            return std::nullopt;
        std::vector<double> row(width);
        for (auto& v : row)
            if (!(in >> tok) || !parse_number(tok, v))
                return std::nullopt;
        g.kz.push_back(kz);
        g.kz_weight.push_back(w);
        g.inner.push_back(std::move(row));
    }
    if (!(in >> tok) || tok != "end")
        return std::nullopt;
    return g;
}

GridCache::GridCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path GridCache::path_for(const std::string& canonical) const
{
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.grid",
                  static_cast<unsigned long long>(fnv1a64(canonical)));
    return dir_ / name;
}

std::optional<qed::GridSums> GridCache::load(const std::string& canonical) const
{
    const auto p = path_for(canonical);
    std::error_code ec;
    if (!fs::is_regular_file(p, ec))
        return std::nullopt;
    try {
        return parse_grid(read_text(p), canonical);
    } catch (const ConfigError&) {
        return std::nullopt;
    }
}

void GridCache::store(const std::string& canonical, const qed::GridSums& sums) const
{
    fs::create_directories(dir_);
    const auto final_path = path_for(canonical);
    std::ostringstream tmp_name;
    tmp_name << final_path.filename().string() << ".tmp." << std::this_thread::get_id();
    const auto tmp = dir_ / tmp_name.str();
    write_text(tmp, serialize_grid(canonical, sums));
    fs::rename(tmp, final_path);
}

// ---------------------------------------------------------------------------

RunLog::RunLog(std::optional<fs::path> file, bool echo) : file_(std::move(file)), echo_(echo) {}

void RunLog::event(const std::string& stage, ordered_json fields)
{
    ordered_json j;
    j["stage"] = stage;
    for (auto& [k, v] : fields.items())
        j[k] = v;
    const std::string line = j.dump();
    std::lock_guard lock(mutex_);
    if (file_) {
        std::ofstream out(*file_, std::ios::app);
        out << line << '\n';
    }
    if (echo_)
        std::cerr << line << '\n';
}

MassResult cached_mass(const bloch::Stack1D& stack, const qed::CutoffConfig& cutoff,
                       const GridCache& cache, RunLog& log)
{
    MassResult r;
    const auto solves0 = bloch::BandSolver::solve_count();
    std::vector<qed::GridSums> grids;
    for (int order : qed::sampling_orders(cutoff)) {
        const auto canon = canonical_grid(stack, cutoff, order, 0.0, cutoff.lambda_ev);
        const auto t0 = std::chrono::steady_clock::now();
        auto hit = cache.load(canon);
        if (hit) {
            ++r.cache_hits;
            grids.push_back(std::move(*hit));
        } else {
            ++r.cache_misses;
            grids.push_back(qed::sample_window(stack, cutoff, order, 0.0, cutoff.lambda_ev));
            cache.store(canon, grids.back());
        }
        const auto& g = grids.back();
        log.event("grid", {{"order", order},
                           {"cache", hit ? "hit" : "miss"},
                           {"key", cache.path_for(canon).filename().string()},
                           {"kz_nodes", g.kz_nodes},
                           {"nodes", g.nodes},
                           {"modes", g.modes},
                           {"seconds", seconds_since(t0)}});
    }
    r.coeffs = qed::assemble(stack, cutoff, grids);
    r.solves = bloch::BandSolver::solve_count() - solves0;
    return r;
}

fs::path cache_dir(const fs::path& out_dir)
{
    if (const char* env = std::getenv("PCION_CACHE_DIR"); env && *env)
        return fs::path(env);
    return out_dir / ".pcion-cache";
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
        dynamic_cast<const json::exception*>(&e))
        return kConfigError;
    if (dynamic_cast<const ConvergenceError*>(&e))
        return kConvergence;
    return kFailure;
}

std::string error_json(const std::exception& e, int code)
{
    std::string kind = "error";
    if (code == kConfigError)
        kind = "config_error";
    else if (code == kConvergence)
        kind = "convergence_error";
    ordered_json j;
    j["error"] = kind;
    j["message"] = e.what();
    j["exit_code"] = code;
    return j.dump();
}

namespace {

int fail(const std::exception& e, const fs::path& out_dir, RunLog* log)
{
    const int code = exit_code_for(e);
    const auto text = error_json(e, code);
    std::cerr << text << '\n';
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!ec) {
        std::ofstream(out_dir / "error.json") << text << '\n';
    }
    if (log)
        log->event("error", ordered_json::parse(text));
    return code;
}

} // namespace

int run(const RunConfig& config, const fs::path& out_dir, std::optional<int> figure)
{
    const auto t_start = std::chrono::steady_clock::now();
    std::optional<RunLog> log;
    try {
        fs::create_directories(out_dir);
        fs::remove(out_dir / "error.json");
        write_text(out_dir / "run.log", "");
        log.emplace(out_dir / "run.log", true);

        const auto stack = config.stack();
        const auto& cut = config.cutoff;
        log->event("config", {{"d_h_nm", stack.d_h_nm},
                              {"d_l_nm", stack.d_l_nm},
                              {"index", stack.n_h.kind()},
                              {"lambda_ev", cut.lambda_ev},
                              {"order", cut.order},
                              {"workers", cut.workers}});

        auto t0 = std::chrono::steady_clock::now();
        write_text(out_dir / "index_curve.csv",
                   index_curve_csv(stack.n_h, std::max(40.0, cut.lambda_ev)));
        const double mean_n = mean_index_for(stack.n_h, cut.lambda_ev);
        log->event("index", {{"mean_index", mean_n}, {"seconds", seconds_since(t0)}});

        t0 = std::chrono::steady_clock::now();
        const GridCache cache(cache_dir(out_dir));
        const auto mass = cached_mass(stack, cut, cache, *log);
        const auto& c = mass.coeffs;
        auto mj = coefficients_json(c);
        mj["mean_index"] = mean_n;
        mj["estimate_ev"] = qed::estimate_mass_correction(std::max(1.0, mean_n), cut.lambda_ev);
        write_text(out_dir / "mass_coefficients.json", mj.dump(2) + "\n");
        log->event("mass", {{"A_ev", c.a_ev},
                            {"B_ev", c.b_ev},
                            {"refinement_delta", c.refinement_delta},
                            {"cache_hits", mass.cache_hits},
                            {"cache_misses", mass.cache_misses},
                            {"solves", mass.solves},
                            {"seconds", seconds_since(t0)}});
        if (!c.converged)
            throw ConvergenceError(c.message);

        t0 = std::chrono::steady_clock::now();
        const auto atoms = ionization::read_atoms(config.atoms);
        const double shift = ionization::ionization_shift(c, {0, 0});
        const auto rows = ionization::shifted_table(atoms, shift);
        write_text(out_dir / "ionization_report.csv", ionization::report_csv(rows));
        const auto lowest = ionization::delta_m_min(c);
        log->event("ionization", {{"dE_ion_ev", shift},
                                  {"theta_min", lowest.theta},
                                  {"seconds", seconds_since(t0)}});

        const auto fig = figure ? figure : config.figure;
        if (!fig || *fig == 2)
            write_text(out_dir / "figure2.gp", figure2_script());
        if (!fig)
            write_text(out_dir / "ionization.gp", ionization_script("ionization"));
        else if (*fig != 2)
            write_text(out_dir / ("figure" + std::to_string(*fig) + ".gp"),
                       ionization_script("figure" + std::to_string(*fig)));
        log->event("done", {{"seconds", seconds_since(t_start)}, {"solves", mass.solves}});
        return kOk;
    } catch (const std::exception& e) {
        return fail(e, out_dir, log ? &*log : nullptr);
    }
}

int sweep(const RunConfig& config, const fs::path& out_dir)
{
    std::optional<RunLog> log;
    try {
        if (!config.sweep)
            throw ConfigError("config has no sweep grid");
        fs::create_directories(out_dir);
        fs::remove(out_dir / "error.json");
        write_text(out_dir / "run.log", "");
        log.emplace(out_dir / "run.log", true);

        const auto& g = *config.sweep;
        auto or_base = [](const std::vector<double>& v, double base) {
            return v.empty() ? std::vector<double>{base} : v;
        };
        const auto periods = or_base(g.period_nm, config.index.period_nm);
        const auto gaps = or_base(g.gap_nm, config.index.gap_nm);
        const auto dhs = or_base(g.d_h_nm, config.d_h_nm);
        const auto dls = or_base(g.d_l_nm, config.d_l_nm);
        const auto scales = or_base(g.scale, config.index.scale);

        struct Point
        {
            double period, gap, d_h, d_l, scale;
            std::string status = "ok";
            double a = 0.0, b = 0.0, shift = 0.0;
        };
        std::vector<Point> points;
        for (double a : periods)
            for (double gp : gaps)
                for (double dh : dhs)
                    for (double dl : dls)
                        for (double s : scales)
                            points.push_back({a, gp, dh, dl, s});

        const int threads = std::clamp<int>(config.workers, 1, static_cast<int>(points.size()));
        const int inner = std::max(1, config.workers / threads);
        const GridCache cache(cache_dir(out_dir));
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < points.size(); i = next++) {
                auto& p = points[i];
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    RunConfig c = config;
                    c.index.period_nm = p.period;
                    c.index.gap_nm = p.gap;
                    c.index.scale = p.scale;
                    c.d_h_nm = p.d_h;
                    c.d_l_nm = p.d_l;
                    c.cutoff.workers = inner;
                    const auto stack = c.stack();
                    const auto mass = cached_mass(stack, c.cutoff, cache, *log);
                    p.a = mass.coeffs.a_ev;
                    p.b = mass.coeffs.b_ev;
                    p.shift = ionization::ionization_shift(mass.coeffs, {0, 0});
                    if (!mass.coeffs.converged)
                        throw ConvergenceError(mass.coeffs.message);
                    log->event("point", {{"index", i},
                                         {"A_ev", p.a},
                                         {"B_ev", p.b},
                                         {"solves", mass.solves},
                                         {"seconds", seconds_since(t0)}});
                } catch (const std::exception& e) {
                    p.status = "failed";
                    log->event("point_failed", {{"index", i},
                                                {"exit_code", exit_code_for(e)},
                                                {"message", e.what()}});
                }
            }
        };
        if (threads == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t)
                pool.emplace_back(work);
            for (auto& t : pool)
                t.join();
        }

        std::ostringstream os;
        os << "period_nm,gap_nm,d_h_nm,d_l_nm,scale,A_ev,B_ev,dE_ion_ev,status\n";
        bool failed = false;
        for (const auto& p : points) {
            os << shortest(p.period) << ',' << shortest(p.gap) << ',' << shortest(p.d_h) << ','
               << shortest(p.d_l) << ',' << shortest(p.scale) << ',';
            if (p.status == "ok")
                os << fixed(p.a, 9) << ',' << fixed(p.b, 9) << ',' << fixed(p.shift, 9);
            else
                os << ",,";
            os << ',' << p.status << '\n';
            failed = failed || p.status != "ok";
        }
        write_text(out_dir / "sweep.csv", os.str());
        log->event("done", {{"points", points.size()}, {"failed", failed}});
        return failed ? kPartialSweep : kOk;
    } catch (const std::exception& e) {
        return fail(e, out_dir, log ? &*log : nullptr);
    }
}

} // namespace pcion::pipeline
