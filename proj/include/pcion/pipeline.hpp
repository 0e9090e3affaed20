#pragma once

#include "pcion/bloch.hpp"
#include "pcion/ionization.hpp"
#include "pcion/qed_mass.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pcion::pipeline {

// How the high-index layer is described in a config file.
struct IndexSpec
{
    std::string kind = "constant";  // constant | sellmeier | tabulated | metamaterial
    double n = 1.0;
    double c1_ev2 = 0.0;
    double c2_ev4 = 0.0;
    std::filesystem::path table;     // tabulated: n table; metamaterial: gap dielectric n table
    double period_nm = 30.0;
    double gap_nm = 0.5;
    double rolloff_ev = 8.5;
    double rolloff_exponent = 2.0;
    double scale = 1.0;              // excess scale, n -> 1 + s (n - 1)

    materials::IndexModel build() const;
};

struct SweepGrid
{
    std::vector<double> period_nm, gap_nm, d_h_nm, d_l_nm, scale;
};

struct RunConfig
{
    double d_h_nm = 20.0;
    double d_l_nm = 20.0;
    double n_l = 1.0;
    IndexSpec index;
    qed::CutoffConfig cutoff;
    std::filesystem::path atoms;
    std::optional<int> figure;
    std::optional<SweepGrid> sweep;
    int workers = 1;

    bloch::Stack1D stack() const;
};

// Parses a JSON config. Relative paths resolve against the config's directory.
// Throws ConfigError on any problem, including missing referenced files.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);

// Canonical text of everything that determines one sampled grid; the cache
// key is its FNV-1a 64-bit hash.
std::string canonical_grid(const bloch::Stack1D& stack, const qed::CutoffConfig& cutoff, int order,
                           double omega_lo_ev, double omega_hi_ev);
std::uint64_t fnv1a64(const std::string& text);

class GridCache
{
public:
    explicit GridCache(std::filesystem::path dir);

    std::optional<qed::GridSums> load(const std::string& canonical) const;
    // Written to a temporary file and renamed into place.
    void store(const std::string& canonical, const qed::GridSums& sums) const;
    std::filesystem::path path_for(const std::string& canonical) const;

private:
    std::filesystem::path dir_;
};

std::string serialize_grid(const std::string& canonical, const qed::GridSums& sums);
std::optional<qed::GridSums> parse_grid(const std::string& text, const std::string& canonical);

// One JSON object per line with a "stage" field, appended to a file and
// optionally echoed to stderr. Safe to share between threads.
class RunLog
{
public:
    explicit RunLog(std::optional<std::filesystem::path> file = std::nullopt, bool echo = false);
    void event(const std::string& stage, nlohmann::ordered_json fields = nlohmann::ordered_json::object());

private:
    std::optional<std::filesystem::path> file_;
    bool echo_;
    std::mutex mutex_;
};

struct MassResult
{
    qed::MassCoefficients coeffs;
    int cache_hits = 0;
    int cache_misses = 0;
    std::uint64_t solves = 0;
};

// compute_AB with every sampled grid looked up in (or added to) the cache.
MassResult cached_mass(const bloch::Stack1D& stack, const qed::CutoffConfig& cutoff,
                       const GridCache& cache, RunLog& log);

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kConvergence = 3,
    kPartialSweep = 4,
};

std::filesystem::path cache_dir(const std::filesystem::path& out_dir);

// Writes index_curve.csv, mass_coefficients.json, ionization_report.csv, the
// plot script and run.log into out_dir. Returns the exit code; failures also
// write error.json.
int run(const RunConfig& config, const std::filesystem::path& out_dir,
        std::optional<int> figure = std::nullopt);

// Writes sweep.csv (grid order) and run.log.
int sweep(const RunConfig& config, const std::filesystem::path& out_dir);

// Exit code for an exception escaping a module.
int exit_code_for(const std::exception& e);
std::string error_json(const std::exception& e, int code);

} // namespace pcion::pipeline
