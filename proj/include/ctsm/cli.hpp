#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsm/estimation.hpp"
#include "ctsm/model_zoo.hpp"

namespace ctsm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsageError = 2;

/// Everything a run depends on. The output directory is excluded from the
/// JSON form so that identical runs into different directories produce
/// identical manifests.
struct RunConfig {
    std::string command;
    ModelId model = ModelId::SRV4F;
    FitMode mode = FitMode::FuturesOnly;

    std::filesystem::path panel_csv;
    std::filesystem::path futures_csv;
    std::filesystem::path yields_csv;
    std::filesystem::path params_json;
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path output_dir;

    std::optional<std::uint64_t> seed;

    // simulate
    int days = 2000;
    std::string start_date = "2015-01-02";
    double sigma_eps = 0.01;
    double sigma_psi = 0.002;
    std::vector<std::string> simulate_futures{"F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11"};

    // estimate, evaluate
    std::vector<std::string> estimation_futures{"F2", "F4", "F6", "F8", "F10"};
    std::vector<std::string> yields{"R3", "R6"};
    std::vector<std::string> holdout{"F3", "F5", "F7", "F9", "F11"};
    int n_starts = 5;
    int evals_per_start = 4000;
    int max_restarts = 3;
    int evals_per_restart = 6000;
    int polish_iter = 60;
    bool standard_errors = true;
    int burn_in = 50;
    bool abs_mape = false;
    bool include_front = false;
};

nlohmann::json to_json(const RunConfig& config);
/// Unknown keys are rejected with InvalidArgument.
RunConfig run_config_from_json(const nlohmann::json& j);

/// FNV-1a hash of the canonical JSON dump.
std::uint64_t config_hash(const nlohmann::json& config);

/// Output directory used when none is given: $CTSM_OUTPUT_DIR, else "ctsm_out".
std::filesystem::path default_output_dir();

/// Entry point. Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctsm::cli
