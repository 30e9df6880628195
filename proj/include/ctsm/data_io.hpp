#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctsm/panel.hpp"

namespace ctsm {

struct IngestReport {
    int rows_read = 0;
    int masked_missing = 0;
    int masked_nonpositive = 0;
    int dates_dropped = 0;
    std::vector<std::string> notes;
};

struct FuturesLoadOptions {
    // The front contract is excluded by default: it is illiquid near expiry
    // and traded at negative prices in April 2020.
    bool exclude_front = true;
    double step = 1.0 / kTradingDaysPerYear;
};

/// Reads `date,F1,F2,...` (ISO dates, prices). Keeps `contracts` (all columns
/// when empty), takes natural logs and sets per-date maturities from the
/// contract calendar. Missing cells and non-positive prices are masked.
/// Throws ParseError with row/column context or EmptyPanel.
Panel load_futures_csv(std::istream& in, const std::vector<std::string>& contracts = {},
                       const FuturesLoadOptions& options = {}, IngestReport* report = nullptr);
Panel load_futures_csv(const std::filesystem::path& path,
                       const std::vector<std::string>& contracts = {},
                       const FuturesLoadOptions& options = {}, IngestReport* report = nullptr);

/// Reads `date,R3,R6,...` with rates in percent; returns decimal yields with
/// fixed maturities taken from the tenor in months. Missing cells are masked.
Panel load_yields_csv(std::istream& in, const std::vector<std::string>& tenors = {},
                      IngestReport* report = nullptr);
Panel load_yields_csv(const std::filesystem::path& path, const std::vector<std::string>& tenors = {},
                      IngestReport* report = nullptr);

/// Inner join on dates: futures block from `futures`, yield block from
/// `yields`. Throws EmptyPanel when no date is shared.
Panel join_panels(const Panel& futures, const Panel& yields, IngestReport* report = nullptr);

/// Raw-format writers (prices and percent), the inverse of the loaders.
void write_futures_csv(std::ostream& out, const Panel& panel);
void write_yields_csv(std::ostream& out, const Panel& panel);

/// Panel CSV: date, ln_F_<n>..., R_<months>..., tau_F_<n>...; masked cells
/// are empty.
void write_panel_csv(std::ostream& out, const Panel& panel);
Panel read_panel_csv(std::istream& in, double step = 1.0 / kTradingDaysPerYear);

void write_panel_csv(const std::filesystem::path& path, const Panel& panel);
Panel read_panel_csv(const std::filesystem::path& path, double step = 1.0 / kTradingDaysPerYear);

/// Hidden states next to the panel dates: date, x_1..x_n.
void write_states_csv(std::ostream& out, const Panel& panel, const Eigen::MatrixXd& states,
                      const std::vector<std::string>& names);

/// Formats a double so that parsing it back is exact.
std::string format_double(double value);

}  // namespace ctsm
