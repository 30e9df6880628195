#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ctsm {

using Date = std::chrono::year_month_day;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kTradingDaysPerYear = 252.0;

/// Parses YYYY-MM-DD; throws ParseError.
Date parse_date(std::string_view text);
std::string format_date(const Date& d);

/// Time-indexed observations: log futures prices with per-entry maturity and
/// continuously compounded yields at fixed maturities. Masked entries hold NaN.
struct Panel {
    std::vector<Date> dates;
    double step = 1.0 / kTradingDaysPerYear;

    std::vector<std::string> futures_labels;
    Eigen::MatrixXd log_futures;  // T x H
    Eigen::MatrixXd futures_tau;  // T x H, years
    MaskMatrix futures_mask;      // true where observed

    std::vector<std::string> yield_labels;
    std::vector<double> yield_maturities;  // years
    Eigen::MatrixXd yields;                // T x K, decimal per year
    MaskMatrix yield_mask;

    int num_dates() const { return static_cast<int>(dates.size()); }
    int num_futures() const { return static_cast<int>(futures_labels.size()); }
    int num_yields() const { return static_cast<int>(yield_labels.size()); }

    /// Number of unmasked observations across all dates and series.
    long observation_count() const;

    /// Largest futures maturity on any observed entry (0 when none).
    double max_tau() const;

    /// Sub-panel restricted to the named series (order as given). Throws
    /// InvalidArgument on unknown labels.
    Panel select(const std::vector<std::string>& futures,
                 const std::vector<std::string>& yields) const;

    /// Rows [begin, end).
    Panel slice(int begin, int end) const;

    /// Drops every date with any masked entry.
    Panel balanced() const;

    /// Checks shapes, date order, finiteness of unmasked entries and positive
    /// maturities. Throws InvalidArgument or EmptyPanel.
    void validate() const;
};

/// Index of `label` in `labels`, or -1.
int index_of(const std::vector<std::string>& labels, std::string_view label);

}  // namespace ctsm
