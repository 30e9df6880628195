#include "ctsm/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "ctsm/errors.hpp"

namespace ctsm {

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
        if (pos + len > text.size()) return false;
        const char* first = text.data() + pos;
        auto [ptr, ec] = std::from_chars(first, first + len, out);
        return ec == std::errc{} && ptr == first + len;
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !field(0, 4, y) ||
        !field(5, 2, m) || !field(8, 2, d)) {
        throw ParseError("invalid ISO-8601 date '" + std::string(text) + "'");
    }
    const Date out{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!out.ok()) throw ParseError("invalid calendar date '" + std::string(text) + "'");
    return out;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

int index_of(const std::vector<std::string>& labels, std::string_view label) {
    const auto it = std::find(labels.begin(), labels.end(), label);
    return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

long Panel::observation_count() const {
    return static_cast<long>(futures_mask.count() + yield_mask.count());
}

double Panel::max_tau() const {
    double out = 0.0;
    for (int t = 0; t < num_dates(); ++t)
        for (int i = 0; i < num_futures(); ++i)
            if (futures_mask(t, i)) out = std::max(out, futures_tau(t, i));
    return out;
}

Panel Panel::select(const std::vector<std::string>& futures,
                    const std::vector<std::string>& yield_series) const {
    Panel out;
    out.dates = dates;
    out.step = step;
    const int n_dates = num_dates();
    out.futures_labels = futures;
    out.log_futures.resize(n_dates, static_cast<int>(futures.size()));
    out.futures_tau.resize(n_dates, static_cast<int>(futures.size()));
    out.futures_mask.resize(n_dates, static_cast<int>(futures.size()));
    for (std::size_t j = 0; j < futures.size(); ++j) {
        const int src = index_of(futures_labels, futures[j]);
        if (src < 0) throw InvalidArgument("panel has no futures series '" + futures[j] + "'");
        out.log_futures.col(static_cast<int>(j)) = log_futures.col(src);
        out.futures_tau.col(static_cast<int>(j)) = futures_tau.col(src);
        out.futures_mask.col(static_cast<int>(j)) = futures_mask.col(src);
    }
    out.yield_labels = yield_series;
    out.yields.resize(n_dates, static_cast<int>(yield_series.size()));
    out.yield_mask.resize(n_dates, static_cast<int>(yield_series.size()));
    for (std::size_t j = 0; j < yield_series.size(); ++j) {
        const int src = index_of(yield_labels, yield_series[j]);
        if (src < 0) throw InvalidArgument("panel has no yield series '" + yield_series[j] + "'");
        out.yield_maturities.push_back(yield_maturities[static_cast<std::size_t>(src)]);
        out.yields.col(static_cast<int>(j)) = yields.col(src);
        out.yield_mask.col(static_cast<int>(j)) = yield_mask.col(src);
    }
    return out;
}

Panel Panel::slice(int begin, int end) const {
    if (begin < 0 || end > num_dates() || begin > end) throw InvalidArgument("panel slice out of range");
    Panel out = *this;
    const int len = end - begin;
    out.dates.assign(dates.begin() + begin, dates.begin() + end);
    out.log_futures = log_futures.middleRows(begin, len);
    out.futures_tau = futures_tau.middleRows(begin, len);
    out.futures_mask = futures_mask.middleRows(begin, len);
    out.yields = yields.middleRows(begin, len);
    out.yield_mask = yield_mask.middleRows(begin, len);
    return out;
}

Panel Panel::balanced() const {
    std::vector<int> keep;
    for (int t = 0; t < num_dates(); ++t) {
        if (futures_mask.row(t).all() && yield_mask.row(t).all()) keep.push_back(t);
    }
    Panel out = *this;
    const int n = static_cast<int>(keep.size());
    out.dates.clear();
    out.log_futures.resize(n, num_futures());
    out.futures_tau.resize(n, num_futures());
    out.futures_mask.resize(n, num_futures());
    out.yields.resize(n, num_yields());
    out.yield_mask.resize(n, num_yields());
    for (int r = 0; r < n; ++r) {
        const int t = keep[static_cast<std::size_t>(r)];
        out.dates.push_back(dates[static_cast<std::size_t>(t)]);
        out.log_futures.row(r) = log_futures.row(t);
        out.futures_tau.row(r) = futures_tau.row(t);
        out.futures_mask.row(r) = futures_mask.row(t);
        out.yields.row(r) = yields.row(t);
        out.yield_mask.row(r) = yield_mask.row(t);
    }
    return out;
}

void Panel::validate() const {
    const int n = num_dates();
    if (n == 0) throw EmptyPanel("panel has no dates");
    if (!(step > 0.0)) throw InvalidArgument("panel step must be positive");
    const int h = num_futures(), k = num_yields();
    if (log_futures.rows() != n || log_futures.cols() != h || futures_tau.rows() != n ||
        futures_tau.cols() != h || futures_mask.rows() != n || futures_mask.cols() != h) {
        throw InvalidArgument("futures block shape does not match dates x labels");
    }
    if (yields.rows() != n || yields.cols() != k || yield_mask.rows() != n ||
        yield_mask.cols() != k || static_cast<int>(yield_maturities.size()) != k) {
        throw InvalidArgument("yield block shape does not match dates x labels");
    }
    for (int t = 1; t < n; ++t) {
        if (!(std::chrono::sys_days{dates[t - 1]} < std::chrono::sys_days{dates[t]})) {
            throw InvalidArgument("panel dates not strictly increasing at " +
                                  format_date(dates[static_cast<std::size_t>(t)]));
        }
    }
    for (int t = 0; t < n; ++t) {
        for (int i = 0; i < h; ++i) {
            if (!futures_mask(t, i)) continue;
            if (!std::isfinite(log_futures(t, i)) || !(futures_tau(t, i) > 0.0)) {
                throw InvalidArgument("invalid futures entry " + futures_labels[i] + " on " +
                                      format_date(dates[static_cast<std::size_t>(t)]));
            }
        }
        for (int j = 0; j < k; ++j) {
            if (yield_mask(t, j) && !std::isfinite(yields(t, j))) {
                throw InvalidArgument("non-finite yield " + yield_labels[j] + " on " +
                                      format_date(dates[static_cast<std::size_t>(t)]));
            }
        }
    }
    for (double m : yield_maturities) {
        if (!(m > 0.0)) throw InvalidArgument("yield maturities must be positive");
    }
}

}  // namespace ctsm
