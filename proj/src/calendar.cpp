#include "ctsm/calendar.hpp"

#include <charconv>
#include <string>

#include "ctsm/errors.hpp"

namespace ctsm {

namespace chr = std::chrono;

namespace {

Date nth_weekday(chr::year y, chr::month m, chr::weekday wd, unsigned n) {
    return Date{chr::year_month_weekday{y / m / wd[n]}};
}

Date last_weekday(chr::year y, chr::month m, chr::weekday wd) {
    return Date{chr::year_month_weekday_last{y, m, wd[chr::last]}};
}

// Saturday holidays are observed on Friday, Sunday holidays on Monday.
Date observed(const Date& d) {
    const chr::sys_days s{d};
    const chr::weekday wd{s};
    if (wd == chr::Saturday) return Date{s - chr::days{1}};
    if (wd == chr::Sunday) return Date{s + chr::days{1}};
    return d;
}

bool holiday_in_year(const Date& d, chr::year y) {
    using namespace std::chrono;
    const Date fixed[] = {
        observed(Date{y / January / 1}),
        observed(Date{y / July / 4}),
        observed(Date{y / November / 11}),
        observed(Date{y / December / 25}),
    };
    for (const Date& h : fixed)
        if (h == d) return true;
    if (y >= year{2021} && observed(Date{y / June / 19}) == d) return true;
    if (y >= year{1986} && nth_weekday(y, January, Monday, 3) == d) return true;
    return nth_weekday(y, February, Monday, 3) == d || last_weekday(y, May, Monday) == d ||
           nth_weekday(y, September, Monday, 1) == d || nth_weekday(y, October, Monday, 2) == d ||
           nth_weekday(y, November, Thursday, 4) == d;
}

int parse_suffix(std::string_view label, char prefix) {
    int value = 0;
    if (label.size() < 2 || label[0] != prefix) {
        throw InvalidArgument("malformed series label '" + std::string(label) + "'");
    }
    const auto [ptr, ec] = std::from_chars(label.data() + 1, label.data() + label.size(), value);
    if (ec != std::errc{} || ptr != label.data() + label.size() || value < 1) {
        throw InvalidArgument("malformed series label '" + std::string(label) + "'");
    }
    return value;
}

}  // namespace

bool is_us_federal_holiday(const Date& d) {
    // New Year's Day falling on a Saturday is observed on Dec 31 of the
    // previous year.
    return holiday_in_year(d, d.year()) || holiday_in_year(d, d.year() + chr::years{1});
}

bool is_business_day(const Date& d) {
    const chr::weekday wd{chr::sys_days{d}};
    return wd != chr::Saturday && wd != chr::Sunday && !is_us_federal_holiday(d);
}

Date next_business_day(const Date& d) { return add_business_days(d, 1); }

Date add_business_days(const Date& d, int count) {
    chr::sys_days s{d};
    const int dir = count >= 0 ? 1 : -1;
    for (int left = count * dir; left > 0;) {
        s += chr::days{dir};
        if (is_business_day(Date{s})) --left;
    }
    return Date{s};
}

Date last_trading_day(chr::year_month delivery) {
    return add_business_days(Date{delivery / chr::day{1}}, -3);
}

Date midweek_maturity(chr::year_month delivery) {
    const chr::sys_days mid{delivery / chr::day{15}};
    const unsigned from_sunday = chr::weekday{mid}.c_encoding();
    return Date{mid - chr::days{from_sunday} + chr::days{3}};
}

chr::year_month delivery_month(const Date& observed_on, int n) {
    if (n < 1) throw InvalidArgument("contract number must be >= 1");
    chr::year_month ym{observed_on.year(), observed_on.month()};
    while (chr::sys_days{last_trading_day(ym)} < chr::sys_days{observed_on}) ym += chr::months{1};
    return ym + chr::months{n - 1};
}

double maturity_of(const Date& observed_on, int n) {
    const Date maturity = midweek_maturity(delivery_month(observed_on, n));
    const auto days = (chr::sys_days{maturity} - chr::sys_days{observed_on}).count();
    return static_cast<double>(days) / 365.0;
}

int contract_number(std::string_view label) { return parse_suffix(label, 'F'); }

double yield_tenor_years(std::string_view label) { return parse_suffix(label, 'R') / 12.0; }

}  // namespace ctsm
