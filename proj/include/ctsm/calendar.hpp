#pragma once

#include <string_view>

#include "ctsm/panel.hpp"

namespace ctsm {

// U.S. federal holidays by rule, with weekend observance shifts. Juneteenth
// is observed from 2021 on.
bool is_us_federal_holiday(const Date& d);
bool is_business_day(const Date& d);

Date next_business_day(const Date& d);
/// Moves `count` business days forward (count > 0) or backward (count < 0).
Date add_business_days(const Date& d, int count);

/// Trading in a monthly contract stops three business days before the first
/// calendar day of its delivery month.
Date last_trading_day(std::chrono::year_month delivery);

/// Wednesday of the Sunday-start week containing the 15th of the month.
Date midweek_maturity(std::chrono::year_month delivery);

/// Delivery month of the n-th nearest contract still trading on `observed`
/// (n = 1 is the front month).
std::chrono::year_month delivery_month(const Date& observed, int contract_number);

/// Time to maturity in years, ACT/365, of the n-th nearest contract.
double maturity_of(const Date& observed, int contract_number);

/// "F7" -> 7. Throws InvalidArgument.
int contract_number(std::string_view label);
/// "R3" -> 0.25 (tenor in months). Throws InvalidArgument.
double yield_tenor_years(std::string_view label);

}  // namespace ctsm
