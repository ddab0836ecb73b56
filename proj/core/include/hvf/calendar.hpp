#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hvf {

using Timestamp = std::chrono::sys_seconds;

inline constexpr std::size_t kStepsPerDay = 96;
inline constexpr int kStepSeconds = 900;

/// "YYYY-MM-DDTHH:MM:SS" (a trailing 'Z' is accepted on input).
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);
/// "YYYY-MM-DD" at 00:00.
std::optional<Timestamp> parse_date(std::string_view text);

/// A recurring holiday given as month and day.
struct MonthDay {
  unsigned month = 1, day = 1;
  friend bool operator==(const MonthDay&, const MonthDay&) = default;
};

/// Parses "MM-DD".
std::optional<MonthDay> parse_month_day(std::string_view text);
std::string format_month_day(MonthDay md);

/// Start instant plus a 15-minute grid and a fixed-date holiday list.
class Calendar {
 public:
  Calendar(Timestamp start, std::size_t days, std::vector<MonthDay> holidays = default_holidays());

  static std::vector<MonthDay> default_holidays();

  std::size_t days() const noexcept { return days_; }
  std::size_t steps() const noexcept { return days_ * kStepsPerDay; }
  Timestamp start() const noexcept { return start_; }
  Timestamp at(std::size_t step) const;
  const std::vector<MonthDay>& holidays() const noexcept { return holidays_; }

  bool is_holiday(Timestamp t) const;
  /// Monday–Friday and not a holiday.
  bool is_working_day(Timestamp t) const;
  /// Working day between 07:00 (inclusive) and 19:00 (exclusive).
  bool is_occupied(Timestamp t) const;
  bool is_occupied(std::size_t step) const { return is_occupied(at(step)); }

 private:
  Timestamp start_;
  std::size_t days_;
  std::vector<MonthDay> holidays_;
};

/// True when the calendar date of `t` is in `holidays`.
bool is_holiday(Timestamp t, const std::vector<MonthDay>& holidays);

/// Hour of day as a fraction (e.g. 6.25 for 06:15).
double fractional_hour(Timestamp t);
/// 0 = Monday … 6 = Sunday.
unsigned iso_weekday_index(Timestamp t);
/// 0 = January … 11 = December.
unsigned month_index(Timestamp t);
/// 1-based day of year.
unsigned day_of_year(Timestamp t);

}  // namespace hvf
