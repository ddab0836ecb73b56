#include "hvf/calendar.hpp"

#include <algorithm>
#include <cstdio>

#include "hvf/errors.hpp"

namespace hvf {

using namespace std::chrono;

std::string format_timestamp(Timestamp t) {
  const auto day = floor<std::chrono::days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  const std::string str(text);
  const int n = std::sscanf(str.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c", &y, &mo, &d, &h, &mi, &s, &tail);
  if (n < 6 || (n == 7 && tail != 'Z')) return std::nullopt;
  if (str.size() != 19 && !(str.size() == 20 && tail == 'Z')) return std::nullopt;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::optional<Timestamp> parse_date(std::string_view text) {
  int y = 0;
  unsigned mo = 0, d = 0;
  const std::string str(text);
  if (str.size() != 10 || std::sscanf(str.c_str(), "%4d-%2u-%2u", &y, &mo, &d) != 3) return std::nullopt;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Timestamp{sys_days{ymd}};
}

std::optional<MonthDay> parse_month_day(std::string_view text) {
  unsigned mo = 0, d = 0;
  const std::string str(text);
  if (str.size() != 5 || std::sscanf(str.c_str(), "%2u-%2u", &mo, &d) != 2) return std::nullopt;
  // 2000 is a leap year, so 02-29 is admissible.
  if (!year_month_day{year{2000}, month{mo}, day{d}}.ok()) return std::nullopt;
  return MonthDay{mo, d};
}

std::string format_month_day(MonthDay md) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02u-%02u", md.month, md.day);
  return buf;
}

Calendar::Calendar(Timestamp start, std::size_t days, std::vector<MonthDay> holidays)
    : start_(start), days_(days), holidays_(std::move(holidays)) {
  if (days_ == 0) throw ConfigError("calendar: days must be at least 1");
}

std::vector<MonthDay> Calendar::default_holidays() {
  return {{1, 1}, {5, 1}, {5, 17}, {12, 24}, {12, 25}, {12, 26}, {12, 31}};
}

Timestamp Calendar::at(std::size_t step) const {
  return start_ + seconds{static_cast<long long>(step) * kStepSeconds};
}

bool is_holiday(Timestamp t, const std::vector<MonthDay>& holidays) {
  const year_month_day ymd{floor<std::chrono::days>(t)};
  const MonthDay md{static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day())};
  return std::find(holidays.begin(), holidays.end(), md) != holidays.end();
}

bool Calendar::is_holiday(Timestamp t) const { return hvf::is_holiday(t, holidays_); }

bool Calendar::is_working_day(Timestamp t) const {
  return iso_weekday_index(t) < 5 && !is_holiday(t);
}

bool Calendar::is_occupied(Timestamp t) const {
  if (!is_working_day(t)) return false;
  const double h = fractional_hour(t);
  return h >= 7.0 && h < 19.0;
}

double fractional_hour(Timestamp t) {
  const auto since = t - floor<std::chrono::days>(t);
  return static_cast<double>(since.count()) / 3600.0;
}

unsigned iso_weekday_index(Timestamp t) {
  return weekday{floor<std::chrono::days>(t)}.iso_encoding() - 1;
}

unsigned month_index(Timestamp t) {
  return static_cast<unsigned>(year_month_day{floor<std::chrono::days>(t)}.month()) - 1;
}

unsigned day_of_year(Timestamp t) {
  const auto d = floor<std::chrono::days>(t);
  const year_month_day ymd{d};
  const sys_days jan1{ymd.year() / January / 1};
  return static_cast<unsigned>((d - jan1).count()) + 1;
}

}  // namespace hvf
