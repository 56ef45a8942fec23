#pragma once

#include <cstdint>
#include <string>

namespace flowcast::timeutil {

// Civil-calendar arithmetic on UTC timestamps. The project-wide clock is the
// integer count of hours since the Unix epoch; everything upstream of
// ingestion converts into it once and all window math happens on it.

// Days since 1970-01-01 for a proleptic Gregorian date.
int64_t days_from_civil(int64_t y, unsigned m, unsigned d);
void civil_from_days(int64_t z, int64_t& y, unsigned& m, unsigned& d);

// 0 = Monday ... 6 = Sunday
int weekday_from_day(int64_t day);

// "YYYY-MM-DD HH:MM:SS" -> seconds since epoch (UTC). Throws on malformed input.
int64_t parse_datetime(const std::string& s);
// "YYYY-MM-DD" -> day index since epoch. Throws on malformed input.
int64_t parse_date(const std::string& s);

// Non-throwing variant used by the record parsers.
bool try_parse_datetime(const std::string& s, int64_t& seconds_out);

std::string format_hour(int64_t hours_since_epoch);  // "YYYY-MM-DD HH:00:00"
std::string format_day(int64_t day_index);           // "YYYY-MM-DD"

inline int64_t hour_of_day(int64_t hours_since_epoch) {
  int64_t h = hours_since_epoch % 24;
  return h < 0 ? h + 24 : h;
}

inline int64_t day_of_hour(int64_t hours_since_epoch) {
  int64_t h = hours_since_epoch;
  return h >= 0 ? h / 24 : -((-h + 23) / 24);
}

inline int64_t hour_of_week(int64_t hours_since_epoch) {
  return weekday_from_day(day_of_hour(hours_since_epoch)) * 24 + hour_of_day(hours_since_epoch);
}

// Month name + ordinal day, e.g. "May 13th".
std::string human_date(int64_t day_index);
// English weekday name.
std::string weekday_name(int64_t day_index);

}  // namespace flowcast::timeutil
