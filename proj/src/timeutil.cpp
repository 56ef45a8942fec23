#include "flowcast/timeutil.hpp"

#include <cstdio>
#include <stdexcept>

namespace flowcast::timeutil {

int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t yr = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yr + (m <= 2);
}

int weekday_from_day(int64_t day) {
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  int64_t w = (day + 3) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w);
}

static bool parse_fixed(const std::string& s, int64_t& y, unsigned& mo, unsigned& d, unsigned& hh,
                        unsigned& mi, unsigned& ss, bool date_only) {
  int yy = 0;
  unsigned m2 = 0, d2 = 0, h2 = 0, mi2 = 0, s2 = 0;
  if (date_only) {
    if (std::sscanf(s.c_str(), "%d-%u-%u", &yy, &m2, &d2) != 3) return false;
  } else {
    if (std::sscanf(s.c_str(), "%d-%u-%u %u:%u:%u", &yy, &m2, &d2, &h2, &mi2, &s2) != 6)
      return false;
  }
  if (m2 < 1 || m2 > 12 || d2 < 1 || d2 > 31 || h2 > 23 || mi2 > 59 || s2 > 60) return false;
  y = yy;
  mo = m2;
  d = d2;
  hh = h2;
  mi = mi2;
  ss = s2;
  return true;
}

bool try_parse_datetime(const std::string& s, int64_t& seconds_out) {
  int64_t y;
  unsigned mo, d, hh, mi, ss;
  if (!parse_fixed(s, y, mo, d, hh, mi, ss, false)) return false;
  seconds_out = days_from_civil(y, mo, d) * 86400 + hh * 3600 + mi * 60 + ss;
  return true;
}

int64_t parse_datetime(const std::string& s) {
  int64_t sec;
  if (!try_parse_datetime(s, sec)) throw std::invalid_argument("bad datetime: '" + s + "'");
  return sec;
}

int64_t parse_date(const std::string& s) {
  int64_t y;
  unsigned mo, d, hh, mi, ss;
  if (!parse_fixed(s, y, mo, d, hh, mi, ss, true))
    throw std::invalid_argument("bad date: '" + s + "'");
  return days_from_civil(y, mo, d);
}

std::string format_hour(int64_t hours_since_epoch) {
  const int64_t day = day_of_hour(hours_since_epoch);
  const int64_t h = hour_of_day(hours_since_epoch);
  int64_t y;
  unsigned mo, d;
  civil_from_days(day, y, mo, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02lld:00:00", static_cast<long long>(y), mo,
                d, static_cast<long long>(h));
  return buf;
}

std::string format_day(int64_t day_index) {
  int64_t y;
  unsigned mo, d;
  civil_from_days(day_index, y, mo, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", static_cast<long long>(y), mo, d);
  return buf;
}

static const char* kMonthNames[] = {"January",   "February", "March",    "April",
                                    "May",       "June",     "July",     "August",
                                    "September", "October",  "November", "December"};
static const char* kWeekdayNames[] = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                      "Friday", "Saturday", "Sunday"};

std::string human_date(int64_t day_index) {
  int64_t y;
  unsigned mo, d;
  civil_from_days(day_index, y, mo, d);
  const char* suffix = "th";
  if (d % 100 < 11 || d % 100 > 13) {
    if (d % 10 == 1) suffix = "st";
    else if (d % 10 == 2) suffix = "nd";
    else if (d % 10 == 3) suffix = "rd";
  }
  return std::string(kMonthNames[mo - 1]) + " " + std::to_string(d) + suffix;
}

std::string weekday_name(int64_t day_index) { return kWeekdayNames[weekday_from_day(day_index)]; }

}  // namespace flowcast::timeutil
