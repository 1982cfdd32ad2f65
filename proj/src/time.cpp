#include "rcd/time.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace rcd {
namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* first = s.data() + pos;
  const char* last = first + len;
  for (const char* c = first; c != last; ++c)
    if (*c < '0' || *c > '9') return false;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::chrono::sys_days to_sys_days(const CivilDate& d) {
  using namespace std::chrono;
  return sys_days{year{d.year} / month{d.month} / day{d.day}};
}

}  // namespace

std::optional<CivilDate> parse_date(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m) ||
      !read_int(text, 8, 2, d))
    return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y} / month{static_cast<unsigned>(m)} /
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return CivilDate{y, static_cast<unsigned>(m), static_cast<unsigned>(d)};
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r'))
    text.remove_suffix(1);
  const auto date = parse_date(text);
  if (!date || text.size() < 16) return std::nullopt;
  if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!read_int(text, 11, 2, hh) || text[13] != ':' ||
      !read_int(text, 14, 2, mm))
    return std::nullopt;
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    if (!read_int(text, pos + 1, 2, ss)) return std::nullopt;
    pos += 3;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
  }
  const std::string_view zone = text.substr(pos);
  if (!(zone.empty() || zone == "Z" || zone == "+00:00" || zone == "+0000"))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  return to_timestamp(*date, hh, mm, ss);
}

CivilDate civil_date(Timestamp t) {
  using namespace std::chrono;
  const sys_days days = floor<std::chrono::days>(sys_seconds{seconds{t}});
  const year_month_day ymd{days};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day())};
}

Timestamp to_timestamp(const CivilDate& d, int hour, int minute, int second) {
  const auto days = to_sys_days(d).time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + hour * 3600 + minute * 60 +
         second;
}

std::string format_date(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
  return buf;
}

std::string format_iso8601(Timestamp t) {
  const CivilDate d = civil_date(t);
  const Timestamp secs = t - to_timestamp(d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(d).c_str(),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

unsigned weekday_of(const CivilDate& d) {
  return std::chrono::weekday{to_sys_days(d)}.c_encoding();
}

}  // namespace rcd
