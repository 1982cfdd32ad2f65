#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "rcd/common.hpp"

namespace rcd {

struct CivilDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

/// Parses `YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|+00:00]` as UTC. Returns
/// nullopt on any syntax or range problem.
std::optional<Timestamp> parse_iso8601(std::string_view text);

std::string format_iso8601(Timestamp t);

CivilDate civil_date(Timestamp t);
Timestamp to_timestamp(const CivilDate& d, int hour = 0, int minute = 0,
                       int second = 0);

/// "YYYY-MM-DD"
std::string format_date(const CivilDate& d);
std::optional<CivilDate> parse_date(std::string_view text);

/// 0 = Sunday ... 6 = Saturday.
unsigned weekday_of(const CivilDate& d);

}  // namespace rcd
