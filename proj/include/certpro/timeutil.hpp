#pragma once

#include <string>
#include <string_view>

namespace certpro {

// RFC 3339 UTC, whole seconds ("2024-01-31T09:30:00Z"). The fixed-width form
// compares chronologically under plain string comparison.
std::string now_rfc3339();
bool is_rfc3339_utc(std::string_view s);

}  // namespace certpro
