#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace certpro {

// Lowercase-hex SHA-256. All content identities in the repository derive
// from these two entry points.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

bool is_hex_digest(std::string_view s);

}  // namespace certpro
