#pragma once

// JSON helpers shared by serialization code: bit-exact decimal encoding of
// doubles, interval encoding, and a small stable digest for manifests.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "orbitcert/interval.hpp"

namespace orbitcert {

using Json = nlohmann::json;

/// Shortest decimal string that round-trips to exactly this double.
std::string double_to_decimal(double x);

/// Inverse of double_to_decimal; throws ParseError-style std::runtime_error
/// on malformed input.
double decimal_to_double(const std::string& s);

/// Intervals serialize as {"lo": "<decimal>", "hi": "<decimal>"} with
/// bit-exact endpoint strings.
Json interval_to_json(const Interval& x);
Interval interval_from_json(const Json& j);

/// FNV-1a 64-bit digest of a byte string, and its fixed-width hex form.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

/// Reads an entire file into a string; throws std::runtime_error if missing.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace orbitcert
