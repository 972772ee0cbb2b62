#pragma once

#include "firkrylov/linops.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace firkrylov {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Signal CSV: header `u,y`, one sample per row. A non-empty comment is
/// written as a leading `# ` line; the reader skips such lines before the header.
void write_signal_csv(const std::string& path, const Vector& u, const Vector& y,
                      const std::string& comment = "");
void read_signal_csv(const std::string& path, Vector& u, Vector& y);

/// 64-bit FNV-1a, printed as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace firkrylov
