#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace countyir {

// Shortest decimal form that parses back to the identical double. All file
// formats use this so emitted artifacts round-trip bit for bit.
std::string fmt_double(double value);

// Strict full-string numeric parses; return false without touching `out` on
// any trailing garbage.
bool try_parse_double(std::string_view text, double& out);
bool try_parse_int64(std::string_view text, std::int64_t& out);
bool try_parse_uint64(std::string_view text, std::uint64_t& out);

std::string_view trim(std::string_view text);

// Minimal RFC-4180 style CSV: quoted fields, doubled quotes, no embedded
// newlines. Enough for every format this project defines.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);
std::string join_csv(const std::vector<std::string>& fields);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n', dropping a trailing '\r' per line and a trailing empty line.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace countyir
