#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace upf::io {

namespace fs = std::filesystem;

// Throws MissingInputError when the file does not exist.
void require_file(const fs::path& path);

// Calls fn(line, line_number) for every non-blank line (1-based numbering).
void for_each_line(const fs::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

std::string read_file(const fs::path& path);

// Writes to a sibling temp file, then renames over `path`.
void write_atomic(const fs::path& path, std::string_view contents);

std::vector<std::string> split_csv_line(std::string_view line);

double parse_double(std::string_view text, std::string_view context);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const fs::path& path);

// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace upf::io
