#pragma once

#include <string>
#include <vector>

namespace sfpca {

/// Writes content to a temp file in the target directory, then renames over
/// the destination, so readers never observe a partial file.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Shortest round-trip decimal form of a double (%.17g trimmed).
std::string format_double(double v);

/// One CSV line from fields, joined with commas. Fields are written as-is;
/// callers quote if needed (ids in this project are plain tokens).
std::string csv_line(const std::vector<std::string>& fields);

/// Current UTC time as ISO-8601 (e.g. 2024-05-01T12:00:00Z).
std::string utc_timestamp();

/// Creates the directory (and parents) if missing; throws FormatError when a
/// non-directory is in the way.
void ensure_directory(const std::string& path);

}  // namespace sfpca
