#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace mmsi {

// Unique sibling path for staging a write to `target`.
std::filesystem::path temp_path_for(const std::filesystem::path& target);

// Writes `bytes` to a temp sibling and renames it over `target`; readers never
// observe a partially written file.
void write_file_atomic(const std::filesystem::path& target, std::span<const std::byte> bytes);
void write_file_atomic(const std::filesystem::path& target, std::string_view text);

std::string read_file(const std::filesystem::path& path);

// Reversible filename encoding for identifiers: [A-Za-z0-9._-] pass through,
// everything else becomes %XX. A leading '.' is escaped too.
std::string encode_filename(std::string_view id);

// Lower-case ASCII slug: runs of non-alphanumerics collapse to '-'.
std::string slugify(std::string_view text);

}  // namespace mmsi
