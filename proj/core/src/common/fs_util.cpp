#include "mmsi/fs_util.hpp"

#include <unistd.h>

#include <atomic>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "mmsi/errors.hpp"

namespace mmsi {
namespace fs = std::filesystem;

fs::path temp_path_for(const fs::path& target) {
  static std::atomic<std::uint64_t> counter{0};
  auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  // The extension stays last so format sniffing by suffix still works.
  return target.parent_path() /
         fmt::format(".{}.tmp.{}.{:x}.{}{}", target.stem().string(), ::getpid(), tid & 0xffffff,
                     counter.fetch_add(1), target.extension().string());
}

void write_file_atomic(const fs::path& target, std::span<const std::byte> bytes) {
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = temp_path_for(target);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot open {} for writing", tmp.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw DataError(fmt::format("short write to {}", tmp.string()));
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError(fmt::format("cannot rename into {}: {}", target.string(), ec.message()));
  }
}

void write_file_atomic(const fs::path& target, std::string_view text) {
  write_file_atomic(target, std::as_bytes(std::span(text.data(), text.size())));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string encode_filename(std::string_view id) {
  std::string out;
  out.reserve(id.size());
  for (std::size_t i = 0; i < id.size(); ++i) {
    const auto c = static_cast<unsigned char>(id[i]);
    const bool safe = std::isalnum(c) || c == '_' || c == '-' || (c == '.' && i > 0);
    if (safe) {
      out.push_back(static_cast<char>(c));
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  return out;
}

std::string slugify(std::string_view text) {
  std::string out;
  bool dash = false;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      if (dash && !out.empty()) out.push_back('-');
      dash = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      dash = true;
    }
  }
  return out;
}

}  // namespace mmsi
