#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/extractors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/hashing.hpp"
#include "mmsi/json_util.hpp"

namespace mmsi::extractors {
namespace fs = std::filesystem;
using nlohmann::json;
namespace {

constexpr int kReadAttempts = 5;

std::string encode_payload(std::span<const float> values) {
  std::string bytes(values.size() * sizeof(float), '\0');
  if constexpr (std::endian::native == std::endian::little) {
    if (!values.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto u = std::bit_cast<std::uint32_t>(values[i]);
      for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((u >> (8 * b)) & 0xFF);
    }
  }
  return bytes;
}

std::vector<float> decode_payload(std::string_view bytes) {
  std::vector<float> values(bytes.size() / sizeof(float));
  if constexpr (std::endian::native == std::endian::little) {
    if (!values.empty()) std::memcpy(values.data(), bytes.data(), values.size() * sizeof(float));
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= std::uint32_t(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
      values[i] = std::bit_cast<float>(u);
    }
  }
  return values;
}

std::string decode_filename(std::string_view encoded) {
  std::string out;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] == '%' && i + 2 < encoded.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(encoded.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(encoded[i]);
    }
  }
  return out;
}

std::string payload_checksum(std::string_view bytes) { return to_hex(fnv1a64(bytes)); }

}  // namespace

FeatureCache::FeatureCache(fs::path root) : root_(std::move(root)) {}

fs::path FeatureCache::sidecar_path(std::string_view post_id, const ExtractorId& id) const {
  return root_ / "features" / encode_filename(id.name) / encode_filename(id.version) /
         (encode_filename(post_id) + ".json");
}

void FeatureCache::put(const FeatureRecord& record) const {
  if (record.post_id.empty()) throw UsageError("feature record needs a post_id");
  if (record.extractor.name.empty() || record.extractor.version.empty()) {
    throw UsageError("feature record needs an extractor name and version");
  }
  for (std::int64_t d : record.shape) {
    if (d < 0) throw UsageError(fmt::format("negative dimension in shape {}", shape_to_string(record.shape)));
  }
  if (static_cast<std::int64_t>(record.payload.size()) != shape_numel(record.shape)) {
    throw UsageError(fmt::format("payload of {} values does not match shape {} for {} / {}",
                                 record.payload.size(), shape_to_string(record.shape),
                                 record.post_id, to_string(record.extractor)));
  }
  const std::string bytes = encode_payload(record.payload);
  const std::string checksum = payload_checksum(bytes);
  const fs::path sidecar = sidecar_path(record.post_id, record.extractor);
  const std::string payload_name = encode_filename(record.post_id) + "." + checksum + ".f32";

  // Payload first, sidecar second: the sidecar rename is the commit.
  write_file_atomic(sidecar.parent_path() / payload_name, bytes);
  json meta = {{"post_id", record.post_id},
               {"extractor", record.extractor.name},
               {"version", record.extractor.version},
               {"shape", record.shape},
               {"payload", payload_name},
               {"checksum", checksum}};
  write_json_file(sidecar, meta);
}

std::optional<FeatureRecord> FeatureCache::get(std::string_view post_id,
                                               const ExtractorId& extractor) const {
  const fs::path sidecar = sidecar_path(post_id, extractor);
  for (int attempt = 0; attempt < kReadAttempts; ++attempt) {
    std::error_code ec;
    if (!fs::exists(sidecar, ec)) return std::nullopt;
    json meta;
    try {
      meta = read_json_file(sidecar);
    } catch (const DataError&) {
      if (!fs::exists(sidecar, ec)) return std::nullopt;
      throw DataError(fmt::format("corrupted cache sidecar {}", sidecar.string()));
    }
    FeatureRecord rec;
    std::string payload_name, checksum;
    try {
      rec.post_id = meta.at("post_id").get<std::string>();
      rec.extractor = {meta.at("extractor").get<std::string>(), meta.at("version").get<std::string>()};
      rec.shape = meta.at("shape").get<Shape>();
      payload_name = meta.at("payload").get<std::string>();
      checksum = meta.at("checksum").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(fmt::format("corrupted cache sidecar {}: {}", sidecar.string(), e.what()));
    }
    if (rec.post_id != post_id || rec.extractor != extractor) {
      throw DataError(fmt::format("cache sidecar {} describes {} / {}", sidecar.string(), rec.post_id,
                                  to_string(rec.extractor)));
    }
    const fs::path payload_path = sidecar.parent_path() / payload_name;
    if (!fs::exists(payload_path, ec)) continue;  // superseded between reads; look again
    const std::string bytes = read_file(payload_path);
    const std::int64_t numel = shape_numel(rec.shape);
    if (static_cast<std::int64_t>(bytes.size()) != numel * 4 || payload_checksum(bytes) != checksum) {
      throw DataError(fmt::format("corrupted cache payload {}", payload_path.string()));
    }
    rec.payload = decode_payload(bytes);
    return rec;
  }
  throw DataError(fmt::format("cache payload for {} / {} is missing", post_id, to_string(extractor)));
}

bool FeatureCache::contains(std::string_view post_id, const ExtractorId& extractor) const {
  std::error_code ec;
  return fs::exists(sidecar_path(post_id, extractor), ec);
}

std::vector<CacheKey> FeatureCache::list() const {
  std::vector<CacheKey> keys;
  const fs::path base = root_ / "features";
  std::error_code ec;
  if (!fs::is_directory(base, ec)) return keys;
  for (const auto& name_dir : fs::directory_iterator(base)) {
    if (!name_dir.is_directory()) continue;
    for (const auto& version_dir : fs::directory_iterator(name_dir.path())) {
      if (!version_dir.is_directory()) continue;
      const ExtractorId id{decode_filename(name_dir.path().filename().string()),
                           decode_filename(version_dir.path().filename().string())};
      for (const auto& f : fs::directory_iterator(version_dir.path())) {
        const std::string fname = f.path().filename().string();
        if (!f.is_regular_file() || f.path().extension() != ".json" || fname.front() == '.') continue;
        keys.push_back({decode_filename(f.path().stem().string()), id});
      }
    }
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

void FeatureCache::put_transcript(const TranscriptRecord& record) const {
  if (record.post_id.empty()) throw UsageError("transcript record needs a post_id");
  write_file_atomic(root_ / "transcripts" / (encode_filename(record.post_id) + ".txt"), record.text);
}

std::optional<TranscriptRecord> FeatureCache::get_transcript(std::string_view post_id) const {
  const fs::path p = root_ / "transcripts" / (encode_filename(post_id) + ".txt");
  std::error_code ec;
  if (!fs::exists(p, ec)) return std::nullopt;
  return TranscriptRecord{std::string(post_id), read_file(p)};
}

void FeatureCache::put_names(std::string_view post_id, const PostNames& names) const {
  if (post_id.empty()) throw UsageError("name list needs a post_id");
  write_json_file(root_ / "names" / (encode_filename(post_id) + ".json"),
                  json{{"post_id", post_id},
                       {"caption_names", names.caption_names},
                       {"transcript_names", names.transcript_names}});
}

std::optional<PostNames> FeatureCache::get_names(std::string_view post_id) const {
  const fs::path p = root_ / "names" / (encode_filename(post_id) + ".json");
  std::error_code ec;
  if (!fs::exists(p, ec)) return std::nullopt;
  const json j = read_json_file(p);
  try {
    return PostNames{j.at("caption_names").get<std::vector<std::string>>(),
                     j.at("transcript_names").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupted name list {}: {}", p.string(), e.what()));
  }
}

std::size_t FeatureCache::prune() const {
  std::size_t removed = 0;
  const fs::path base = root_ / "features";
  std::error_code ec;
  if (!fs::is_directory(base, ec)) return 0;
  for (const auto& name_dir : fs::directory_iterator(base)) {
    if (!name_dir.is_directory()) continue;
    for (const auto& version_dir : fs::directory_iterator(name_dir.path())) {
      if (!version_dir.is_directory()) continue;
      std::set<std::string> referenced;
      std::vector<fs::path> payloads;
      for (const auto& f : fs::directory_iterator(version_dir.path())) {
        if (f.path().extension() == ".json") {
          referenced.insert(read_json_file(f.path()).value("payload", std::string()));
        } else if (f.path().extension() == ".f32") {
          payloads.push_back(f.path());
        }
      }
      for (const fs::path& p : payloads) {
        if (!referenced.contains(p.filename().string()) && fs::remove(p, ec)) ++removed;
      }
    }
  }
  return removed;
}

}  // namespace mmsi::extractors
