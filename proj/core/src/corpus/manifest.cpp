#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mmsi/corpus.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"

namespace mmsi::corpus {
namespace {

using nlohmann::json;

const json& require(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw DataError(fmt::format("missing key '{}'", key));
  return *it;
}

std::string require_string(const json& record, const char* key) {
  const json& v = require(record, key);
  if (!v.is_string()) throw DataError(fmt::format("key '{}' must be a string", key));
  return v.get<std::string>();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line, line_no);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

}  // namespace

Post post_from_json(const json& record) {
  if (!record.is_object()) throw DataError("record is not a JSON object");
  Post post;
  post.post_id = require_string(record, "post_id");
  if (post.post_id.empty()) throw DataError("empty post_id");
  post.source_org = require_string(record, "source_org");
  post.caption_text = require_string(record, "caption_text");
  post.video_ref = require_string(record, "video_ref");

  const json& reactions = require(record, "reactions");
  if (!reactions.is_object()) throw DataError("key 'reactions' must be an object");
  for (const auto& [name, count] : reactions.items()) {
    auto idx = reaction_index(name);
    if (!idx) throw DataError(fmt::format("unknown reaction key '{}'", name));
    if (!count.is_number_integer()) {
      throw DataError(fmt::format("reaction '{}' must be an integer", name));
    }
    const auto value = count.get<std::int64_t>();
    if (value < 0) throw DataError(fmt::format("reaction '{}' is negative", name));
    post.reactions_raw[*idx] = value;
  }

  if (auto it = record.find("posted_at"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("key 'posted_at' must be a string or null");
    post.posted_at = it->get<std::string>();
  }
  return post;
}

json post_to_json(const Post& post) {
  json reactions = json::object();
  for (std::size_t i = 0; i < kReactionCount; ++i) {
    if (post.reactions_raw[i] != 0) reactions[std::string(kReactionNames[i])] = post.reactions_raw[i];
  }
  json record = {{"post_id", post.post_id},
                 {"source_org", post.source_org},
                 {"caption_text", post.caption_text},
                 {"video_ref", post.video_ref},
                 {"reactions", reactions}};
  record["posted_at"] = post.posted_at ? json(*post.posted_at) : json(nullptr);
  return record;
}

std::vector<Post> parse_manifest(std::string_view text, std::string_view origin) {
  std::vector<Post> posts;
  std::map<std::string, std::size_t> seen;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    Post post;
    try {
      post = post_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: malformed record: {}", origin, line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
    auto [it, inserted] = seen.emplace(post.post_id, line_no);
    if (!inserted) {
      throw DataError(fmt::format("{}:{}: duplicate post_id \"{}\" (first seen on line {})",
                                  origin, line_no, post.post_id, it->second));
    }
    posts.push_back(std::move(post));
  });
  return posts;
}

std::vector<Post> load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw DataError(fmt::format("manifest not found: {}", path.string()));
  }
  return parse_manifest(read_file(path), path.string());
}

void write_manifest(const std::filesystem::path& path, std::span<const Post> posts) {
  std::string text;
  for (const Post& p : posts) text += post_to_json(p).dump() + "\n";
  write_file_atomic(path, text);
}

std::vector<Example> load_examples(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<Example> out;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    try {
      json r = json::parse(line);
      Example ex;
      ex.example_id = r.at("example_id").get<std::string>();
      ex.video_post_id = r.at("video_post_id").get<std::string>();
      ex.caption_post_id = r.at("caption_post_id").get<std::string>();
      ex.label = label_from_string(r.at("label").get<std::string>());
      if ((ex.label == Label::pristine) != (ex.video_post_id == ex.caption_post_id)) {
        throw DataError("label disagrees with post pairing");
      }
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: malformed example: {}", path.string(), line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  });
  return out;
}

std::string serialize_examples(std::span<const Example> examples) {
  std::string text;
  for (const Example& ex : examples) {
    json r = {{"example_id", ex.example_id},
              {"video_post_id", ex.video_post_id},
              {"caption_post_id", ex.caption_post_id},
              {"label", to_string(ex.label)}};
    text += r.dump() + "\n";
  }
  return text;
}

void write_examples(const std::filesystem::path& path, std::span<const Example> examples) {
  write_file_atomic(path, serialize_examples(examples));
}

json split_to_json(const SplitAssignment& split) {
  json out = json::object();
  for (const auto& [id, part] : split.partitions) out[id] = to_string(part);
  out["seed"] = split.seed;
  return out;
}

SplitAssignment split_from_json(const json& value) {
  if (!value.is_object()) throw DataError("split file must hold a JSON object");
  SplitAssignment split;
  for (const auto& [key, v] : value.items()) {
    if (key == "seed") {
      split.seed = v.get<std::uint64_t>();
    } else {
      split.partitions[key] = partition_from_string(v.get<std::string>());
    }
  }
  return split;
}

}  // namespace mmsi::corpus
