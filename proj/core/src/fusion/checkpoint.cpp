#include <bit>
#include <cstring>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/fusion.hpp"

namespace mmsi::fusion {
namespace {

constexpr std::string_view kMagic = "MMSICKPT";
constexpr std::uint32_t kFormatVersion = 1;

template <typename U>
void put_le(std::string& out, U value) {
  using Raw = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
  const auto raw = std::bit_cast<Raw>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((raw >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  Reader(std::string_view data, std::string origin) : data_(data), origin_(std::move(origin)) {}

  template <typename U>
  U get() {
    using Raw = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
    need(sizeof(U));
    Raw raw = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      raw |= static_cast<Raw>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(U);
    return std::bit_cast<U>(raw);
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    const std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw DataError(fmt::format("checkpoint {} is truncated", origin_));
  }

  std::string_view data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::string out(kMagic);
  put_le<std::uint32_t>(out, kFormatVersion);
  nlohmann::json header = {{"config", checkpoint.config}, {"metadata", checkpoint.metadata}};
  const std::string header_text = header.dump();
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  auto params = checkpoint.params;
  const auto named = named_params(params);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const NamedParam<float>& p : named) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, 2);
    put_le<std::int64_t>(out, p.tensor->rows());
    put_le<std::int64_t>(out, p.tensor->cols());
    // Row-major payload, matching the feature cache layout.
    for (Eigen::Index r = 0; r < p.tensor->rows(); ++r) {
      for (Eigen::Index c = 0; c < p.tensor->cols(); ++c) put_le<float>(out, (*p.tensor)(r, c));
    }
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Reader in(data, path.string());
  if (in.bytes(kMagic.size()) != kMagic) {
    throw DataError(fmt::format("{} is not a checkpoint", path.string()));
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw DataError(fmt::format("checkpoint {} has format version {}, expected {}", path.string(),
                                version, kFormatVersion));
  }
  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(in.bytes(in.get<std::uint64_t>()));
    ck.config = header.at("config").get<FusionConfig>();
    ck.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("checkpoint {} has a malformed header: {}", path.string(), e.what()));
  }
  ck.params = zero_params<float>(ck.config);
  const auto named = named_params(ck.params);
  const auto count = in.get<std::uint32_t>();
  if (count != named.size()) {
    throw DataError(fmt::format("checkpoint {} stores {} tensors, its config implies {}", path.string(),
                                count, named.size()));
  }
  for (const NamedParam<float>& p : named) {
    const std::string name(in.bytes(in.get<std::uint32_t>()));
    const auto rank = in.get<std::uint32_t>();
    if (name != p.name || rank != 2) {
      throw DataError(fmt::format("checkpoint {}: expected tensor {} but found {}", path.string(), p.name,
                                  name));
    }
    const auto rows = in.get<std::int64_t>();
    const auto cols = in.get<std::int64_t>();
    if (rows != p.tensor->rows() || cols != p.tensor->cols()) {
      throw DataError(fmt::format("checkpoint {}: tensor {} is {}x{} but the config implies {}x{}",
                                  path.string(), name, rows, cols, p.tensor->rows(), p.tensor->cols()));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) (*p.tensor)(r, c) = in.get<float>();
    }
  }
  if (!in.done()) throw DataError(fmt::format("checkpoint {} has trailing bytes", path.string()));
  return ck;
}

}  // namespace mmsi::fusion
