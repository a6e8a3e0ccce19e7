#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/extractors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/hashing.hpp"

namespace mmsi::extractors {
namespace fs = std::filesystem;
namespace {

constexpr std::array<std::string_view, 48> kVocabulary = {
    "the",      "a",        "and",      "of",        "to",       "in",      "said",     "people",
    "today",    "president", "video",   "city",      "police",   "report",  "state",    "news",
    "election", "vote",     "officials", "week",     "crowd",    "market",  "storm",    "fire",
    "school",   "health",   "new",      "year",      "local",    "according", "minister", "court",
    "water",    "night",    "team",     "game",      "border",   "senator", "statement", "protest",
    "airport",  "hospital", "rain",     "company",   "workers",  "music",   "concert",  "campaign"};

// Below this RMS level (in s16 units) the track is treated as silence.
constexpr double kSilenceRms = 16.0;

std::string ascii_lower(std::string text) {
  for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return text;
}

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

AdapterFactory& registry() {
  static AdapterFactory factory;
  return factory;
}

}  // namespace

StubTranscriber::StubTranscriber(std::string version) : version_(std::move(version)) {}

TranscriptRecord StubTranscriber::transcribe(std::string_view post_id,
                                             const media::PreparedAudio& audio) const {
  TranscriptRecord rec{std::string(post_id), ""};
  if (!audio.has_audio()) return rec;
  const fs::path& wav = *audio.wav;
  fs::path sidecar = wav;
  sidecar += ".transcript.txt";
  if (fs::exists(sidecar)) {
    rec.text = ascii_lower(read_file(sidecar));
    while (!rec.text.empty() && (rec.text.back() == '\n' || rec.text.back() == '\r')) {
      rec.text.pop_back();
    }
    return rec;
  }
  const std::vector<std::int16_t> samples = media::read_wav(wav);
  double energy = 0.0;
  for (std::int16_t s : samples) energy += static_cast<double>(s) * s;
  if (samples.empty() || std::sqrt(energy / static_cast<double>(samples.size())) < kSilenceRms) {
    return rec;
  }
  std::uint64_t h = fnv1a64(std::as_bytes(std::span(samples)), fnv1a64(version_));
  const std::size_t words = 6 + mix64(h) % 24;
  for (std::size_t i = 0; i < words; ++i) {
    h = mix64(h + i);
    if (i > 0) rec.text.push_back(' ');
    rec.text += kVocabulary[h % kVocabulary.size()];
  }
  return rec;
}

GazetteerNer::GazetteerNer(std::vector<std::string> names, std::string version)
    : names_(std::move(names)), version_(std::move(version)) {
  std::erase_if(names_, [](const std::string& n) { return n.empty(); });
  std::sort(names_.begin(), names_.end(), [](const std::string& a, const std::string& b) {
    return a.size() != b.size() ? a.size() > b.size() : a < b;
  });
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
}

GazetteerNer GazetteerNer::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read gazetteer {}", path.string()));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    line.erase(0, start);
    if (line.empty() || line.front() == '#') continue;
    names.push_back(line);
  }
  return GazetteerNer(std::move(names));
}

std::vector<std::string> GazetteerNer::extract_person_names(std::string_view text) const {
  std::vector<std::string> found;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool at_start = i == 0 || !word_char(static_cast<unsigned char>(text[i - 1]));
    std::size_t matched = 0;
    if (at_start) {
      for (const std::string& name : names_) {
        if (text.compare(i, name.size(), name) != 0) continue;
        const std::size_t end = i + name.size();
        if (end < text.size() && word_char(static_cast<unsigned char>(text[end]))) continue;
        matched = name.size();
        found.push_back(name);
        break;
      }
    }
    i += matched > 0 ? matched : 1;
  }
  return found;
}

LocalDirectoryImageSource::LocalDirectoryImageSource(fs::path root) : root_(std::move(root)) {}

std::vector<media::Image> LocalDirectoryImageSource::fetch_reference_images(std::string_view name,
                                                                            int k) const {
  if (name.empty()) throw UsageError("reference image lookup needs a non-empty name");
  if (!fs::is_directory(root_)) {
    throw DataError(fmt::format("reference image directory {} is unavailable", root_.string()));
  }
  const fs::path dir = root_ / slugify(name);
  std::vector<media::Image> images;
  if (slugify(name).empty() || !fs::is_directory(dir)) return images;
  static constexpr std::array<std::string_view, 6> kExtensions = {".png", ".jpg", ".jpeg",
                                                                   ".bmp", ".ppm", ".webp"};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = ascii_lower(entry.path().extension().string());
    if (std::find(kExtensions.begin(), kExtensions.end(), ext) == kExtensions.end()) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  if (files.size() > static_cast<std::size_t>(std::max(k, 0))) files.resize(std::max(k, 0));
  for (const fs::path& f : files) images.push_back(media::load_image(f));
  return images;
}

std::vector<media::Image> EmptyImageSource::fetch_reference_images(std::string_view name,
                                                                   int /*k*/) const {
  if (name.empty()) throw UsageError("reference image lookup needs a non-empty name");
  return {};
}

AdapterSet make_stub_adapters(const AdapterOptions& options) {
  AdapterSet set;
  set.text = std::make_unique<StubTextEncoder>(options.dims.text);
  set.video = std::make_unique<StubVideoEncoder>(options.dims.video);
  set.object = std::make_unique<StubObjectEncoder>(options.dims.object);
  set.face = std::make_unique<StubFaceEncoder>(options.dims.face);
  set.transcriber = std::make_unique<StubTranscriber>();
  set.ner = std::make_unique<GazetteerNer>(options.gazetteer);
  if (options.reference_root) {
    set.images = std::make_unique<LocalDirectoryImageSource>(*options.reference_root);
  } else {
    set.images = std::make_unique<EmptyImageSource>();
  }
  return set;
}

void register_real_adapters(AdapterFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry() = std::move(factory);
}

bool real_adapters_available() {
  std::lock_guard lock(registry_mutex());
  return static_cast<bool>(registry());
}

AdapterSet make_real_adapters(const AdapterOptions& options) {
  AdapterFactory factory;
  {
    std::lock_guard lock(registry_mutex());
    factory = registry();
  }
  if (!factory) {
    throw UsageError("no real-model adapter plugin is registered; use the stub adapters");
  }
  return factory(options);
}

}  // namespace mmsi::extractors
