#include <cmath>
#include <cstdlib>
#include <sstream>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/media.hpp"
#include "subprocess.hpp"

namespace mmsi::media {
namespace fs = std::filesystem;

void LibavTranscoder::transcode(const fs::path& input, const fs::path& output, const VideoSpec& spec) {
  transcode_constant_rate(input, output, spec.width, spec.height, spec.frame_rate);
}

CommandTranscoder::CommandTranscoder(std::string command_template)
    : template_(std::move(command_template)) {}

CommandTranscoder CommandTranscoder::ffmpeg() {
  return CommandTranscoder(
      "ffmpeg -nostdin -hide_banner -loglevel error -y -i {input} "
      "-vf scale={width}:{height},fps={fps} -c:v mpeg4 -q:v 2 -c:a copy -f mp4 {output}");
}

void CommandTranscoder::transcode(const fs::path& input, const fs::path& output, const VideoSpec& spec) {
  const std::string cmd = detail::substitute(template_, {{"input", detail::shell_quote(input.string())},
                                                          {"output", detail::shell_quote(output.string())},
                                                          {"width", std::to_string(spec.width)},
                                                          {"height", std::to_string(spec.height)},
                                                          {"fps", std::to_string(spec.frame_rate)}});
  const detail::CommandResult r = detail::run_command(cmd);
  if (r.exit_code != 0) {
    throw DataError(fmt::format("transcoder failed on {} (exit {}): {}", input.string(), r.exit_code,
                                r.output));
  }
}

bool executable_on_path(const std::string& name) {
  const char* path = std::getenv("PATH");
  if (path == nullptr) return false;
  std::stringstream ss(path);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    std::error_code ec;
    const fs::path candidate = fs::path(dir) / name;
    if (fs::is_regular_file(candidate, ec) &&
        (fs::status(candidate, ec).permissions() & fs::perms::owner_exec) != fs::perms::none) {
      return true;
    }
  }
  return false;
}

std::unique_ptr<Transcoder> default_transcoder() {
  if (executable_on_path("ffmpeg")) return std::make_unique<CommandTranscoder>(CommandTranscoder::ffmpeg());
  return std::make_unique<LibavTranscoder>();
}

fs::path transcode_video(const fs::path& input, const fs::path& output, const VideoSpec& spec,
                         Transcoder& transcoder) {
  if (spec.container != "mp4") throw UsageError(fmt::format("unsupported container '{}'", spec.container));
  if (!fs::exists(input)) throw DataError(fmt::format("{}: no such file", input.string()));
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  const fs::path tmp = temp_path_for(output);
  try {
    transcoder.transcode(input, tmp, spec);
    const VideoInfo info = probe_video(tmp);
    if (info.width != spec.width || info.height != spec.height ||
        std::abs(info.frame_rate - spec.frame_rate) > 1e-3) {
      throw DataError(fmt::format("transcoded {} is {}x{} @ {:.3f} fps, expected {}x{} @ {}",
                                  input.string(), info.width, info.height, info.frame_rate,
                                  spec.width, spec.height, spec.frame_rate));
    }
    fs::rename(tmp, output);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  return output;
}

}  // namespace mmsi::media
