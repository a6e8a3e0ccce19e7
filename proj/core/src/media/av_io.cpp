#include "mmsi/media_io.hpp"

extern "C" {
#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/channel_layout.h>
#include <libavutil/imgutils.h>
#include <libavutil/opt.h>
#include <libswresample/swresample.h>
#include <libswscale/swscale.h>
}

#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"

namespace mmsi::media {
namespace fs = std::filesystem;
namespace {

std::string av_err(int code) {
  char buf[AV_ERROR_MAX_STRING_SIZE] = {};
  av_strerror(code, buf, sizeof buf);
  return buf;
}

void quiet_libav() {
  static std::once_flag once;
  std::call_once(once, [] { av_log_set_level(AV_LOG_FATAL); });
}

struct InputDeleter {
  void operator()(AVFormatContext* c) const { avformat_close_input(&c); }
};
struct OutputDeleter {
  void operator()(AVFormatContext* c) const {
    if (c == nullptr) return;
    if (!(c->oformat->flags & AVFMT_NOFILE)) avio_closep(&c->pb);
    avformat_free_context(c);
  }
};
struct CodecDeleter {
  void operator()(AVCodecContext* c) const { avcodec_free_context(&c); }
};
struct FrameDeleter {
  void operator()(AVFrame* f) const { av_frame_free(&f); }
};
struct PacketDeleter {
  void operator()(AVPacket* p) const { av_packet_free(&p); }
};
struct SwsDeleter {
  void operator()(SwsContext* s) const { sws_freeContext(s); }
};
struct SwrDeleter {
  void operator()(SwrContext* s) const { swr_free(&s); }
};

using InputPtr = std::unique_ptr<AVFormatContext, InputDeleter>;
using OutputPtr = std::unique_ptr<AVFormatContext, OutputDeleter>;
using CodecPtr = std::unique_ptr<AVCodecContext, CodecDeleter>;
using FramePtr = std::unique_ptr<AVFrame, FrameDeleter>;
using PacketPtr = std::unique_ptr<AVPacket, PacketDeleter>;
using SwsPtr = std::unique_ptr<SwsContext, SwsDeleter>;
using SwrPtr = std::unique_ptr<SwrContext, SwrDeleter>;

FramePtr make_frame() {
  FramePtr f(av_frame_alloc());
  if (!f) throw std::bad_alloc();
  return f;
}

PacketPtr make_packet() {
  PacketPtr p(av_packet_alloc());
  if (!p) throw std::bad_alloc();
  return p;
}

InputPtr open_input(const fs::path& path) {
  quiet_libav();
  if (!fs::exists(path)) throw DataError(fmt::format("{}: no such file", path.string()));
  AVFormatContext* raw = nullptr;
  int rc = avformat_open_input(&raw, path.c_str(), nullptr, nullptr);
  if (rc < 0) throw DataError(fmt::format("{}: cannot open: {}", path.string(), av_err(rc)));
  InputPtr ctx(raw);
  rc = avformat_find_stream_info(ctx.get(), nullptr);
  if (rc < 0) throw DataError(fmt::format("{}: cannot read stream info: {}", path.string(), av_err(rc)));
  return ctx;
}

CodecPtr open_decoder(const AVStream* st, const fs::path& path) {
  const AVCodec* codec = avcodec_find_decoder(st->codecpar->codec_id);
  if (codec == nullptr) {
    throw DataError(fmt::format("{}: no decoder for codec {}", path.string(),
                                avcodec_get_name(st->codecpar->codec_id)));
  }
  CodecPtr ctx(avcodec_alloc_context3(codec));
  if (!ctx) throw std::bad_alloc();
  avcodec_parameters_to_context(ctx.get(), st->codecpar);
  ctx->thread_count = 1;
  ctx->pkt_timebase = st->time_base;
  const int rc = avcodec_open2(ctx.get(), codec, nullptr);
  if (rc < 0) throw DataError(fmt::format("{}: cannot open decoder: {}", path.string(), av_err(rc)));
  return ctx;
}

// Pulls decoded frames of one stream, reading packets on demand.
class StreamDecoder {
 public:
  StreamDecoder(AVFormatContext* fmt, int stream, AVCodecContext* dec, fs::path path)
      : fmt_(fmt), stream_(stream), dec_(dec), pkt_(make_packet()), path_(std::move(path)) {}

  bool next(AVFrame* frame) {
    for (;;) {
      int rc = avcodec_receive_frame(dec_, frame);
      if (rc == 0) return true;
      if (rc == AVERROR_EOF) return false;
      if (rc != AVERROR(EAGAIN)) {
        throw DataError(fmt::format("{}: decode error: {}", path_.string(), av_err(rc)));
      }
      if (flushed_) return false;
      rc = av_read_frame(fmt_, pkt_.get());
      if (rc == AVERROR_EOF) {
        avcodec_send_packet(dec_, nullptr);
        flushed_ = true;
        continue;
      }
      if (rc < 0) throw DataError(fmt::format("{}: read error: {}", path_.string(), av_err(rc)));
      if (pkt_->stream_index == stream_) {
        rc = avcodec_send_packet(dec_, pkt_.get());
        av_packet_unref(pkt_.get());
        if (rc < 0 && rc != AVERROR(EAGAIN)) {
          throw DataError(fmt::format("{}: corrupt packet: {}", path_.string(), av_err(rc)));
        }
      } else {
        av_packet_unref(pkt_.get());
      }
    }
  }

 private:
  AVFormatContext* fmt_;
  int stream_;
  AVCodecContext* dec_;
  PacketPtr pkt_;
  fs::path path_;
  bool flushed_ = false;
};

constexpr int kSwsFlags = SWS_BILINEAR | SWS_ACCURATE_RND | SWS_BITEXACT;

void frame_to_rgb(const AVFrame* frame, int width, int height, SwsPtr& sws, Image& out) {
  SwsContext* ctx = sws_getCachedContext(
      sws.release(), frame->width, frame->height, static_cast<AVPixelFormat>(frame->format), width,
      height, AV_PIX_FMT_RGB24, kSwsFlags, nullptr, nullptr, nullptr);
  sws.reset(ctx);
  if (!ctx) throw DataError("unsupported pixel format");
  out.width = width;
  out.height = height;
  out.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  std::uint8_t* dst[4] = {out.rgb.data(), nullptr, nullptr, nullptr};
  int dst_stride[4] = {width * 3, 0, 0, 0};
  sws_scale(ctx, frame->data, frame->linesize, 0, frame->height, dst, dst_stride);
}

double guess_rate(AVFormatContext* fmt, AVStream* st) {
  const AVRational r = av_guess_frame_rate(fmt, st, nullptr);
  return r.num > 0 && r.den > 0 ? av_q2d(r) : 0.0;
}

bool is_mp4_family(const AVOutputFormat* fmt) {
  const std::string_view name = fmt->name;
  return name.find("mp4") != std::string_view::npos || name.find("mov") != std::string_view::npos;
}

// Output side shared by VideoWriter and transcoding.
class Muxer {
 public:
  Muxer(const fs::path& path, int width, int height, int frame_rate,
        std::optional<AudioTrack> audio, const AVStream* copy_audio_from)
      : path_(path), width_(width), height_(height), audio_(std::move(audio)) {
    quiet_libav();
    if (width <= 0 || height <= 0 || width % 2 || height % 2 || frame_rate <= 0) {
      throw UsageError(fmt::format("invalid output geometry {}x{} @ {}", width, height, frame_rate));
    }
    AVFormatContext* raw = nullptr;
    int rc = avformat_alloc_output_context2(&raw, nullptr, nullptr, path.c_str());
    if (rc < 0 || raw == nullptr) {
      throw DataError(fmt::format("{}: cannot choose container: {}", path.string(), av_err(rc)));
    }
    oc_.reset(raw);
    oc_->flags |= AVFMT_FLAG_BITEXACT;

    const AVCodec* vcodec = avcodec_find_encoder(AV_CODEC_ID_MPEG4);
    if (vcodec == nullptr) throw DataError("mpeg4 encoder unavailable");
    venc_.reset(avcodec_alloc_context3(vcodec));
    venc_->width = width;
    venc_->height = height;
    venc_->time_base = AVRational{1, frame_rate};
    venc_->framerate = AVRational{frame_rate, 1};
    venc_->pix_fmt = AV_PIX_FMT_YUV420P;
    venc_->gop_size = 12;
    venc_->max_b_frames = 0;
    venc_->thread_count = 1;
    venc_->flags |= AV_CODEC_FLAG_QSCALE | AV_CODEC_FLAG_BITEXACT;
    venc_->global_quality = FF_QP2LAMBDA * 2;
    if (oc_->oformat->flags & AVFMT_GLOBALHEADER) venc_->flags |= AV_CODEC_FLAG_GLOBAL_HEADER;
    rc = avcodec_open2(venc_.get(), vcodec, nullptr);
    if (rc < 0) throw DataError(fmt::format("cannot open video encoder: {}", av_err(rc)));
    vst_ = avformat_new_stream(oc_.get(), nullptr);
    avcodec_parameters_from_context(vst_->codecpar, venc_.get());
    vst_->time_base = venc_->time_base;

    if (audio_) {
      open_audio_encoder();
    } else if (copy_audio_from != nullptr &&
               avformat_query_codec(oc_->oformat, copy_audio_from->codecpar->codec_id,
                                    FF_COMPLIANCE_NORMAL) == 1) {
      ast_ = avformat_new_stream(oc_.get(), nullptr);
      avcodec_parameters_copy(ast_->codecpar, copy_audio_from->codecpar);
      ast_->codecpar->codec_tag = 0;
      ast_->time_base = copy_audio_from->time_base;
      copying_audio_ = true;
    }

    if (!(oc_->oformat->flags & AVFMT_NOFILE)) {
      rc = avio_open(&oc_->pb, path.c_str(), AVIO_FLAG_WRITE);
      if (rc < 0) throw DataError(fmt::format("{}: cannot open for writing: {}", path.string(), av_err(rc)));
    }
    rc = avformat_write_header(oc_.get(), nullptr);
    if (rc < 0) throw DataError(fmt::format("{}: cannot write header: {}", path.string(), av_err(rc)));

    yuv_ = make_frame();
    yuv_->format = AV_PIX_FMT_YUV420P;
    yuv_->width = width;
    yuv_->height = height;
    if (av_frame_get_buffer(yuv_.get(), 0) < 0) throw std::bad_alloc();
  }

  ~Muxer() {
    if (!finished_) {
      try {
        finish();
      } catch (...) {
      }
    }
  }

  bool copying_audio() const { return copying_audio_; }

  void write_video(const Image& img) {
    if (img.width != width_ || img.height != height_ ||
        img.rgb.size() != static_cast<std::size_t>(width_) * height_ * 3) {
      throw UsageError(fmt::format("frame is {}x{}, writer expects {}x{}", img.width, img.height,
                                   width_, height_));
    }
    sws_.reset(sws_getCachedContext(sws_.release(), width_, height_, AV_PIX_FMT_RGB24, width_,
                                    height_, AV_PIX_FMT_YUV420P, kSwsFlags, nullptr, nullptr,
                                    nullptr));
    av_frame_make_writable(yuv_.get());
    const std::uint8_t* src[4] = {img.rgb.data(), nullptr, nullptr, nullptr};
    const int src_stride[4] = {width_ * 3, 0, 0, 0};
    sws_scale(sws_.get(), src, src_stride, 0, height_, yuv_->data, yuv_->linesize);
    yuv_->pts = next_pts_++;
    encode(venc_.get(), vst_, yuv_.get());
  }

  void write_copied_audio(AVPacket* pkt, AVRational src_tb) {
    if (!copying_audio_) return;
    av_packet_rescale_ts(pkt, src_tb, ast_->time_base);
    pkt->stream_index = ast_->index;
    pkt->pos = -1;
    const int rc = av_interleaved_write_frame(oc_.get(), pkt);
    if (rc < 0) throw DataError(fmt::format("{}: audio mux error: {}", path_.string(), av_err(rc)));
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    encode(venc_.get(), vst_, nullptr);
    if (aenc_) {
      write_synthetic_audio();
      encode(aenc_.get(), ast_, nullptr);
    }
    const int rc = av_write_trailer(oc_.get());
    if (rc < 0) throw DataError(fmt::format("{}: cannot finalize: {}", path_.string(), av_err(rc)));
  }

 private:
  void open_audio_encoder() {
    const bool aac = is_mp4_family(oc_->oformat);
    const AVCodec* codec = avcodec_find_encoder(aac ? AV_CODEC_ID_AAC : AV_CODEC_ID_PCM_S16LE);
    if (codec == nullptr) throw DataError("audio encoder unavailable");
    aenc_.reset(avcodec_alloc_context3(codec));
    aenc_->sample_rate = audio_->sample_rate;
    aenc_->channels = audio_->channels;
    aenc_->channel_layout = av_get_default_channel_layout(audio_->channels);
    aenc_->sample_fmt = aac ? AV_SAMPLE_FMT_FLTP : AV_SAMPLE_FMT_S16;
    aenc_->time_base = AVRational{1, audio_->sample_rate};
    aenc_->bit_rate = aac ? 128000 : 0;
    aenc_->thread_count = 1;
    aenc_->flags |= AV_CODEC_FLAG_BITEXACT;
    if (oc_->oformat->flags & AVFMT_GLOBALHEADER) aenc_->flags |= AV_CODEC_FLAG_GLOBAL_HEADER;
    const int rc = avcodec_open2(aenc_.get(), codec, nullptr);
    if (rc < 0) throw DataError(fmt::format("cannot open audio encoder: {}", av_err(rc)));
    ast_ = avformat_new_stream(oc_.get(), nullptr);
    avcodec_parameters_from_context(ast_->codecpar, aenc_.get());
    ast_->time_base = aenc_->time_base;
  }

  void write_synthetic_audio() {
    const int channels = audio_->channels;
    const auto total = static_cast<std::int64_t>(audio_->interleaved.size() / channels);
    const int chunk = aenc_->frame_size > 0 ? aenc_->frame_size : 1024;
    FramePtr frame = make_frame();
    for (std::int64_t start = 0; start < total; start += chunk) {
      const int n = static_cast<int>(std::min<std::int64_t>(chunk, total - start));
      frame->nb_samples = n;
      frame->format = aenc_->sample_fmt;
      frame->channel_layout = aenc_->channel_layout;
      frame->channels = channels;
      frame->sample_rate = aenc_->sample_rate;
      if (av_frame_get_buffer(frame.get(), 0) < 0) throw std::bad_alloc();
      const std::int16_t* src = audio_->interleaved.data() + start * channels;
      if (aenc_->sample_fmt == AV_SAMPLE_FMT_FLTP) {
        for (int c = 0; c < channels; ++c) {
          auto* dst = reinterpret_cast<float*>(frame->extended_data[c]);
          for (int i = 0; i < n; ++i) dst[i] = static_cast<float>(src[i * channels + c]) / 32768.0f;
        }
      } else {
        std::memcpy(frame->data[0], src, static_cast<std::size_t>(n) * channels * sizeof(std::int16_t));
      }
      frame->pts = start;
      encode(aenc_.get(), ast_, frame.get());
      av_frame_unref(frame.get());
    }
  }

  void encode(AVCodecContext* enc, AVStream* st, const AVFrame* frame) {
    int rc = avcodec_send_frame(enc, frame);
    if (rc < 0 && rc != AVERROR_EOF) throw DataError(fmt::format("encode error: {}", av_err(rc)));
    PacketPtr pkt = make_packet();
    for (;;) {
      rc = avcodec_receive_packet(enc, pkt.get());
      if (rc == AVERROR(EAGAIN) || rc == AVERROR_EOF) return;
      if (rc < 0) throw DataError(fmt::format("encode error: {}", av_err(rc)));
      // Video time base is one frame; without a duration the mp4 edit list drops the last frame.
      if (pkt->duration <= 0 && enc->codec_type == AVMEDIA_TYPE_VIDEO) pkt->duration = 1;
      av_packet_rescale_ts(pkt.get(), enc->time_base, st->time_base);
      pkt->stream_index = st->index;
      rc = av_interleaved_write_frame(oc_.get(), pkt.get());
      if (rc < 0) throw DataError(fmt::format("{}: mux error: {}", path_.string(), av_err(rc)));
    }
  }

  fs::path path_;
  int width_;
  int height_;
  std::optional<AudioTrack> audio_;
  OutputPtr oc_;
  CodecPtr venc_;
  CodecPtr aenc_;
  AVStream* vst_ = nullptr;
  AVStream* ast_ = nullptr;
  SwsPtr sws_;
  FramePtr yuv_;
  std::int64_t next_pts_ = 0;
  bool copying_audio_ = false;
  bool finished_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------

struct VideoReader::Impl {
  InputPtr input;
  CodecPtr decoder;
  std::unique_ptr<StreamDecoder> stream;
  FramePtr frame = make_frame();
  SwsPtr sws;
  std::optional<Size> scale_to;
  VideoInfo info;
  AVRational time_base{};
  std::int64_t origin = AV_NOPTS_VALUE;
  std::int64_t index = 0;
};

VideoReader::VideoReader(const fs::path& path, std::optional<Size> scale_to)
    : impl_(std::make_unique<Impl>()) {
  impl_->input = open_input(path);
  AVFormatContext* fmt = impl_->input.get();
  const int vidx = av_find_best_stream(fmt, AVMEDIA_TYPE_VIDEO, -1, -1, nullptr, 0);
  if (vidx < 0) throw DataError(fmt::format("{}: no video stream", path.string()));
  AVStream* st = fmt->streams[vidx];
  impl_->decoder = open_decoder(st, path);
  impl_->stream = std::make_unique<StreamDecoder>(fmt, vidx, impl_->decoder.get(), path);
  impl_->scale_to = scale_to;
  impl_->time_base = st->time_base;
  impl_->info.width = st->codecpar->width;
  impl_->info.height = st->codecpar->height;
  impl_->info.frame_rate = guess_rate(fmt, st);
  impl_->info.has_audio = av_find_best_stream(fmt, AVMEDIA_TYPE_AUDIO, -1, -1, nullptr, 0) >= 0;
}

VideoReader::~VideoReader() = default;
VideoReader::VideoReader(VideoReader&&) noexcept = default;
VideoReader& VideoReader::operator=(VideoReader&&) noexcept = default;

const VideoInfo& VideoReader::info() const { return impl_->info; }

bool VideoReader::read(Image& frame, double* pts_seconds) {
  AVFrame* f = impl_->frame.get();
  if (!impl_->stream->next(f)) return false;
  const int w = impl_->scale_to ? impl_->scale_to->width : f->width;
  const int h = impl_->scale_to ? impl_->scale_to->height : f->height;
  frame_to_rgb(f, w, h, impl_->sws, frame);
  if (pts_seconds != nullptr) {
    const std::int64_t ts = f->best_effort_timestamp;
    if (ts != AV_NOPTS_VALUE) {
      if (impl_->origin == AV_NOPTS_VALUE) impl_->origin = ts;
      *pts_seconds = static_cast<double>(ts - impl_->origin) * av_q2d(impl_->time_base);
    } else {
      const double rate = impl_->info.frame_rate > 0 ? impl_->info.frame_rate : 1.0;
      *pts_seconds = static_cast<double>(impl_->index) / rate;
    }
  }
  ++impl_->index;
  av_frame_unref(f);
  return true;
}

VideoInfo probe_video(const fs::path& path) { return VideoReader(path).info(); }

// ---------------------------------------------------------------------------

struct VideoWriter::Impl {
  std::unique_ptr<Muxer> muxer;
};

VideoWriter::VideoWriter(const fs::path& path, int width, int height, int frame_rate,
                         std::optional<AudioTrack> audio)
    : impl_(std::make_unique<Impl>()) {
  impl_->muxer = std::make_unique<Muxer>(path, width, height, frame_rate, std::move(audio), nullptr);
}

VideoWriter::~VideoWriter() = default;
VideoWriter::VideoWriter(VideoWriter&&) noexcept = default;
VideoWriter& VideoWriter::operator=(VideoWriter&&) noexcept = default;

void VideoWriter::write(const Image& frame) { impl_->muxer->write_video(frame); }
void VideoWriter::close() { impl_->muxer->finish(); }

// ---------------------------------------------------------------------------

TranscodeStats transcode_constant_rate(const fs::path& input, const fs::path& output, int width,
                                       int height, int frame_rate) {
  InputPtr ic = open_input(input);
  const int vidx = av_find_best_stream(ic.get(), AVMEDIA_TYPE_VIDEO, -1, -1, nullptr, 0);
  if (vidx < 0) throw DataError(fmt::format("{}: no video stream", input.string()));
  const int aidx = av_find_best_stream(ic.get(), AVMEDIA_TYPE_AUDIO, -1, -1, nullptr, 0);
  AVStream* vst = ic->streams[vidx];
  CodecPtr dec = open_decoder(vst, input);

  TranscodeStats stats;
  stats.source_had_audio = aidx >= 0;
  Muxer mux(output, width, height, frame_rate, std::nullopt, aidx >= 0 ? ic->streams[aidx] : nullptr);
  stats.audio_copied = mux.copying_audio();

  const double src_rate = guess_rate(ic.get(), vst);
  const double step = 1.0 / frame_rate;
  constexpr double kEps = 1e-6;

  SwsPtr sws;
  Image current;
  bool have_current = false;
  double current_end = 0.0;
  std::int64_t origin = AV_NOPTS_VALUE;
  std::int64_t decoded = 0;

  auto emit_until = [&](double t) {
    while (static_cast<double>(stats.frames_written) * step < t - kEps) {
      mux.write_video(current);
      ++stats.frames_written;
    }
  };

  FramePtr frame = make_frame();
  auto consume = [&](AVFrame* f) {
    double t;
    if (f->best_effort_timestamp != AV_NOPTS_VALUE) {
      if (origin == AV_NOPTS_VALUE) origin = f->best_effort_timestamp;
      t = static_cast<double>(f->best_effort_timestamp - origin) * av_q2d(vst->time_base);
    } else {
      t = static_cast<double>(decoded) / (src_rate > 0 ? src_rate : frame_rate);
    }
    ++decoded;
    if (have_current) emit_until(t);
    frame_to_rgb(f, width, height, sws, current);
    have_current = true;
    double dur = f->pkt_duration > 0 ? static_cast<double>(f->pkt_duration) * av_q2d(vst->time_base) : 0.0;
    if (dur <= 0) dur = src_rate > 0 ? 1.0 / src_rate : step;
    current_end = std::max(current_end, t + dur);
    av_frame_unref(f);
  };

  auto drain = [&] {
    for (;;) {
      const int rc = avcodec_receive_frame(dec.get(), frame.get());
      if (rc == AVERROR(EAGAIN) || rc == AVERROR_EOF) return;
      if (rc < 0) throw DataError(fmt::format("{}: decode error: {}", input.string(), av_err(rc)));
      consume(frame.get());
    }
  };

  PacketPtr pkt = make_packet();
  for (;;) {
    int rc = av_read_frame(ic.get(), pkt.get());
    if (rc == AVERROR_EOF) break;
    if (rc < 0) throw DataError(fmt::format("{}: read error: {}", input.string(), av_err(rc)));
    if (pkt->stream_index == vidx) {
      rc = avcodec_send_packet(dec.get(), pkt.get());
      av_packet_unref(pkt.get());
      if (rc < 0) throw DataError(fmt::format("{}: corrupt video packet: {}", input.string(), av_err(rc)));
      drain();
    } else if (pkt->stream_index == aidx && stats.audio_copied) {
      mux.write_copied_audio(pkt.get(), ic->streams[aidx]->time_base);
      av_packet_unref(pkt.get());
    } else {
      av_packet_unref(pkt.get());
    }
  }
  avcodec_send_packet(dec.get(), nullptr);
  drain();

  if (!have_current) throw DataError(fmt::format("{}: no decodable video frames", input.string()));
  emit_until(current_end);
  if (stats.frames_written == 0) {
    throw DataError(fmt::format("{}: zero-duration video", input.string()));
  }
  mux.finish();
  return stats;
}

// ---------------------------------------------------------------------------

std::optional<std::vector<std::int16_t>> decode_audio_mono(const fs::path& path, int sample_rate) {
  InputPtr ic = open_input(path);
  const int aidx = av_find_best_stream(ic.get(), AVMEDIA_TYPE_AUDIO, -1, -1, nullptr, 0);
  if (aidx < 0) return std::nullopt;
  CodecPtr dec = open_decoder(ic->streams[aidx], path);

  const std::int64_t in_layout = dec->channel_layout != 0
                                     ? static_cast<std::int64_t>(dec->channel_layout)
                                     : av_get_default_channel_layout(dec->channels);
  SwrPtr swr(swr_alloc_set_opts(nullptr, AV_CH_LAYOUT_MONO, AV_SAMPLE_FMT_S16, sample_rate,
                                in_layout, dec->sample_fmt, dec->sample_rate, 0, nullptr));
  if (!swr || swr_init(swr.get()) < 0) {
    throw DataError(fmt::format("{}: cannot configure resampler", path.string()));
  }

  std::vector<std::int16_t> out;
  std::vector<std::int16_t> buf;
  auto convert = [&](const std::uint8_t** in, int in_count) {
    for (;;) {
      const int cap = std::max(swr_get_out_samples(swr.get(), in_count), 256);
      buf.resize(static_cast<std::size_t>(cap));
      std::uint8_t* dst = reinterpret_cast<std::uint8_t*>(buf.data());
      const int n = swr_convert(swr.get(), &dst, cap, in, in_count);
      if (n < 0) throw DataError(fmt::format("{}: resample error: {}", path.string(), av_err(n)));
      out.insert(out.end(), buf.begin(), buf.begin() + n);
      if (in != nullptr || n == 0) return;
    }
  };

  StreamDecoder stream(ic.get(), aidx, dec.get(), path);
  FramePtr frame = make_frame();
  while (stream.next(frame.get())) {
    convert(const_cast<const std::uint8_t**>(frame->extended_data), frame->nb_samples);
    av_frame_unref(frame.get());
  }
  convert(nullptr, 0);
  return out;
}

// ---------------------------------------------------------------------------

Image load_image(const fs::path& path) {
  VideoReader reader(path);
  Image img;
  if (!reader.read(img)) throw DataError(fmt::format("{}: no decodable image", path.string()));
  return img;
}

void save_png(const fs::path& path, const Image& image) {
  quiet_libav();
  const AVCodec* codec = avcodec_find_encoder(AV_CODEC_ID_PNG);
  if (codec == nullptr) throw DataError("png encoder unavailable");
  CodecPtr enc(avcodec_alloc_context3(codec));
  enc->width = image.width;
  enc->height = image.height;
  enc->pix_fmt = AV_PIX_FMT_RGB24;
  enc->time_base = AVRational{1, 1};
  enc->flags |= AV_CODEC_FLAG_BITEXACT;
  int rc = avcodec_open2(enc.get(), codec, nullptr);
  if (rc < 0) throw DataError(fmt::format("cannot open png encoder: {}", av_err(rc)));

  FramePtr frame = make_frame();
  frame->format = AV_PIX_FMT_RGB24;
  frame->width = image.width;
  frame->height = image.height;
  if (av_frame_get_buffer(frame.get(), 0) < 0) throw std::bad_alloc();
  for (int y = 0; y < image.height; ++y) {
    std::memcpy(frame->data[0] + static_cast<std::ptrdiff_t>(y) * frame->linesize[0],
                image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3,
                static_cast<std::size_t>(image.width) * 3);
  }
  frame->pts = 0;
  rc = avcodec_send_frame(enc.get(), frame.get());
  if (rc < 0) throw DataError(fmt::format("png encode error: {}", av_err(rc)));
  avcodec_send_frame(enc.get(), nullptr);
  PacketPtr pkt = make_packet();
  std::vector<std::byte> bytes;
  while (avcodec_receive_packet(enc.get(), pkt.get()) == 0) {
    auto* begin = reinterpret_cast<const std::byte*>(pkt->data);
    bytes.insert(bytes.end(), begin, begin + pkt->size);
    av_packet_unref(pkt.get());
  }
  write_file_atomic(path, bytes);
}

// ---------------------------------------------------------------------------

namespace {

void put_u32(std::vector<std::byte>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}
void put_u16(std::vector<std::byte>& b, std::uint16_t v) {
  b.push_back(static_cast<std::byte>(v & 0xff));
  b.push_back(static_cast<std::byte>(v >> 8));
}
void put_tag(std::vector<std::byte>& b, const char* tag) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::byte>(tag[i]));
}
std::uint32_t get_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}
std::uint16_t get_u16(const std::string& s, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) |
                                    (static_cast<unsigned char>(s[at + 1]) << 8));
}

}  // namespace

void write_wav(const fs::path& path, std::span<const std::int16_t> samples, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::byte> b;
  b.reserve(44 + data_bytes);
  put_tag(b, "RIFF");
  put_u32(b, 36 + data_bytes);
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, static_cast<std::uint32_t>(sample_rate));
  put_u32(b, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  put_tag(b, "data");
  put_u32(b, data_bytes);
  for (std::int16_t s : samples) put_u16(b, static_cast<std::uint16_t>(s));
  write_file_atomic(path, b);
}

std::vector<std::int16_t> read_wav(const fs::path& path, int* sample_rate) {
  const std::string s = read_file(path);
  if (s.size() < 44 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0) {
    throw DataError(fmt::format("{}: not a RIFF/WAVE file", path.string()));
  }
  std::size_t pos = 12;
  int rate = 0;
  int channels = 0;
  int bits = 0;
  while (pos + 8 <= s.size()) {
    const std::string tag = s.substr(pos, 4);
    const std::uint32_t size = get_u32(s, pos + 4);
    const std::size_t body = pos + 8;
    if (tag == "fmt ") {
      if (get_u16(s, body) != 1) throw DataError(fmt::format("{}: not PCM", path.string()));
      channels = get_u16(s, body + 2);
      rate = static_cast<int>(get_u32(s, body + 4));
      bits = get_u16(s, body + 14);
    } else if (tag == "data") {
      if (channels != 1 || bits != 16) {
        throw DataError(fmt::format("{}: expected mono s16 (got {} ch, {} bit)", path.string(),
                                    channels, bits));
      }
      const std::size_t n = std::min<std::size_t>(size, s.size() - body) / 2;
      std::vector<std::int16_t> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::int16_t>(get_u16(s, body + 2 * i));
      if (sample_rate != nullptr) *sample_rate = rate;
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw DataError(fmt::format("{}: no data chunk", path.string()));
}

}  // namespace mmsi::media
