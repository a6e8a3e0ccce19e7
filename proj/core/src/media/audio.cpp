#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/media.hpp"

namespace mmsi::media {
namespace {

constexpr double kButterworthQ = 0.70710678118654752;

}  // namespace

Biquad Biquad::highpass(double cutoff_hz, double sample_rate) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * kButterworthQ);
  const double a0 = 1.0 + alpha;
  Biquad q;
  q.b0_ = (1.0 + c) / 2.0 / a0;
  q.b1_ = -(1.0 + c) / a0;
  q.b2_ = (1.0 + c) / 2.0 / a0;
  q.a1_ = -2.0 * c / a0;
  q.a2_ = (1.0 - alpha) / a0;
  return q;
}

Biquad Biquad::lowpass(double cutoff_hz, double sample_rate) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * kButterworthQ);
  const double a0 = 1.0 + alpha;
  Biquad q;
  q.b0_ = (1.0 - c) / 2.0 / a0;
  q.b1_ = (1.0 - c) / a0;
  q.b2_ = (1.0 - c) / 2.0 / a0;
  q.a1_ = -2.0 * c / a0;
  q.a2_ = (1.0 - alpha) / a0;
  return q;
}

double Biquad::process(double x) {
  const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
  x2_ = x1_;
  x1_ = x;
  y2_ = y1_;
  y1_ = y;
  return y;
}

double Biquad::magnitude(double freq_hz, double sample_rate) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  return std::abs((b0_ + b1_ * z1 + b2_ * z2) / (1.0 + a1_ * z1 + a2_ * z2));
}

void band_limit(std::vector<std::int16_t>& samples, const AudioSpec& spec) {
  Biquad hp = Biquad::highpass(spec.highpass_hz, spec.sample_rate);
  Biquad lp = Biquad::lowpass(spec.lowpass_hz, spec.sample_rate);
  for (std::int16_t& s : samples) {
    const double y = lp.process(hp.process(static_cast<double>(s)));
    s = static_cast<std::int16_t>(std::clamp(std::lround(y), -32768L, 32767L));
  }
}

PreparedAudio prepare_audio(const std::filesystem::path& video, const std::filesystem::path& output,
                            const AudioSpec& spec) {
  if (spec.channels != 1) throw UsageError("only mono audio preparation is supported");
  auto samples = decode_audio_mono(video, spec.sample_rate);
  if (!samples) return {};
  band_limit(*samples, spec);
  write_wav(output, *samples, spec.sample_rate);
  return PreparedAudio{output};
}

}  // namespace mmsi::media
