#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowse/rng.hpp"

namespace flowse {

// Desk-scale complex-STFT front end: synthetic harmonic tones plus colored
// noise, windowed DFT analysis/synthesis, SI-SDR scoring, and PCM16 WAV I/O.
// The inverse transform is weighted overlap-add normalized by the summed
// squared window, which makes the round trip exact wherever the window
// coverage is nonzero.

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  void validate() const {
    if (!(sample_rate > 0.0))
      throw std::invalid_argument("Waveform: sample rate must be positive");
    for (double v : samples)
      if (!std::isfinite(v)) throw std::invalid_argument("Waveform: non-finite sample");
  }
};

struct ComplexSpectrogram {
  std::size_t n_frames = 0;
  std::size_t n_bins = 0;  // window / 2 + 1
  std::size_t window = 0;
  std::size_t hop = 0;
  std::size_t origin_samples = 0;
  double sample_rate = 16000.0;
  std::vector<std::complex<double>> data;  // frames x bins, row-major

  std::complex<double>& at(std::size_t frame, std::size_t bin) {
    return data[frame * n_bins + bin];
  }
  std::complex<double> at(std::size_t frame, std::size_t bin) const {
    return data[frame * n_bins + bin];
  }

  void validate() const {
    if (window == 0 || (window & (window - 1)) != 0)
      throw std::invalid_argument("ComplexSpectrogram: window must be a power of two");
    if (hop == 0 || hop > window)
      throw std::invalid_argument("ComplexSpectrogram: hop must satisfy 0 < hop <= window");
    if (n_bins != window / 2 + 1)
      throw std::invalid_argument("ComplexSpectrogram: bins must equal window/2 + 1");
    if (data.size() != n_frames * n_bins)
      throw std::invalid_argument("ComplexSpectrogram: data size mismatch");
  }
};

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 Cooley-Tukey transform, in place.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  constexpr double pi = 3.141592653589793238463;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * pi / static_cast<double>(len);
    const std::complex<double> wlen = std::polar(1.0, ang);
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= scale;
  }
}

/// Periodic Hann window, w[i] = 0.5 (1 - cos(2 pi i / n)).
inline std::vector<double> hann_periodic(std::size_t n) {
  std::vector<double> w(n);
  constexpr double two_pi = 6.283185307179586476925;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

}  // namespace detail

inline ComplexSpectrogram stft(const Waveform& wav, std::size_t window = 512,
                               std::size_t hop = 128) {
  wav.validate();
  if (!detail::is_power_of_two(window))
    throw std::invalid_argument("stft: window must be a power of two");
  if (hop == 0 || hop >= window)
    throw std::invalid_argument(
        "stft: hop must satisfy 0 < hop < window (Hann overlap-add constraint)");
  const std::size_t n = wav.samples.size();
  if (n == 0) throw std::invalid_argument("stft: empty waveform");

  const std::vector<double> win = detail::hann_periodic(window);
  // Frames slide over the signal padded by one full window on each side, so
  // the first and last samples get full window coverage.
  const std::size_t n_frames = (window + n - 1) / hop + 1;
  std::vector<double> padded((n_frames - 1) * hop + window, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[window + i] = wav.samples[i];

  ComplexSpectrogram spec;
  spec.window = window;
  spec.hop = hop;
  spec.n_bins = window / 2 + 1;
  spec.n_frames = n_frames;
  spec.origin_samples = n;
  spec.sample_rate = wav.sample_rate;
  spec.data.resize(n_frames * spec.n_bins);

  std::vector<std::complex<double>> buf(window);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < window; ++i)
      buf[i] = std::complex<double>(padded[start + i] * win[i], 0.0);
    detail::fft_inplace(buf, false);
    for (std::size_t b = 0; b < spec.n_bins; ++b) spec.at(f, b) = buf[b];
  }
  return spec;
}

inline Waveform istft(const ComplexSpectrogram& spec) {
  spec.validate();
  if (spec.n_frames == 0) throw std::invalid_argument("istft: empty spectrogram");
  const std::size_t window = spec.window;
  const std::size_t hop = spec.hop;
  const std::size_t n = spec.origin_samples;
  const std::vector<double> win = detail::hann_periodic(window);

  const std::size_t span = (spec.n_frames - 1) * hop + window;
  if (span < window + n)
    throw std::invalid_argument("istft: frame count too small for the declared sample count");
  std::vector<double> acc(span, 0.0);
  std::vector<double> wsum(acc.size(), 0.0);
  std::vector<std::complex<double>> buf(window);
  for (std::size_t f = 0; f < spec.n_frames; ++f) {
    for (std::size_t b = 0; b < spec.n_bins; ++b) buf[b] = spec.at(f, b);
    for (std::size_t b = spec.n_bins; b < window; ++b)
      buf[b] = std::conj(spec.at(f, window - b));
    detail::fft_inplace(buf, true);
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < window; ++i) {
      acc[start + i] += win[i] * buf[i].real();
      wsum[start + i] += win[i] * win[i];
    }
  }

  Waveform out;
  out.sample_rate = spec.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w2 = wsum[window + i];
    if (!(w2 > 1e-8))
      throw std::invalid_argument(
          "istft: window/hop pair leaves uncovered samples (overlap-add constraint violated)");
    out.samples[i] = acc[window + i] / w2;
  }
  return out;
}

/// Scale-invariant signal-to-distortion ratio in dB, clipped to [-60, 60].
inline double si_sdr(const Waveform& estimate, const Waveform& reference) {
  if (estimate.samples.size() != reference.samples.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  const std::size_t n = reference.samples.size();
  if (n == 0) throw std::invalid_argument("si_sdr: empty signals");
  double dot = 0.0, ref_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += estimate.samples[i] * reference.samples[i];
    ref_energy += reference.samples[i] * reference.samples[i];
  }
  if (ref_energy == 0.0) throw std::invalid_argument("si_sdr: zero reference");
  const double alpha = dot / ref_energy;
  double target_energy = 0.0, residual_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = alpha * reference.samples[i];
    const double e = estimate.samples[i] - t;
    target_energy += t * t;
    residual_energy += e * e;
  }
  // An estimate with no reference component scores the floor even when it is
  // all zero, so the checks must run in this order.
  if (target_energy == 0.0) return -60.0;
  if (residual_energy == 0.0) return 60.0;
  const double db = 10.0 * std::log10(target_energy / residual_energy);
  if (db > 60.0) return 60.0;
  if (db < -60.0) return -60.0;
  return db;
}

enum class NoiseColor { White, Pink };

inline const char* noise_color_name(NoiseColor c) {
  return c == NoiseColor::White ? "white" : "pink";
}

inline NoiseColor noise_color_from_name(const std::string& s) {
  if (s == "white") return NoiseColor::White;
  if (s == "pink") return NoiseColor::Pink;
  throw std::invalid_argument("unknown noise color: " + s);
}

struct SynthConfig {
  double duration_s = 1.0;
  double sample_rate = 16000.0;
  double f0_min_hz = 100.0;
  double f0_max_hz = 300.0;
  int n_harmonics = 8;
  NoiseColor noise_color = NoiseColor::White;
  double snr_db_min = 5.0;
  double snr_db_max = 15.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(duration_s > 0.0)) throw std::invalid_argument("SynthConfig: duration must be positive");
    if (!(sample_rate > 0.0))
      throw std::invalid_argument("SynthConfig: sample rate must be positive");
    if (!(f0_min_hz > 0.0) || !(f0_max_hz >= f0_min_hz))
      throw std::invalid_argument("SynthConfig: fundamental range must be ordered and positive");
    if (n_harmonics < 1) throw std::invalid_argument("SynthConfig: need at least one harmonic");
    if (!(snr_db_max >= snr_db_min))
      throw std::invalid_argument("SynthConfig: SNR range must be ordered");
  }
};

namespace detail {

/// Paul Kellet's three-pole pink noise approximation driven by white normals.
inline std::vector<double> colored_noise(std::size_t n, NoiseColor color, Rng& rng) {
  std::vector<double> out(n);
  if (color == NoiseColor::White) {
    for (double& v : out) v = rng.normal();
    return out;
  }
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    out[i] = b0 + b1 + b2 + w * 0.1848;
  }
  return out;
}

}  // namespace detail

/// Harmonic tone with randomized fundamental, geometric per-harmonic decay,
/// random phases, and a half-sine amplitude envelope; the noisy twin adds
/// colored noise scaled so the realized SNR equals the drawn target exactly.
inline std::pair<Waveform, Waveform> synth_pair(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(cfg.duration_s * cfg.sample_rate);
  if (n == 0) throw std::invalid_argument("synth_pair: duration too short for one sample");

  const double f0 = rng.uniform(cfg.f0_min_hz, cfg.f0_max_hz);
  const double decay = rng.uniform(0.5, 0.9);
  constexpr double two_pi = 6.283185307179586476925;
  std::vector<double> phase(static_cast<std::size_t>(cfg.n_harmonics));
  for (double& p : phase) p = rng.uniform(0.0, two_pi);

  Waveform clean;
  clean.sample_rate = cfg.sample_rate;
  clean.samples.assign(n, 0.0);
  constexpr double pi = 3.141592653589793238463;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / cfg.sample_rate;
    const double env = std::sin(pi * static_cast<double>(i) / static_cast<double>(n));
    double v = 0.0;
    double amp = 1.0;
    for (int h = 1; h <= cfg.n_harmonics; ++h) {
      const double f = f0 * h;
      if (2.0 * f < cfg.sample_rate)
        v += amp * std::sin(two_pi * f * t + phase[static_cast<std::size_t>(h - 1)]);
      amp *= decay;
    }
    clean.samples[i] = env * v;
  }
  double clean_energy = 0.0;
  for (double v : clean.samples) clean_energy += v * v;
  const double rms = std::sqrt(clean_energy / static_cast<double>(n));
  if (rms > 0.0) {
    const double gain = 0.1 / rms;
    for (double& v : clean.samples) v *= gain;
    clean_energy *= gain * gain;
  }

  const double snr_db = rng.uniform(cfg.snr_db_min, cfg.snr_db_max);
  std::vector<double> noise = detail::colored_noise(n, cfg.noise_color, rng);
  double noise_energy = 0.0;
  for (double v : noise) noise_energy += v * v;
  const double target_noise_energy = clean_energy / std::pow(10.0, snr_db / 10.0);
  const double scale =
      noise_energy > 0.0 ? std::sqrt(target_noise_energy / noise_energy) : 0.0;

  Waveform noisy;
  noisy.sample_rate = cfg.sample_rate;
  noisy.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    noisy.samples[i] = clean.samples[i] + scale * noise[i];
  return {std::move(clean), std::move(noisy)};
}

// Bridging between the complex STFT domain and the real vectors the samplers
// and models operate on: interleaved (re, im) per bin, frame-major.

inline std::vector<double> flatten(const ComplexSpectrogram& spec) {
  spec.validate();
  std::vector<double> out(2 * spec.data.size());
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    out[2 * i] = spec.data[i].real();
    out[2 * i + 1] = spec.data[i].imag();
  }
  return out;
}

inline ComplexSpectrogram unflatten(const std::vector<double>& flat,
                                    const ComplexSpectrogram& like) {
  like.validate();
  if (flat.size() != 2 * like.data.size())
    throw std::invalid_argument("unflatten: flat size does not match spectrogram shape");
  ComplexSpectrogram out = like;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::complex<double>(flat[2 * i], flat[2 * i + 1]);
  return out;
}

// PCM16 mono little-endian RIFF/WAVE.

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

inline void write_wav(const std::string& path, const Waveform& wav) {
  wav.validate();
  const std::uint32_t n = static_cast<std::uint32_t>(wav.samples.size());
  const std::uint32_t rate = static_cast<std::uint32_t>(wav.sample_rate);
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  detail::put_u32(out, 36 + 2 * n);
  out += "WAVE";
  out += "fmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, 2 * n);
  for (double v : wav.samples) {
    long q = std::lround(v * 32768.0);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_wav: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write_wav: write failed on " + path);
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_wav: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto u32 = [&bytes](std::size_t off) -> std::uint32_t {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3])) << 24;
  };
  const auto u16 = [&bytes](std::size_t off) -> std::uint16_t {
    return static_cast<std::uint16_t>(
        static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[off])) |
        static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[off + 1])) << 8);
  };
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0)
    throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path);

  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const std::uint32_t chunk_size = u32(pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size())
      throw std::runtime_error("read_wav: truncated chunk in " + path);
    if (id == "fmt ") {
      if (chunk_size < 16) throw std::runtime_error("read_wav: malformed fmt chunk in " + path);
      format = u16(body);
      channels = u16(body + 2);
      rate = u32(body + 4);
      bits = u16(body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw std::runtime_error("read_wav: data chunk before fmt in " + path);
      if (format != 1)
        throw std::runtime_error("read_wav: unsupported encoding (PCM only) in " + path);
      if (channels != 1)
        throw std::runtime_error("read_wav: unsupported channel count " +
                                 std::to_string(channels) + " (mono only) in " + path);
      if (bits != 16)
        throw std::runtime_error("read_wav: unsupported bit depth " + std::to_string(bits) +
                                 " (16-bit only) in " + path);
      Waveform wav;
      wav.sample_rate = static_cast<double>(rate);
      const std::size_t n = chunk_size / 2;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t q = static_cast<std::int16_t>(u16(body + 2 * i));
        wav.samples[i] = static_cast<double>(q) / 32768.0;
      }
      return wav;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  throw std::runtime_error("read_wav: no data chunk found in " + path);
}

}  // namespace flowse
