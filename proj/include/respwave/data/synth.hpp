#pragma once

// Desk-scale PPG / capnography generator.
//
// The respiratory reference is a rectangular wave at the subject's rate (low
// for `duty` of each cycle, high otherwise) softened by a short centred moving
// average and scaled to [0, 1]. Writing m(t) = 2 r(t) - 1, the PPG carries the
// three respiratory modulations:
//
//   interval:  instantaneous heart rate hr * (1 + frequency_depth * m(t))
//   amplitude: pulse * (1 + amplitude_depth * m(t))
//   intensity: + intensity_depth * m(t)
//
// plus white noise.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "respwave/data/normalize.hpp"
#include "respwave/data/recording.hpp"
#include "respwave/errors.hpp"
#include "respwave/random.hpp"

namespace respwave::data {

struct Range {
  double lo;
  double hi;
};

struct SynthConfig {
  std::size_t n_subjects = 20;
  double duration_s = 480.0;
  Range heart_rate_bpm{65.0, 100.0};
  Range resp_rate_bpm{8.0, 30.0};
  Range duty_cycle{0.3, 0.6};
  double intensity_depth = 0.3;
  double amplitude_depth = 0.2;
  double frequency_depth = 0.05;
  double noise_std = 0.02;
  std::size_t edge_smoothing = 7;  // moving-average width (samples, odd)
  std::string id_prefix = "synth";
  std::uint64_t seed = 1;

  void validate() const {
    auto bad = [](const std::string& m) { return ParameterError("synthetic config: " + m); };
    if (n_subjects == 0) throw bad("n_subjects must be positive");
    if (!(duration_s >= 9.6)) throw bad("duration must cover at least one 9.6 s window");
    for (const auto& [name, r] : {std::pair{"heart_rate_bpm", heart_rate_bpm}, std::pair{"resp_rate_bpm", resp_rate_bpm},
                                  std::pair{"duty_cycle", duty_cycle}})
      if (!(r.lo > 0.0 && r.lo <= r.hi)) throw bad(std::string(name) + " range must satisfy 0 < lo <= hi");
    if (!(resp_rate_bpm.hi < heart_rate_bpm.lo / 2.0)) throw bad("respiratory rate must stay below half the heart rate");
    if (!(duty_cycle.hi < 1.0)) throw bad("duty cycle must be below 1");
    for (double d : {intensity_depth, amplitude_depth, frequency_depth})
      if (!(d >= 0.0 && d < 1.0)) throw bad("modulation depths must lie in [0, 1)");
    if (!(noise_std >= 0.0)) throw bad("noise_std must be non-negative");
    if (edge_smoothing % 2 == 0) throw bad("edge_smoothing must be odd");
  }
};

/// Per-subject draws, kept alongside the recording for tests and manifests.
struct SynthSubject {
  double resp_rate_bpm;
  double heart_rate_bpm;
  double duty_cycle;
};

namespace detail {

inline std::vector<double> centred_moving_average(const std::vector<double>& x, std::size_t width) {
  if (width <= 1) return x;
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> y(x.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, t - half);
    const std::ptrdiff_t b = std::min<std::ptrdiff_t>(n - 1, t + half);
    double s = 0.0;
    for (std::ptrdiff_t j = a; j <= b; ++j) s += x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(t)] = s / static_cast<double>(b - a + 1);
  }
  return y;
}

/// Systolic peak plus dicrotic wave over one beat, phase in [0, 1).
inline double pulse_shape(double phase) {
  auto bump = [](double x, double mu, double sd) { return std::exp(-0.5 * (x - mu) * (x - mu) / (sd * sd)); };
  return bump(phase, 0.22, 0.07) + 0.45 * bump(phase, 0.48, 0.09) + bump(phase, 1.22, 0.07);
}

}  // namespace detail

/// Rectangular respiratory reference: low for the first `duty` of every cycle.
inline std::vector<double> synth_resp_wave(std::size_t n, double fs, double rr_bpm, double duty, double phase0,
                                           std::size_t smoothing) {
  std::vector<double> r(n);
  const double f = rr_bpm / 60.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double cyc = f * static_cast<double>(j) / fs + phase0;
    r[j] = (cyc - std::floor(cyc)) < duty ? 0.0 : 1.0;
  }
  return detail::centred_moving_average(r, smoothing);
}

inline Recording synth_subject(const SynthConfig& cfg, std::size_t index, SynthSubject* draws = nullptr) {
  Rng rng(Rng::derive(cfg.seed, index));
  const double rr = rng.uniform(cfg.resp_rate_bpm.lo, cfg.resp_rate_bpm.hi);
  const double hr = rng.uniform(cfg.heart_rate_bpm.lo, cfg.heart_rate_bpm.hi);
  const double duty = rng.uniform(cfg.duty_cycle.lo, cfg.duty_cycle.hi);
  const double resp_phase = rng.uniform();
  double beat_phase = rng.uniform();
  if (draws) *draws = {rr, hr, duty};

  const double fs = kSampleRate;
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * fs));

  Recording rec;
  char id[64];
  std::snprintf(id, sizeof id, "%s%02zu", cfg.id_prefix.c_str(), index + 1);
  rec.subject_id = id;
  rec.sample_rate = fs;
  rec.resp_kind = RespKind::Capnography;

  auto resp = synth_resp_wave(n, fs, rr, duty, resp_phase, cfg.edge_smoothing);
  rec.resp_ref = normalize_target(resp);

  rec.ppg.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double m = 2.0 * rec.resp_ref[j] - 1.0;
    const double pulse = detail::pulse_shape(beat_phase);
    rec.ppg[j] = (1.0 + cfg.amplitude_depth * m) * pulse + cfg.intensity_depth * m + cfg.noise_std * rng.normal();
    beat_phase += hr * (1.0 + cfg.frequency_depth * m) / 60.0 / fs;
    beat_phase -= std::floor(beat_phase);
  }

  const auto seconds = static_cast<std::size_t>(std::floor(cfg.duration_s));
  rec.rr_annotations.reserve(seconds);
  for (std::size_t s = 0; s < seconds; ++s) rec.rr_annotations.push_back({static_cast<double>(s), rr});
  return rec;
}

inline std::vector<Recording> generate_synthetic(const SynthConfig& cfg, std::vector<SynthSubject>* draws = nullptr) {
  cfg.validate();
  std::vector<Recording> out;
  out.reserve(cfg.n_subjects);
  if (draws) draws->resize(cfg.n_subjects);
  for (std::size_t i = 0; i < cfg.n_subjects; ++i) out.push_back(synth_subject(cfg, i, draws ? &(*draws)[i] : nullptr));
  return out;
}

}  // namespace respwave::data
