#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "respwave/data/recording.hpp"
#include "respwave/data/resample.hpp"
#include "respwave/data/segment.hpp"
#include "respwave/data/synth.hpp"
#include "respwave/eval/metrics.hpp"
#include "respwave/eval/respiratory_rate.hpp"
#include "support.hpp"

using namespace respwave;
using namespace respwave::data;
using namespace testing_support;

namespace {

Recording ramp_recording(std::size_t n, const std::string& id = "s01") {
  Recording r;
  r.subject_id = id;
  for (std::size_t j = 0; j < n; ++j) {
    r.ppg.push_back(std::sin(0.37 * static_cast<double>(j)) + 0.001 * static_cast<double>(j));
    r.resp_ref.push_back(std::cos(0.05 * static_cast<double>(j)));
  }
  return r;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string csv_for(std::size_t n, double fs, const std::function<std::pair<double, double>(std::size_t)>& f) {
  std::string s = "subject_id,fs,resp_kind\nsub," + detail::format_number(fs) + ",capnography\nppg,resp\n";
  for (std::size_t j = 0; j < n; ++j) {
    const auto [a, b] = f(j);
    s += detail::format_number(a) + "," + detail::format_number(b) + "\n";
  }
  return s;
}

/// Amplitude of the best-fit sinusoid at frequency f (least squares on sin/cos).
double tone_amplitude(std::span<const double> x, double fs, double f, std::size_t skip) {
  double ss = 0, cc = 0, sc = 0, xs = 0, xc = 0;
  for (std::size_t j = skip; j + skip < x.size(); ++j) {
    const double t = static_cast<double>(j) / fs;
    const double s = std::sin(2 * std::numbers::pi * f * t), c = std::cos(2 * std::numbers::pi * f * t);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    xs += x[j] * s;
    xc += x[j] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (xs * cc - xc * sc) / det, b = (xc * ss - xs * sc) / det;
  return std::hypot(a, b);
}

}  // namespace

// ---- ingestion

class Ingestion : public ::testing::Test {
 protected:
  void SetUp() override { dir = temp_dir("ingest"); }
  std::filesystem::path dir;
};

TEST_F(Ingestion, FullRecordingAt30Hz) {
  write_file(dir / "a.csv", csv_for(14'400, 30, [](std::size_t j) {
               return std::pair{std::sin(0.1 * static_cast<double>(j)), static_cast<double>(j % 90)};
             }));
  write_file(dir / "a.rr.csv", "t_sec,rr_bpm\n0,12\n1,12.5\n");
  const auto r = load_recording(dir / "a.csv");
  EXPECT_EQ(r.subject_id, "sub");
  EXPECT_EQ(r.length(), 14'400u);
  EXPECT_EQ(r.resp_ref.size(), 14'400u);
  EXPECT_DOUBLE_EQ(r.duration_s(), 480.0);
  ASSERT_EQ(r.rr_annotations.size(), 2u);
  EXPECT_EQ(r.rr_annotations[1], (RrAnnotation{1.0, 12.5}));
  EXPECT_DOUBLE_EQ(*r.mean_rr(0, 2), 12.25);
  EXPECT_FALSE(r.mean_rr(5, 6).has_value());
}

TEST_F(Ingestion, Resamples125HzInput) {
  write_file(dir / "b.csv", csv_for(125 * 60, 125, [](std::size_t j) {
               const double t = static_cast<double>(j) / 125.0;
               return std::pair{std::sin(2 * std::numbers::pi * t), std::cos(2 * std::numbers::pi * 0.2 * t)};
             }));
  const auto r = load_recording(dir / "b.csv");
  EXPECT_EQ(r.sample_rate, 30.0);
  EXPECT_NEAR(static_cast<double>(r.length()), 60.0 * 30.0, 1.0);
  EXPECT_EQ(r.ppg.size(), r.resp_ref.size());
}

TEST_F(Ingestion, NanRowNamed) {
  std::string s = csv_for(10, 30, [](std::size_t j) { return std::pair{double(j), double(j)}; });
  s += "nan,1\n";
  write_file(dir / "c.csv", s);
  try {
    load_recording(dir / "c.csv");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.line(), 14u);
    EXPECT_NE(std::string(e.what()).find("line 14"), std::string::npos) << e.what();
  }
}

TEST_F(Ingestion, MalformedInputs) {
  write_file(dir / "d.csv", "subject_id,fs,resp_kind\nx,0,capnography\nppg,resp\n1,2\n");
  EXPECT_THROW(load_recording(dir / "d.csv"), IngestionError);
  write_file(dir / "e.csv", "subject_id,fs,resp_kind\nx,30,capnography\nppg,co2\n1,2\n");
  EXPECT_THROW(load_recording(dir / "e.csv"), IngestionError);
  write_file(dir / "f.csv", "subject_id,fs,resp_kind\nx,30,capnography\nppg,resp\n1,abc\n");
  EXPECT_THROW(load_recording(dir / "f.csv"), IngestionError);
  write_file(dir / "g.csv", "subject_id,fs,resp_kind\nx,30,capnography\nppg,resp\n1\n");
  EXPECT_THROW(load_recording(dir / "g.csv"), IngestionError);
  write_file(dir / "h.csv", "subject_id,fs,resp_kind\nx,20,capnography\nppg,resp\n1,2\n3,4\n");
  EXPECT_THROW(load_recording(dir / "h.csv"), ParameterError);
}

TEST_F(Ingestion, WriteReadRoundTrip) {
  auto rec = ramp_recording(500, "rt");
  rec.resp_kind = RespKind::Impedance;
  rec.rr_annotations = {{0.0, 14.0}, {1.0, 14.5}};
  write_recording(rec, dir / "rt.csv");
  write_rr_annotations(rec.rr_annotations, rr_path_for(dir / "rt.csv"));
  const auto back = load_recording(dir / "rt.csv");
  EXPECT_EQ(back.ppg, rec.ppg);
  EXPECT_EQ(back.resp_ref, rec.resp_ref);
  EXPECT_EQ(back.resp_kind, RespKind::Impedance);
  EXPECT_EQ(back.rr_annotations, rec.rr_annotations);
  EXPECT_EQ(list_recordings(dir).size(), 1u);
}

// ---- resampling

TEST(Resample, IdentityAt30Hz) {
  const std::vector<double> x{1, 5, 2, 8, 3};
  EXPECT_EQ(resample_to_30hz(x, 30.0), x);
}

TEST(Resample, OneHertzToneKeepsAmplitude) {
  std::vector<double> x(125 * 20);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::sin(2 * std::numbers::pi * static_cast<double>(j) / 125.0);
  const auto y = resample_to_30hz(x, 125.0);
  EXPECT_NEAR(static_cast<double>(y.size()) / 30.0, static_cast<double>(x.size()) / 125.0, 1.0 / 30.0);
  const double amp = tone_amplitude(y, 30.0, 1.0, 90);
  EXPECT_LT(std::abs(amp - 1.0), 0.01);
  for (std::size_t j = 90; j + 90 < y.size(); ++j)
    ASSERT_NEAR(y[j], std::sin(2 * std::numbers::pi * static_cast<double>(j) / 30.0), 0.01);
}

TEST(Resample, FourteenHertzToneAttenuated) {
  std::vector<double> x(125 * 20);
  for (std::size_t j = 0; j < x.size(); ++j)
    x[j] = std::sin(2 * std::numbers::pi * 14.0 * static_cast<double>(j) / 125.0);
  const auto y = resample_to_30hz(x, 125.0);
  double rms = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 90; j + 90 < y.size(); ++j, ++n) rms += y[j] * y[j];
  rms = std::sqrt(rms / static_cast<double>(n));
  const double db = 20.0 * std::log10(rms / std::sqrt(0.5));
  EXPECT_LT(db, -20.0);
}

TEST(Resample, UpsampleRejected) { EXPECT_THROW(resample_to_30hz(std::vector<double>{1, 2}, 25.0), ParameterError); }

// ---- normalisation

TEST(Normalize, TargetMinMax) {
  EXPECT_EQ(normalize_target(std::vector<double>{2, 4, 6}), (std::vector<double>{0, 0.5, 1}));
  const std::vector<double> unit{0, 0.25, 1, 0.5};
  EXPECT_EQ(normalize_target(unit), unit);
  Rng rng(1);
  std::vector<double> x(100);
  for (double& v : x) v = 3 * rng.normal() + 7;
  const auto y = normalize_target(x);
  EXPECT_EQ(*std::min_element(y.begin(), y.end()), 0.0);
  EXPECT_EQ(*std::max_element(y.begin(), y.end()), 1.0);
  EXPECT_EQ(normalize_target(y), y);
  EXPECT_THROW(normalize_target(std::vector<double>(5, 3.0)), DegenerateSignalError);
}

TEST(Normalize, InputZScore) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(288);
    for (double& v : x) v = rng.normal() * 5 + 100;
    const auto y = normalize_input(x);
    double m = 0, s = 0;
    for (double v : y) m += v;
    m /= 288;
    for (double v : y) s += (v - m) * (v - m);
    EXPECT_LT(std::abs(m), 1e-12);
    EXPECT_LT(std::abs(std::sqrt(s / 288) - 1.0), 1e-12);
    std::vector<double> ax(x);
    for (double& v : ax) v = 2.5 * v - 40;
    const auto ay = normalize_input(ax);
    for (std::size_t j = 0; j < y.size(); ++j) ASSERT_NEAR(ay[j], y[j], 1e-12);
  }
  EXPECT_THROW(normalize_input(std::vector<double>(288, 1.0)), DegenerateSignalError);
  EXPECT_EQ(parse_input_normalization("minmax"), InputNormalization::MinMax);
  EXPECT_THROW(parse_input_normalization("robust"), ParameterError);
}

// ---- segmentation

TEST(Segment, FiftyTrainingSegments) {
  const auto rec = ramp_recording(14'400);
  const auto s = segment_training(rec);
  ASSERT_EQ(s.pairs.size(), 50u);
  EXPECT_TRUE(s.warnings.empty());
  for (std::size_t j = 0; j < 50; ++j) {
    EXPECT_EQ(s.pairs[j].start_index, j * 288);
    EXPECT_EQ(s.pairs[j].input.size(), 288u);
    EXPECT_EQ(s.pairs[j].target.size(), 288u);
    EXPECT_EQ(s.pairs[j].subject_id, "s01");
  }
  const auto first = normalize_input(std::span<const double>(rec.ppg.data(), 288));
  EXPECT_EQ(s.pairs[0].input, first);
  const auto target = normalize_target(rec.resp_ref);
  EXPECT_EQ(s.pairs[3].target, std::vector<double>(target.begin() + 864, target.begin() + 1152));
}

TEST(Segment, ShortRecordingWarns) {
  const auto s = segment_training(ramp_recording(288 * 10 + 100));
  EXPECT_EQ(s.pairs.size(), 10u);
  ASSERT_EQ(s.warnings.size(), 1u);
}

TEST(Segment, TestWindowCounts) {
  EXPECT_EQ(segment_test(ramp_recording(14'400)).pairs.size(), 471u);
  EXPECT_EQ(segment_test(ramp_recording(288)).pairs.size(), 1u);
  EXPECT_EQ(segment_test(ramp_recording(318)).pairs.size(), 2u);
  EXPECT_EQ(test_segment_count(317), 1u);
  EXPECT_THROW(segment_test(ramp_recording(287)), DatasetError);
  const auto s = segment_test(ramp_recording(1000));
  for (std::size_t j = 0; j < s.pairs.size(); ++j) EXPECT_EQ(s.pairs[j].start_index, 30 * j);
}

TEST(Segment, ConstantWindowSkipped) {
  auto rec = ramp_recording(288 * 3);
  std::fill(rec.ppg.begin() + 288, rec.ppg.begin() + 576, 1.0);
  const auto s = segment_training(rec);
  EXPECT_EQ(s.pairs.size(), 2u);
  EXPECT_EQ(s.skipped, 1u);
}

// ---- synthetic data

TEST(Synth, SpectralPeakAtConfiguredRate) {
  SynthConfig c;
  c.n_subjects = 1;
  c.resp_rate_bpm = {15, 15};
  c.duration_s = 120;
  const auto r = generate_synthetic(c).front();
  const double bin = 60.0 * 30.0 / 16384.0;
  EXPECT_NEAR(eval::estimate_rr_fft(r.resp_ref), 15.0, bin);
}

TEST(Synth, DutyCycleRecovered) {
  SynthConfig c;
  c.n_subjects = 4;
  c.duty_cycle = {0.4, 0.4};
  for (const auto& r : generate_synthetic(c)) EXPECT_NEAR(eval::duty_cycle(r.resp_ref) / 100.0, 0.40, 0.02);
  c.duty_cycle = {0.3, 0.6};
  c.n_subjects = 10;
  std::vector<SynthSubject> draws;
  const auto recs = generate_synthetic(c, &draws);
  for (std::size_t i = 0; i < recs.size(); ++i)
    EXPECT_NEAR(eval::duty_cycle(recs[i].resp_ref), 100.0 * draws[i].duty_cycle, 2.0);
}

TEST(Synth, DeterministicAndShaped) {
  SynthConfig c;
  c.n_subjects = 3;
  const auto a = generate_synthetic(c), b = generate_synthetic(c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].ppg, b[i].ppg);
    EXPECT_EQ(a[i].resp_ref, b[i].resp_ref);
    EXPECT_EQ(a[i].length(), 14'400u);
    EXPECT_EQ(a[i].rr_annotations.size(), 480u);
  }
  EXPECT_EQ(a[0].subject_id, "synth01");
  EXPECT_NE(a[0].ppg, a[1].ppg);
}

TEST(Synth, AnnotatedRateMatchesSpectrum) {
  SynthConfig c;
  c.n_subjects = 6;
  for (const auto& r : generate_synthetic(c)) {
    const double truth = r.rr_annotations.front().rr_bpm;
    for (std::size_t start = 0; start + 900 <= r.length(); start += 1500) {
      const std::span<const double> w(r.resp_ref.data() + start, 900);
      EXPECT_NEAR(eval::estimate_rr_fft(w), truth, 0.5) << r.subject_id << " @" << start;
    }
  }
}

TEST(Synth, InvalidConfigRejected) {
  SynthConfig c;
  c.resp_rate_bpm = {8, 40};  // 40 > 65 / 2
  EXPECT_THROW(c.validate(), ParameterError);
  c = SynthConfig{};
  c.amplitude_depth = 1.0;
  EXPECT_THROW(generate_synthetic(c), ParameterError);
  c = SynthConfig{};
  c.n_subjects = 0;
  EXPECT_THROW(generate_synthetic(c), ParameterError);
}
