#include <gtest/gtest.h>

#include "respwave/data/synth.hpp"
#include "respwave/eval/metrics.hpp"
#include "respwave/interpret/attribution.hpp"
#include "respwave/train/trainer.hpp"
#include "support.hpp"

using namespace respwave;
using namespace respwave::interpret;
using namespace testing_support;

namespace {

std::vector<double> ppg_window(std::uint64_t seed) {
  data::SynthConfig c;
  c.n_subjects = 1;
  c.duration_s = 9.6;
  c.seed = seed;
  return data::normalize_input(data::generate_synthetic(c).front().ppg);
}

}  // namespace

TEST(Argmax, HandBuiltMap) {
  FeatureMap m(2, 3);
  m(0, 1) = 1;
  m(1, 2) = 2;
  EXPECT_EQ(map_argmax(m), (MapArgmax{1, 2, 2.0}));
}

TEST(Argmax, TiesGoToLowestChannelThenPosition) {
  FeatureMap m(8, 76);
  for (double& v : m.values()) v = 0.7;
  EXPECT_EQ(map_argmax(m), (MapArgmax{0, 0, 0.7}));
  m(3, 10) = 0.9;
  m(3, 40) = 0.9;
  m(5, 2) = 0.9;
  EXPECT_EQ(map_argmax(m), (MapArgmax{3, 10, 0.9}));
}

TEST(Argmax, AgreesWithForwardLatent) {
  const auto m = model::build_model(model::ModelConfig{}, 4);
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto w = ppg_window(s);
    const auto a = latent_argmax(m, w);
    const auto latent = model::forward(m, FeatureMap::row(std::span<const double>(w))).latent;
    EXPECT_EQ(a.value, *std::max_element(latent.values().begin(), latent.values().end()));
    EXPECT_EQ(latent(a.channel, a.position), a.value);
  }
}

TEST(Argmax, ConstantLatentTieRule) {
  auto m = model::build_model(model::ModelConfig{}, 4);
  std::fill(m.layers[2].weights.begin(), m.layers[2].weights.end(), 0.0);
  std::fill(m.layers[2].bias.begin(), m.layers[2].bias.end(), 0.25);
  const auto a = latent_argmax(m, ppg_window(1));
  EXPECT_EQ(a.channel, 0u);
  EXPECT_EQ(a.position, 0u);
  EXPECT_DOUBLE_EQ(a.value, 1.0 / (1.0 + std::exp(-0.25)));
}

TEST(Trace, PassthroughModelSelectsChannel) {
  auto m = model::build_model(model::ModelConfig{}, 4);
  const std::size_t route = 4;
  auto& l1 = m.layers[0];
  auto& l2 = m.layers[1];
  auto& l3 = m.layers[2];
  l1.bias[route] = 1.0;
  std::fill(l2.weights.begin(), l2.weights.end(), 0.0);
  std::fill(l3.weights.begin(), l3.weights.end(), 0.0);
  for (std::size_t o = 0; o < 8; ++o)
    for (std::size_t k = 0; k < l2.kernel_size; ++k) l2.weight(o, route, k) = 0.01;
  l2.bias[route] = 1.0;
  for (std::size_t o = 0; o < 8; ++o)
    for (std::size_t k = 0; k < l3.kernel_size; ++k) l3.weight(o, route, k) = 0.01;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto w = ppg_window(s);
    EXPECT_EQ(trace_to_layer1(m, w, latent_argmax(m, w)), route);
    EXPECT_EQ(attribute_window(m, w, AttributionMode::ContributionChain).kernel, route);
  }
}

TEST(Trace, EqualContributionsPickFirstKernel) {
  auto m = model::build_model(model::ModelConfig{}, 4);
  std::fill(m.layers[1].weights.begin(), m.layers[1].weights.end(), 0.0);
  std::fill(m.layers[2].weights.begin(), m.layers[2].weights.end(), 0.0);
  const auto w = ppg_window(2);
  EXPECT_EQ(trace_to_layer1(m, w, latent_argmax(m, w)), 0u);
}

TEST(Trace, Layer1ModeUsesLayer1Argmax) {
  const auto m = model::build_model(model::ModelConfig{}, 4);
  const auto w = ppg_window(3);
  const auto a = attribute_window(m, w, AttributionMode::Layer1Argmax);
  const auto act1 = model::forward_trace(m, FeatureMap::row(std::span<const double>(w)), false, nullptr).post[0];
  EXPECT_EQ(a.kernel, map_argmax(act1).channel);
  EXPECT_EQ(parse_attribution_mode("layer1"), AttributionMode::Layer1Argmax);
  EXPECT_THROW(parse_attribution_mode("grad"), ParameterError);
}

TEST(Trace, AffineInputChangeGivesSameAttribution) {
  const auto m = model::build_model(model::ModelConfig{}, 4);
  data::SynthConfig c;
  c.n_subjects = 2;
  c.duration_s = 40;
  auto recs = data::generate_synthetic(c);
  auto scaled = recs;
  for (auto& r : scaled)
    for (double& v : r.ppg) v = 2.0 * v;
  const auto a = kernel_rr_distribution(m, recs), b = kernel_rr_distribution(m, scaled);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t j = 0; j < a.rows.size(); ++j) {
    EXPECT_EQ(a.rows[j].kernel, b.rows[j].kernel);
    EXPECT_EQ(a.rows[j].latent, b.rows[j].latent);
  }
}

// ---- distribution

TEST(Distribution, SizesSumToAttributableWindows) {
  const auto m = model::build_model(model::ModelConfig{}, 4);
  data::SynthConfig c;
  c.n_subjects = 2;
  c.duration_s = 30;
  auto recs = data::generate_synthetic(c);
  // drop the annotations of the second half of subject 2
  auto& rr = recs[1].rr_annotations;
  rr.erase(rr.begin() + 10, rr.end());
  const auto d = kernel_rr_distribution(m, recs);
  std::size_t total = 0;
  for (const auto& k : d.rr_by_kernel) total += k.size();
  EXPECT_EQ(total, d.rows.size());
  const std::size_t windows = 2 * data::test_segment_count(900);
  EXPECT_EQ(total + d.skipped_unannotated, windows);
  EXPECT_GT(d.skipped_unannotated, 0u);
  EXPECT_THROW(kernel_rr_distribution(m, {}), EvaluationError);
}

TEST(Distribution, TwoRateClustersSeparate) {
  std::vector<data::Recording> recs;
  for (const double rate : {8.0, 24.0}) {
    data::SynthConfig c;
    c.n_subjects = 4;
    c.duration_s = 96;
    c.resp_rate_bpm = {rate, rate};
    c.seed = static_cast<std::uint64_t>(rate);
    c.id_prefix = "r" + std::to_string(static_cast<int>(rate)) + "_";
    for (auto& r : data::generate_synthetic(c)) recs.push_back(std::move(r));
  }
  std::vector<data::SegmentPair> segs;
  for (const auto& r : recs) {
    const auto s = data::segment_training(r);
    segs.insert(segs.end(), s.pairs.begin(), s.pairs.end());
  }
  auto m = model::build_model(model::ModelConfig{}, 1);
  train::TrainConfig cfg;
  cfg.epochs = 100;
  train::train(m, segs, cfg);

  const auto d = kernel_rr_distribution(m, recs);
  // the kernel most often responsible inside each cluster
  std::map<double, std::vector<std::size_t>> votes;
  for (const auto& r : d.rows) {
    auto& v = votes[r.rr_bpm];
    v.resize(8);
    ++v[r.kernel];
  }
  ASSERT_EQ(votes.size(), 2u);
  const auto top = [](const std::vector<std::size_t>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  const std::size_t low = top(votes[8.0]), high = top(votes[24.0]);
  EXPECT_NE(low, high);
  const double sep = eval::median(d.rr_by_kernel[high]) - eval::median(d.rr_by_kernel[low]);
  EXPECT_GE(sep, 8.0);
}

// ---- smoothing

TEST(Smoothing, ConstantUnchanged) {
  const std::vector<double> x(150, 0.42);
  for (double v : smooth_kernel(x)) EXPECT_NEAR(v, 0.42, 1e-15);
}

TEST(Smoothing, ImpulseBecomesBox) {
  std::vector<double> x(150, 0.0);
  x[75] = 1.0;
  const auto y = smooth_kernel(x);
  ASSERT_EQ(y.size(), 150u);
  std::size_t nonzero = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t] != 0.0) {
      ++nonzero;
      EXPECT_NEAR(y[t], 1.0 / 30.0, 1e-15);
    }
  }
  EXPECT_EQ(nonzero, 30u);
  EXPECT_NE(y[61], 0.0);
  EXPECT_NE(y[90], 0.0);
}

TEST(Smoothing, AlternatingCancels) {
  std::vector<double> x(150);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = t % 2 ? -1.0 : 1.0;
  for (double v : smooth_kernel(x)) EXPECT_LT(std::abs(v), 0.07);
}

TEST(Smoothing, MeanPreserved) {
  Rng rng(3);
  // support away from the edges: every sample lands in exactly 30 full windows
  std::vector<double> x(150, 0.0);
  for (std::size_t t = 29; t <= 120; ++t) x[t] = rng.normal();
  const auto y = smooth_kernel(x);
  EXPECT_NEAR(eval::mean(y), eval::mean(x), 1e-12);
  // with content at the edges the truncated windows bias the mean a little
  std::vector<double> z(150);
  for (double& v : z) v = 1.0 + 0.2 * rng.normal();
  EXPECT_LT(std::abs(eval::mean(smooth_kernel(z)) - eval::mean(z)), 0.02 * eval::mean(z));
  EXPECT_THROW(smooth_kernel(z, 0), ParameterError);
}
