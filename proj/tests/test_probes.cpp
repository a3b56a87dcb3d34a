#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "probout/file_io.hpp"
#include "probout/probes.hpp"
#include "support.hpp"

using namespace probout;

namespace {

Tensor ramp_image(std::size_t c, std::size_t h, std::size_t w) {
  Tensor t({c, h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i % 97) / 97.0f + 0.01f;
  return t;
}

double rms_difference(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / a.size());
}

}  // namespace

TEST(Translate, ZeroShiftIsIdentity) {
  const Tensor img = ramp_image(3, 8, 8);
  EXPECT_EQ(translate_image(img, 0), img);
}

TEST(Translate, ShiftDownThenUpZeroesBoundaryRows) {
  const Tensor img = ramp_image(2, 8, 5);
  const Tensor back = translate_image(translate_image(img, 2), -2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 5; ++x) EXPECT_EQ(back(c, y, x), y >= 6 ? 0.0f : img(c, y, x));
}

TEST(Translate, InFramePixelsPreservedExactly) {
  const Tensor img = ramp_image(1, 10, 4);
  for (long dy = -9; dy <= 9; ++dy) {
    const Tensor moved = translate_image(img, dy);
    for (long y = 0; y < 10; ++y) {
      const long src = y - dy;
      for (std::size_t x = 0; x < 4; ++x) {
        const float expected = src >= 0 && src < 10 ? img(0, static_cast<std::size_t>(src), x) : 0.0f;
        EXPECT_EQ(moved(0, static_cast<std::size_t>(y), x), expected);
      }
    }
  }
}

TEST(Translate, ShiftBeyondHeightRejected) {
  const Tensor img = ramp_image(1, 6, 6);
  EXPECT_THROW(translate_image(img, 6), std::invalid_argument);
  EXPECT_THROW(translate_image(img, -6), std::invalid_argument);
}

TEST(Rotate, ZeroAndFullTurnAreIdentity) {
  const Tensor img = ramp_image(3, 9, 9);
  EXPECT_EQ(rotate_image(img, 0.0), img);
  EXPECT_EQ(rotate_image(img, 360.0), img);
}

TEST(Rotate, HalfTurnTwiceRestoresImage) {
  for (std::size_t size : {8u, 9u, 16u}) {
    const Tensor img = ramp_image(3, size, size);
    EXPECT_LT(rms_difference(rotate_image(rotate_image(img, 180.0), 180.0), img), 1e-3);
  }
}

TEST(Rotate, QuarterTurnMovesCorner) {
  Tensor img({1, 5, 5});
  img(0, 0, 4) = 1.0f;  // top right
  const Tensor r = rotate_image(img, 90.0);
  // Counter-clockwise: top right goes to top left.
  EXPECT_NEAR(r(0, 0, 0), 1.0f, 1e-6);
  EXPECT_NEAR(r(0, 0, 4), 0.0f, 1e-6);
}

TEST(Rotate, OddAngleKeepsMassBounded) {
  const Tensor img = ramp_image(1, 12, 12);
  const Tensor r = rotate_image(img, 37.0);
  for (float v : r.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.02f);
  }
}

TEST(FeatureDistance, KnownValues) {
  const Tensor64 a = Tensor64::vector({1, 0}), b = Tensor64::vector({0, 1});
  EXPECT_EQ(feature_distance(a, a), 0.0);
  EXPECT_NEAR(feature_distance(a, b), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(feature_distance(a, Tensor64::vector({-3, 0})), 2.0, 1e-12);
  EXPECT_EQ(feature_distance(Tensor64({2}), Tensor64({2})), 0.0);
  EXPECT_NEAR(feature_distance(a, Tensor64({2})), 1.0, 1e-12);
}

TEST(FeatureDistance, ShapeMismatch) {
  EXPECT_THROW(feature_distance(Tensor64({2}), Tensor64({3})), DimensionError);
}

TEST(FeatureDistance, SymmetricBoundedAndScaleInvariant) {
  RngStream rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(30);
    const auto a = random_tensor<double>({n}, rng), b = random_tensor<double>({n}, rng);
    const double d = feature_distance(a, b);
    EXPECT_EQ(d, feature_distance(b, a));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    EXPECT_NEAR(feature_distance(a, b), d, 0.0);
    Tensor64 scaled = a;
    const double s = 0.01 + 100.0 * rng.uniform();
    for (auto& v : scaled.data()) v *= s;
    EXPECT_NEAR(feature_distance(scaled, b), d, 1e-12);
    EXPECT_NEAR(feature_distance(a, a), 0.0, 1e-12);
  }
}

TEST(Sweeps, AxesMatchProbeRange) {
  const auto t = translation_sweep();
  ASSERT_EQ(t.magnitudes.size(), 31u);
  EXPECT_EQ(t.magnitudes.front(), -15.0);
  EXPECT_EQ(t.magnitudes.back(), 15.0);
  const auto r = rotation_sweep(10.0);
  ASSERT_EQ(r.magnitudes.size(), 37u);
  EXPECT_EQ(r.magnitudes.front(), 0.0);
  EXPECT_EQ(r.magnitudes.back(), 360.0);
}

namespace {

struct ProbeFixture {
  ModelConfig config = desk_config(4);
  Parameters<float> params;
  std::vector<Tensor> images;
  std::vector<std::size_t> ids;

  ProbeFixture() {
    RngStream rng(12);
    params = init_parameters<float>(config, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      images.push_back(random_tensor<float>(config.input_shape(), rng));
      ids.push_back(10 + i);
    }
  }
};

}  // namespace

TEST(InvarianceCurve, RowLayoutAndBounds) {
  const ProbeFixture f;
  const std::vector<TransformSweep> sweeps{translation_sweep(3), rotation_sweep(90.0)};
  const std::vector<std::size_t> layers{0, 1, 2, 3};
  const auto records = invariance_curve(f.config, f.params, f.images, f.ids, sweeps, layers);
  const std::size_t magnitudes = 7 + 5;
  EXPECT_EQ(records.size(), magnitudes * layers.size() * (f.images.size() + 1));

  std::map<std::string, int> mean_rows;
  for (const auto& r : records) {
    EXPECT_GE(r.distance, 0.0);
    EXPECT_LE(r.distance, 2.0);
    const bool identity = r.magnitude == 0.0 || (r.transform == TransformKind::Rotate && r.magnitude == 360.0);
    if (identity) {
      EXPECT_EQ(r.distance, 0.0) << transform_name(r.transform) << " " << r.magnitude << " " << r.layer;
    }
    if (!r.image_id) {
      ++mean_rows[r.layer];
    } else {
      EXPECT_GE(*r.image_id, 10u);
    }
  }
  EXPECT_EQ(mean_rows.size(), layers.size());
  for (const auto& [layer, n] : mean_rows) EXPECT_EQ(n, static_cast<int>(magnitudes)) << layer;
}

TEST(InvarianceCurve, MeanRowsAverageImageRows) {
  const ProbeFixture f;
  const auto records = invariance_curve(f.config, f.params, f.images, f.ids, {translation_sweep(2)}, {1});
  std::map<double, std::pair<double, int>> sums;
  std::map<double, double> means;
  for (const auto& r : records) {
    if (r.image_id) {
      sums[r.magnitude].first += r.distance;
      ++sums[r.magnitude].second;
    } else {
      means[r.magnitude] = r.distance;
    }
  }
  for (const auto& [m, s] : sums) EXPECT_NEAR(means.at(m), s.first / s.second, 1e-12);
}

TEST(InvarianceCurve, Deterministic) {
  const ProbeFixture f;
  const std::vector<TransformSweep> sweeps{rotation_sweep(45.0)};
  EXPECT_EQ(probe_csv(invariance_curve(f.config, f.params, f.images, f.ids, sweeps, {0, 3})),
            probe_csv(invariance_curve(f.config, f.params, f.images, f.ids, sweeps, {0, 3})));
}

TEST(InvarianceCurve, EmptyInputsRejected) {
  const ProbeFixture f;
  EXPECT_THROW(invariance_curve(f.config, f.params, {}, {}, {translation_sweep(1)}, {0}), std::invalid_argument);
  EXPECT_THROW(invariance_curve(f.config, f.params, f.images, f.ids, {}, {0}), std::invalid_argument);
  TransformSweep empty{TransformKind::Rotate, {}};
  EXPECT_THROW(invariance_curve(f.config, f.params, f.images, f.ids, {empty}, {0}), std::invalid_argument);
}

TEST(ProbeCsv, HeaderAndMeanMarker) {
  const std::vector<ProbeRecord> rows{{TransformKind::Translate, -2, "conv1", 4, 0.5},
                                      {TransformKind::Rotate, 90, "fc", std::nullopt, 0.25}};
  const std::string csv = probe_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "transform,magnitude,layer,image-id,distance");
  EXPECT_NE(csv.find("translate,-2,conv1,4,"), std::string::npos);
  EXPECT_NE(csv.find("rotate,90,fc,mean,"), std::string::npos);
}

TEST(Filters, PreliminaryFirstLayerGrid) {
  const ModelConfig c = preliminary_cifar_config();
  RngStream rng(1);
  const auto p = init_parameters<float>(c, rng);
  const auto grid = filter_grid(c, p, 0);
  EXPECT_EQ(grid.origins.size(), 96u);
  EXPECT_EQ(grid.image.channels, 3u);
  EXPECT_EQ(grid.tile_width, 8u);
  EXPECT_EQ(grid.tile_height, 8u);
  // Subspace pairs sit side by side.
  for (std::size_t u = 0; u < 48; ++u) {
    EXPECT_EQ(grid.origins[2 * u].first, grid.origins[2 * u + 1].first);
    EXPECT_EQ(grid.origins[2 * u].second + 9, grid.origins[2 * u + 1].second);
  }
  EXPECT_NE(grid.image.comment.find("per-filter-minmax"), std::string::npos);
}

TEST(Filters, ConstantFilterIsMidGray) {
  const ModelConfig c = preliminary_cifar_config();
  RngStream rng(2);
  auto p = init_parameters<float>(c, rng);
  const std::size_t volume = 3 * 8 * 8;
  for (std::size_t i = 0; i < volume; ++i) p.layers[0].weight[i] = 0.3f;
  const auto grid = filter_grid(c, p, 0);
  const auto [oy, ox] = grid.origins[0];
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(grid.image.at(oy + y, ox + x, ch), 128);
}

TEST(Filters, FileRoundTripMatchesNormalizedFilters) {
  const ModelConfig c = preliminary_cifar_config();
  RngStream rng(3);
  const auto p = init_parameters<float>(c, rng);
  const auto path = (test_dir("filters") / "layer0.ppm").string();
  export_filters(c, p, 0, path);
  const PnmImage img = read_pnm(path);
  const auto grid = filter_grid(c, p, 0);
  ASSERT_EQ(img.width, grid.image.width);
  ASSERT_EQ(img.height, grid.image.height);
  const std::size_t volume = 3 * 8 * 8;
  for (std::size_t f = 0; f < 96; ++f) {
    const float* w = p.layers[0].weight.data().data() + f * volume;
    const auto [lo, hi] = std::minmax_element(w, w + volume);
    const auto [oy, ox] = grid.origins[f];
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
          const double normalized = (w[(ch * 8 + y) * 8 + x] - *lo) / (*hi - *lo);
          EXPECT_LE(std::abs(img.at(oy + y, ox + x, ch) / 255.0 - normalized), 1.0 / 255.0);
        }
  }
}

TEST(Filters, GrayscaleForOtherChannelCounts) {
  const ModelConfig c = toy_config();
  RngStream rng(4);
  const auto grid = filter_grid(c, init_parameters<float>(c, rng), 0);
  EXPECT_EQ(grid.image.channels, 1u);
  EXPECT_EQ(grid.tile_height, 2u * 3u);
  EXPECT_EQ(grid.origins.size(), 6u);
}

TEST(Filters, Deterministic) {
  const ModelConfig c = desk_config(4);
  RngStream rng(5);
  const auto p = init_parameters<float>(c, rng);
  EXPECT_EQ(encode_pnm(filter_grid(c, p, 1).image), encode_pnm(filter_grid(c, p, 1).image));
}

TEST(Filters, NonConvLayerRejected) {
  const ModelConfig c = preliminary_cifar_config();
  RngStream rng(6);
  const auto p = init_parameters<float>(c, rng);
  EXPECT_THROW(filter_grid(c, p, 3), std::invalid_argument);
  EXPECT_THROW(filter_grid(c, p, 4), std::invalid_argument);
}

TEST(SamplingCheck, FairPairWithinBinomialBand) {
  RngStream rng(7);
  const std::vector<double> z{0, 0};
  const auto r = sampling_frequency_check(z, 1.0, 100000, rng);
  EXPECT_TRUE(r.passed);
  for (double f : r.observed) EXPECT_NEAR(f, 0.5, 0.0063);
}

TEST(SamplingCheck, MatchesBoltzmannOracle) {
  RngStream rng(8);
  const std::vector<double> z{1, 2};
  const auto r = sampling_frequency_check(z, 1.0, 100000, rng);
  const auto p = oracle::boltzmann(z, 1.0);
  EXPECT_NEAR(p[0], 0.269, 5e-4);
  EXPECT_NEAR(r.expected[0], p[0], 1e-12);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.observed[0], 0.269, 0.006);
  EXPECT_NEAR(r.observed[1], 0.731, 0.006);
}

TEST(SamplingCheck, SharpDistributionConcentrates) {
  RngStream rng(9);
  const std::vector<double> z{0, 1};
  const auto r = sampling_frequency_check(z, 100.0, 100000, rng);
  EXPECT_GE(r.observed[1], 0.9999);
  EXPECT_TRUE(r.passed);
}

TEST(SamplingCheck, DropoutModeHasHalfDropped) {
  RngStream rng(10);
  const std::vector<double> z{0.3, -1.0, 2.0};
  const auto r = sampling_frequency_check(z, 1.5, 100000, rng, ProboutMode::TrainSampleDropout);
  ASSERT_EQ(r.expected.size(), 4u);
  EXPECT_EQ(r.expected[0], 0.5);
  EXPECT_NEAR(r.observed[0], 0.5, 0.0063);
  EXPECT_TRUE(r.passed);
}

TEST(SamplingCheck, Errors) {
  RngStream rng(11);
  const std::vector<double> z{0, 1};
  EXPECT_THROW(sampling_frequency_check(z, 1.0, 999, rng), std::invalid_argument);
  EXPECT_THROW(sampling_frequency_check(z, 1.0, 1000, rng, ProboutMode::InferMax), ModeError);
}

TEST(SamplingCheck, CsvLayout) {
  RngStream rng(12);
  const std::vector<double> z{0, 1};
  const std::string csv = sampling_report_csv(sampling_frequency_check(z, 1.0, 1000, rng));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "outcome,expected,observed,deviation_sigma");
  EXPECT_NE(csv.find("# draws=1000"), std::string::npos);
}
