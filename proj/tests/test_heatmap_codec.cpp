#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fpd/heatmap.hpp"
#include "fpd/rng.hpp"

using namespace fpd;

namespace {

// Direct evaluation of the Gaussian map definition, pixel by pixel. Kept
// deliberately independent of the encoder's windowed rasterization.
ConfidenceMapStack oracle_encode(const JointSet& joints, const ImageSpec& spec,
                                 const GaussianConfig& cfg) {
  auto out = ConfidenceMapStack::zeros(joints.size(), spec.heatmap_height,
                                       spec.heatmap_width);
  const double peak =
      cfg.normalized_peak ? 1.0 / (2.0 * M_PI * cfg.sigma * cfg.sigma) : 1.0;
  for (int k = 0; k < joints.size(); ++k) {
    if (!joints[k].labelled()) continue;
    const double cx = joints[k].x / spec.stride;
    const double cy = joints[k].y / spec.stride;
    for (int y = 0; y < spec.heatmap_height; ++y) {
      for (int x = 0; x < spec.heatmap_width; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        if (d2 > cfg.truncate_sigmas * cfg.sigma * cfg.truncate_sigmas * cfg.sigma) {
          continue;
        }
        out.at(k, y, x) = peak * std::exp(-d2 / (2.0 * cfg.sigma * cfg.sigma));
      }
    }
  }
  return out;
}

JointSet random_joints(int k, const ImageSpec& spec, Rng& rng) {
  JointSet joints(k);
  for (int i = 0; i < k; ++i) {
    joints.set(i, rng.uniform(0.0, spec.width - 1e-6),
               rng.uniform(0.0, spec.height - 1e-6));
  }
  return joints;
}

}  // namespace

TEST_CASE("normalized peak value at an on-grid joint") {
  const ImageSpec spec = ImageSpec::standard();
  GaussianConfig cfg;
  cfg.sigma = 1.0;
  cfg.normalized_peak = true;
  JointSet joints(1);
  joints.set(0, 40.0, 80.0);  // heatmap (10, 20) exactly
  const auto maps = encode_joints(joints, spec, cfg);
  CHECK(maps.at(0, 20, 10) == doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-12));

  // peak is at the nearest heatmap pixel
  const auto m = maps.map(0);
  const auto best = std::max_element(m.begin(), m.end());
  CHECK(best - m.begin() == 20 * spec.heatmap_width + 10);
}

TEST_CASE("unit-peak value two pixels from the center, sigma 2") {
  const ImageSpec spec = ImageSpec::standard();
  GaussianConfig cfg;
  cfg.sigma = 2.0;
  cfg.normalized_peak = false;
  JointSet joints(1);
  joints.set(0, 10.0 * spec.stride, 20.0 * spec.stride);
  const auto maps = encode_joints(joints, spec, cfg);
  CHECK(maps.at(0, 20, 12) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("unlabelled joints give all-zero maps") {
  const ImageSpec spec = ImageSpec::standard();
  JointSet joints(3);
  joints.set(0, 100.0, 100.0);
  joints.set_unlabelled(1);
  joints.set(2, 30.0, 50.0, Visibility::kOccluded);
  const auto maps = encode_joints(joints, spec, GaussianConfig{});
  for (double v : maps.map(1)) CHECK(v == 0.0);
  // occluded-but-labelled joints are encoded
  CHECK(*std::max_element(maps.map(2).begin(), maps.map(2).end()) > 0.0);
}

TEST_CASE("encode rejects out-of-bounds coordinates and bad sigma") {
  const ImageSpec spec = ImageSpec::standard();
  JointSet joints(1);
  joints.set(0, 256.0, 10.0);
  CHECK_THROWS_AS(encode_joints(joints, spec, GaussianConfig{}), DataError);
  joints.set(0, -0.5, 10.0);
  CHECK_THROWS_AS(encode_joints(joints, spec, GaussianConfig{}), DataError);

  joints.set(0, 10.0, 10.0);
  GaussianConfig bad;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(encode_joints(joints, spec, bad), ConfigError);
}

TEST_CASE("encode matches the direct per-pixel oracle") {
  const ImageSpec spec = ImageSpec::standard();
  Rng rng(11);
  for (double sigma : {0.5, 1.0, 2.0}) {
    for (bool normalized : {true, false}) {
      GaussianConfig cfg;
      cfg.sigma = sigma;
      cfg.normalized_peak = normalized;
      const auto joints = random_joints(4, spec, rng);
      const auto got = encode_joints(joints, spec, cfg);
      const auto want = oracle_encode(joints, spec, cfg);
      for (size_t i = 0; i < got.values.size(); ++i) {
        CHECK(got.values[i] == doctest::Approx(want.values[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("transpose equivariance of the Gaussian") {
  const ImageSpec spec = ImageSpec::standard();
  JointSet joints(1), swapped(1);
  joints.set(0, 37.3, 101.9);
  swapped.set(0, 101.9, 37.3);
  const auto a = encode_joints(joints, spec, GaussianConfig{});
  const auto b = encode_joints(swapped, spec, GaussianConfig{});
  for (int y = 0; y < spec.heatmap_height; ++y) {
    for (int x = 0; x < spec.heatmap_width; ++x) {
      CHECK(a.at(0, y, x) == doctest::Approx(b.at(0, x, y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("map values decay monotonically in squared distance") {
  const ImageSpec spec = ImageSpec::standard();
  GaussianConfig cfg;
  cfg.sigma = 1.5;
  JointSet joints(1);
  joints.set(0, 130.0, 122.0);
  const auto maps = encode_joints(joints, spec, cfg);
  const double cx = joints[0].x / spec.stride;
  const double cy = joints[0].y / spec.stride;

  std::vector<std::pair<double, double>> by_dist;  // (d^2, value)
  for (int y = 0; y < spec.heatmap_height; ++y) {
    for (int x = 0; x < spec.heatmap_width; ++x) {
      by_dist.emplace_back((x - cx) * (x - cx) + (y - cy) * (y - cy),
                           maps.at(0, y, x));
    }
  }
  std::sort(by_dist.begin(), by_dist.end());
  for (size_t i = 1; i < by_dist.size(); ++i) {
    CHECK(by_dist[i].second <= by_dist[i - 1].second + 1e-15);
  }
}

TEST_CASE("single-pixel decode uses plain stride arithmetic") {
  const ImageSpec spec = ImageSpec::standard();
  auto maps = ConfidenceMapStack::zeros(1, spec.heatmap_height, spec.heatmap_width);
  maps.at(0, 7, 5) = 1.0;
  const auto joints = decode_heatmaps(maps, spec);
  CHECK(joints[0].x == doctest::Approx(20.0));
  CHECK(joints[0].y == doctest::Approx(28.0));
  CHECK(joints[0].vis == Visibility::kVisible);
}

TEST_CASE("decode-encode identity on lattice-aligned joints") {
  const ImageSpec spec = ImageSpec::standard();
  Rng rng(5);
  for (double sigma : {0.5, 1.0, 2.0, 3.0}) {
    GaussianConfig cfg;
    cfg.sigma = sigma;
    JointSet joints(6);
    for (int k = 0; k < 6; ++k) {
      joints.set(k, rng.uniform_int(2, spec.heatmap_width - 3) * spec.stride,
                 rng.uniform_int(2, spec.heatmap_height - 3) * spec.stride);
    }
    const auto decoded = decode_heatmaps(encode_joints(joints, spec, cfg), spec);
    for (int k = 0; k < 6; ++k) {
      CHECK(decoded[k].x == doctest::Approx(joints[k].x).epsilon(1e-12));
      CHECK(decoded[k].y == doctest::Approx(joints[k].y).epsilon(1e-12));
    }
  }
}

TEST_CASE("off-grid round trip stays within half a stride; refinement helps") {
  const ImageSpec spec = ImageSpec::standard();
  GaussianConfig cfg;
  Rng rng(17);
  double err_plain = 0.0, err_refined = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    JointSet joints(1);
    joints.set(0, rng.uniform(3.0 * spec.stride, spec.width - 3.0 * spec.stride),
               rng.uniform(3.0 * spec.stride, spec.height - 3.0 * spec.stride));
    const auto maps = encode_joints(joints, spec, cfg);

    DecodeOptions plain;
    plain.quarter_pixel_refine = false;
    const auto p = decode_heatmaps(maps, spec, plain)[0];
    const double ep = std::hypot(p.x - joints[0].x, p.y - joints[0].y);
    CHECK(ep <= 0.5 * spec.stride * std::sqrt(2.0) + 1e-9);
    CHECK(std::abs(p.x - joints[0].x) <= 0.5 * spec.stride + 1e-9);
    CHECK(std::abs(p.y - joints[0].y) <= 0.5 * spec.stride + 1e-9);
    err_plain += ep;

    const auto r = decode_heatmaps(maps, spec)[0];
    err_refined += std::hypot(r.x - joints[0].x, r.y - joints[0].y);
  }
  CHECK(err_refined / trials < err_plain / trials);
}

TEST_CASE("decode flags corrupted and empty maps") {
  const ImageSpec spec = ImageSpec::standard();
  auto maps = ConfidenceMapStack::zeros(2, spec.heatmap_height, spec.heatmap_width);
  maps.at(0, 3, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(decode_heatmaps(maps, spec), DataError);

  auto zeros = ConfidenceMapStack::zeros(1, spec.heatmap_height, spec.heatmap_width);
  const auto joints = decode_heatmaps(zeros, spec);
  CHECK_FALSE(joints[0].labelled());
}

TEST_CASE("l1_normalize: uniform map, unit sums, argmax preserved") {
  auto maps = ConfidenceMapStack::zeros(2, 8, 8);
  for (double& v : maps.map(0)) v = 0.37;
  Rng rng(3);
  for (double& v : maps.map(1)) v = rng.uniform(0.0, 2.0);
  maps.at(1, 5, 2) = 7.5;  // unique max

  const auto norm = l1_normalize(maps);
  for (double v : norm.map(0)) CHECK(v == doctest::Approx(1.0 / 64.0).epsilon(1e-12));
  for (int k = 0; k < 2; ++k) {
    double sum = 0.0;
    for (double v : norm.map(k)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  const auto m = norm.map(1);
  CHECK(std::max_element(m.begin(), m.end()) - m.begin() == 5 * 8 + 2);
}

TEST_CASE("l1_normalize rejects degenerate maps") {
  auto maps = ConfidenceMapStack::zeros(1, 4, 4);
  CHECK_THROWS_AS(l1_normalize(maps), DataError);
}

TEST_CASE("normalized-peak Gaussian already carries unit mass") {
  const ImageSpec spec = ImageSpec::standard();
  GaussianConfig cfg;  // sigma 1, normalized
  JointSet joints(1);
  joints.set(0, 128.0, 128.0);
  const auto maps = encode_joints(joints, spec, cfg);
  double mass = 0.0;
  for (double v : maps.map(0)) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(0.02));  // 3-sigma truncation

  const auto norm = l1_normalize(maps);
  for (size_t i = 0; i < maps.values.size(); ++i) {
    CHECK(norm.values[i] == doctest::Approx(maps.values[i]).epsilon(0.02));
  }
}
