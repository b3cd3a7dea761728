#include "fpd/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fpd/rng.hpp"

namespace fpd {

using nlohmann::json;

AnnotationFormat parse_annotation_format(const std::string& name) {
  if (name == "mpii_json") return AnnotationFormat::kMpiiJson;
  if (name == "lsp_mat_export") return AnnotationFormat::kLspMatExport;
  throw ConfigError("unknown annotation format: " + name);
}

namespace {

const char* format_name(AnnotationFormat f) {
  return f == AnnotationFormat::kMpiiJson ? "mpii_json" : "lsp_mat_export";
}

std::optional<double> derive_torso_diag(const JointSet& joints, JointLayout layout) {
  int sho = -1, hip = -1;
  if (layout == JointLayout::kMpii16) {
    sho = 12;
    hip = 3;
  } else if (layout == JointLayout::kLsp14) {
    sho = 8;
    hip = 3;
  } else {
    return std::nullopt;
  }
  if (!joints[sho].labelled() || !joints[hip].labelled()) return std::nullopt;
  return (joints[sho].pos() - joints[hip].pos()).norm();
}

AnnotationRecord parse_record(const json& j, AnnotationFormat format) {
  AnnotationRecord rec;
  rec.image_path = j.at("image").get<std::string>();

  const auto& joints = j.at("joints");
  if (!joints.is_array() || (joints.size() != 14 && joints.size() != 16)) {
    throw DataError("joints must be an array of 14 or 16 entries");
  }
  rec.joints = JointSet(static_cast<int>(joints.size()));
  for (size_t k = 0; k < joints.size(); ++k) {
    const auto& entry = joints[k];
    if (!entry.is_array() || entry.size() != 3) {
      throw DataError("joint " + std::to_string(k) + " must be [x, y, v]");
    }
    const double x = entry[0].get<double>();
    const double y = entry[1].get<double>();
    const int v = entry[2].get<int>();
    if (v < 0 || v > 2) {
      throw DataError("joint " + std::to_string(k) + " visibility out of range");
    }
    // Negative coordinates are the LSP missing-joint convention.
    if (x < 0.0 || y < 0.0 || v == 0) {
      rec.joints.set_unlabelled(static_cast<int>(k));
    } else {
      rec.joints.set(static_cast<int>(k), x, y, static_cast<Visibility>(v));
    }
  }
  rec.layout = layout_for(rec.joints.size());

  if (format == AnnotationFormat::kMpiiJson) {
    const auto& c = j.at("center");
    rec.center = {c.at(0).get<double>(), c.at(1).get<double>()};
    rec.scale = j.at("scale").get<double>();
    if (j.contains("head_size")) rec.head_size = j["head_size"].get<double>();
  } else {
    // LSP exports carry no person box; derive one from the labelled joints.
    double x0 = 1e30, y0 = 1e30, x1 = -1e30, y1 = -1e30;
    int labelled = 0;
    for (const auto& joint : rec.joints.joints) {
      if (!joint.labelled()) continue;
      ++labelled;
      x0 = std::min(x0, joint.x);
      y0 = std::min(y0, joint.y);
      x1 = std::max(x1, joint.x);
      y1 = std::max(y1, joint.y);
    }
    if (labelled < 2) throw DataError("too few labelled joints to derive a box");
    rec.center = {(x0 + x1) / 2.0, (y0 + y1) / 2.0};
    rec.scale = 1.25 * std::max(x1 - x0, y1 - y0) / 200.0;
  }
  if (rec.scale <= 0.0) throw DataError("scale must be positive");
  rec.torso_diag = derive_torso_diag(rec.joints, rec.layout);
  return rec;
}

}  // namespace

std::vector<AnnotationRecord> load_annotations(const std::string& path,
                                               AnnotationFormat format) {
  std::ifstream file(path);
  if (!file) throw IoError("load_annotations: cannot open " + path);

  json doc;
  try {
    doc = json::parse(file);
  } catch (const json::exception& e) {
    throw DataError("load_annotations: " + path + ": " + e.what());
  }

  if (doc.contains("format") &&
      doc["format"].get<std::string>() != format_name(format)) {
    throw DataError("load_annotations: " + path + " declares format '" +
                    doc["format"].get<std::string>() + "', expected '" +
                    format_name(format) + "'");
  }
  if (!doc.contains("records") || !doc["records"].is_array()) {
    throw DataError("load_annotations: " + path + ": missing records array");
  }

  std::vector<AnnotationRecord> out;
  const auto& records = doc["records"];
  for (size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(parse_record(records[i], format));
    } catch (const json::exception& e) {
      throw DataError("load_annotations: " + path + ": record " +
                      std::to_string(i) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("load_annotations: " + path + ": record " +
                      std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::pair<std::vector<AnnotationRecord>, std::vector<AnnotationRecord>>
make_validation_split(const std::vector<AnnotationRecord>& records, int count,
                      uint64_t seed) {
  if (count < 0 || count > static_cast<int>(records.size())) {
    throw ContractError("make_validation_split: count out of range");
  }
  std::vector<size_t> idx(records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  std::vector<uint8_t> held(records.size(), 0);
  for (int i = 0; i < count; ++i) held[idx[i]] = 1;

  std::pair<std::vector<AnnotationRecord>, std::vector<AnnotationRecord>> out;
  for (size_t i = 0; i < records.size(); ++i) {
    (held[i] ? out.second : out.first).push_back(records[i]);
  }
  return out;
}

void AugmentParams::validate() const {
  if (scale_min <= 0.0 || scale_max < scale_min) {
    throw ConfigError("AugmentParams: invalid scale range");
  }
  if (rotation_max_deg < 0.0) {
    throw ConfigError("AugmentParams: rotation range must be non-negative");
  }
  if (hflip_prob < 0.0 || hflip_prob > 1.0) {
    throw ConfigError("AugmentParams: hflip_prob must lie in [0,1]");
  }
  std::vector<int> seen;
  for (const auto& [a, b] : flip_pairs) {
    if (a == b) throw ConfigError("AugmentParams: degenerate flip pair");
    seen.push_back(a);
    seen.push_back(b);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw ConfigError("AugmentParams: flip pairs must be disjoint");
  }
}

namespace {

void drop_out_of_frame(JointSet& joints, int height, int width) {
  for (auto& j : joints.joints) {
    if (!j.labelled()) continue;
    if (j.x < 0.0 || j.x >= width || j.y < 0.0 || j.y >= height) {
      j = Joint{};
    }
  }
}

}  // namespace

Sample crop_and_resize(const AnnotationRecord& record, const Image& full_image) {
  if (full_image.empty()) throw DataError("crop_and_resize: empty image");
  if (record.scale <= 0.0) throw DataError("crop_and_resize: non-positive scale");

  const double side = 200.0 * record.scale;
  const double half = side / 2.0;
  if (record.center.x + half < 0.0 || record.center.x - half > full_image.width - 1 ||
      record.center.y + half < 0.0 || record.center.y - half > full_image.height - 1) {
    throw DataError("crop_and_resize: crop box fully outside image");
  }

  const double s = kSampleSize / side;
  const Affine a = Affine::translation(kSampleSize / 2.0, kSampleSize / 2.0)
                       .compose(Affine::scaling(s, s))
                       .compose(Affine::translation(-record.center.x,
                                                    -record.center.y));
  Sample out;
  out.image = warp_affine(full_image, a, kSampleSize, kSampleSize);
  out.joints = record.joints.transformed(a);
  drop_out_of_frame(out.joints, kSampleSize, kSampleSize);
  out.crop_from_image = a;
  out.meta = record;
  return out;
}

Sample augment(const Sample& sample, const AugmentParams& params,
               uint64_t rng_seed) {
  params.validate();
  Rng rng(rng_seed);
  const double scale = rng.uniform(params.scale_min, params.scale_max);
  const double rot_rad =
      rng.uniform(-params.rotation_max_deg, params.rotation_max_deg) * M_PI / 180.0;
  const bool flip = rng.bernoulli(params.hflip_prob);

  const int h = sample.image.height;
  const int w = sample.image.width;
  const Vec2 center{(w - 1) / 2.0, (h - 1) / 2.0};

  Affine a = Affine::rotation_about(center, rot_rad)
                 .compose(Affine::scaling_about(center, scale));
  if (flip) a = a.compose(Affine::hflip(w));

  Sample out;
  out.image = warp_affine(sample.image, a, h, w);
  JointSet moved = sample.joints.transformed(a);
  if (flip) {
    const auto& pairs = params.flip_pairs.empty()
                            ? flip_pairs(layout_for(sample.joints.size()))
                            : params.flip_pairs;
    for (const auto& [l, r] : pairs) std::swap(moved.joints[l], moved.joints[r]);
  }
  drop_out_of_frame(moved, h, w);
  out.joints = std::move(moved);
  out.crop_from_image = a.compose(sample.crop_from_image);
  out.meta = sample.meta;
  return out;
}

// ------------------------------------------------------ synthetic dataset

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {static_cast<float>(v), static_cast<float>(t), static_cast<float>(p)};
    case 1: return {static_cast<float>(q), static_cast<float>(v), static_cast<float>(p)};
    case 2: return {static_cast<float>(p), static_cast<float>(v), static_cast<float>(t)};
    case 3: return {static_cast<float>(p), static_cast<float>(q), static_cast<float>(v)};
    case 4: return {static_cast<float>(t), static_cast<float>(p), static_cast<float>(v)};
    default: return {static_cast<float>(v), static_cast<float>(p), static_cast<float>(q)};
  }
}

struct Figure {
  std::array<Vec2, 16> joints;  // MPII order
  Vec2 head_center;
  double head_radius = 0.0;
};

Vec2 clamp_to_canvas(Vec2 p) {
  const double margin = 6.0;
  return {std::clamp(p.x, margin, kSampleSize - 1 - margin),
          std::clamp(p.y, margin, kSampleSize - 1 - margin)};
}

Figure make_figure(Rng& rng) {
  const double u = 34.0 * rng.uniform(0.85, 1.15);  // limb unit, px
  Figure f;
  auto& j = f.joints;

  const Vec2 pelvis{128.0 + rng.uniform(-20.0, 20.0),
                    148.0 + rng.uniform(-12.0, 12.0)};
  j[6] = pelvis;
  j[7] = pelvis + Vec2{rng.uniform(-5.0, 5.0), -1.3 * u};            // thorax
  j[8] = j[7] + Vec2{rng.uniform(-3.0, 3.0), -0.35 * u};             // neck
  j[9] = j[8] + Vec2{rng.uniform(-4.0, 4.0), -0.55 * u};             // head top

  const double hip_dx = 0.34 * u;
  j[2] = pelvis + Vec2{-hip_dx, rng.uniform(-2.0, 2.0)};  // r hip
  j[3] = pelvis + Vec2{hip_dx, rng.uniform(-2.0, 2.0)};   // l hip
  for (const auto& [hip, knee, ankle] :
       {std::array<int, 3>{2, 1, 0}, std::array<int, 3>{3, 4, 5}}) {
    const double a1 = rng.uniform(-0.5, 0.5);
    const double a2 = a1 + rng.uniform(-0.5, 0.5);
    j[knee] = j[hip] + Vec2{std::sin(a1), std::cos(a1)} * (0.85 * u);
    j[ankle] = j[knee] + Vec2{std::sin(a2), std::cos(a2)} * (0.8 * u);
  }

  const double sho_dx = 0.48 * u;
  j[12] = j[7] + Vec2{-sho_dx, rng.uniform(-3.0, 3.0)};  // r shoulder
  j[13] = j[7] + Vec2{sho_dx, rng.uniform(-3.0, 3.0)};   // l shoulder
  for (const auto& [sho, elbow, wrist, side] :
       {std::array<int, 4>{12, 11, 10, -1}, std::array<int, 4>{13, 14, 15, 1}}) {
    const double a1 = side * rng.uniform(0.2, 1.4);
    const double a2 = a1 + rng.uniform(-0.9, 0.9);
    j[elbow] = j[sho] + Vec2{std::sin(a1), std::cos(a1)} * (0.55 * u);
    j[wrist] = j[elbow] + Vec2{std::sin(a2), std::cos(a2)} * (0.5 * u);
  }

  for (auto& p : j) p = clamp_to_canvas(p);

  f.head_center = (j[8] + j[9]) * 0.5;
  f.head_radius = std::max(4.0, 0.5 * (j[9] - j[8]).norm());
  return f;
}

constexpr std::array<std::pair<int, int>, 15> kMpiiBones = {{
    {0, 1}, {1, 2}, {2, 6}, {3, 6}, {3, 4}, {4, 5},
    {6, 7}, {7, 8}, {8, 9},
    {10, 11}, {11, 12}, {12, 7}, {7, 13}, {13, 14}, {14, 15},
}};

// Output joint index -> MPII-16 geometry index.
std::vector<int> joint_geometry_map(int k) {
  static const std::vector<int> lsp = {0, 1, 2, 3, 4, 5, 10, 11, 12, 13, 14, 15, 8, 9};
  std::vector<int> map;
  if (k == 14) return lsp;
  for (int i = 0; i < std::min(k, 16); ++i) map.push_back(i);
  return map;  // indices >= 16 handled as ring markers
}

}  // namespace

Rgb synth_marker_color(int k, int num_joints) {
  (void)num_joints;
  return hsv_to_rgb(0.61803398875 * k, 0.95, 1.0);
}

double synth_marker_radius() { return 3.0; }

std::vector<Sample> synth_dataset(int n, int k, uint64_t rng_seed) {
  if (n < 1 || k < 1) throw ContractError("synth_dataset: n and k must be >= 1");

  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(rng_seed, static_cast<uint64_t>(i)));
    const Figure fig = make_figure(rng);

    const float base = static_cast<float>(rng.uniform(0.05, 0.12));
    Image img = Image::filled(kSampleSize, kSampleSize, {base, base, base * 1.2f});
    // dim texture rectangles so the background is not constant
    for (int r = 0; r < 3; ++r) {
      const double x0 = rng.uniform(0, kSampleSize);
      const double y0 = rng.uniform(0, kSampleSize);
      const double ww = rng.uniform(20, 90);
      const double hh = rng.uniform(20, 90);
      const float shade = static_cast<float>(rng.uniform(0.08, 0.2));
      for (int y = std::max(0, (int)y0); y < std::min((double)kSampleSize, y0 + hh); ++y) {
        for (int x = std::max(0, (int)x0); x < std::min((double)kSampleSize, x0 + ww); ++x) {
          img.at(0, y, x) = shade;
          img.at(1, y, x) = shade;
          img.at(2, y, x) = shade * 0.9f;
        }
      }
    }

    for (const auto& [a, b] : kMpiiBones) {
      draw_line(img, fig.joints[a], fig.joints[b], 3.0, {0.35f, 0.35f, 0.38f});
    }
    draw_disc(img, fig.head_center, fig.head_radius, {0.75f, 0.65f, 0.55f});

    const auto geo = joint_geometry_map(k);
    JointSet joints(k);
    Rng ring_rng(mix_seed(rng_seed, static_cast<uint64_t>(i), 0x52494e47ull));
    for (int jk = 0; jk < k; ++jk) {
      Vec2 p;
      if (jk < static_cast<int>(geo.size())) {
        p = fig.joints[geo[jk]];
      } else {
        // extra joints beyond the 16-joint skeleton sit on a ring
        const double phi = 2.0 * M_PI * (jk - 16) / std::max(1, k - 16) +
                           ring_rng.uniform(-0.1, 0.1);
        p = clamp_to_canvas(Vec2{128.0 + 100.0 * std::cos(phi),
                                 128.0 + 100.0 * std::sin(phi)});
      }
      joints.set(jk, p.x, p.y, Visibility::kVisible);
      draw_disc(img, p, synth_marker_radius(), synth_marker_color(jk, k));
    }

    AnnotationRecord rec;
    rec.image_path = "synthetic://" + std::to_string(i);
    rec.center = {kSampleSize / 2.0, kSampleSize / 2.0};
    rec.scale = kSampleSize / 200.0;
    rec.joints = joints;
    rec.layout = layout_for(k);
    rec.head_size = 0.6 * (2.0 * std::sqrt(2.0) * fig.head_radius);
    rec.torso_diag = derive_torso_diag(joints, rec.layout);
    if (!rec.torso_diag) {
      rec.torso_diag = (fig.joints[12] - fig.joints[3]).norm();
    }

    Sample s;
    s.image = std::move(img);
    s.joints = joints;
    s.crop_from_image = Affine::identity();
    s.meta = std::move(rec);
    out.push_back(std::move(s));
  }
  return out;
}

void corrupt_joint_labels(std::vector<Sample>& samples, double fraction,
                          uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ContractError("corrupt_joint_labels: fraction must lie in [0,1]");
  }
  std::vector<std::pair<size_t, int>> labelled;
  for (size_t i = 0; i < samples.size(); ++i) {
    for (int k = 0; k < samples[i].joints.size(); ++k) {
      if (samples[i].joints[k].labelled()) labelled.emplace_back(i, k);
    }
  }
  Rng rng(seed);
  rng.shuffle(labelled);
  const size_t n = static_cast<size_t>(fraction * labelled.size() + 0.5);
  for (size_t i = 0; i < n; ++i) {
    auto [si, k] = labelled[i];
    samples[si].joints.set(k, rng.uniform(8.0, kSampleSize - 8.0),
                           rng.uniform(8.0, kSampleSize - 8.0),
                           Visibility::kVisible);
  }
}

}  // namespace fpd
