#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpd/image.hpp"
#include "fpd/joints.hpp"

namespace fpd {

// One person instance. center/scale follow the MPII convention: the person
// occupies a square of side 200*scale pixels around center in the original
// image.
struct AnnotationRecord {
  std::string image_path;
  Vec2 center;
  double scale = 1.0;
  JointSet joints;  // original-image coordinates
  std::optional<double> head_size;   // PCKh normalizer
  std::optional<double> torso_diag;  // PCK normalizer
  JointLayout layout = JointLayout::kGeneric;
};

enum class AnnotationFormat { kMpiiJson, kLspMatExport };

AnnotationFormat parse_annotation_format(const std::string& name);

// Parses the toolkit's structured-text annotation schema (see README).
// Malformed files raise DataError with record context.
std::vector<AnnotationRecord> load_annotations(const std::string& path,
                                               AnnotationFormat format);

// Splits `count` randomly chosen records into a held-out validation set.
std::pair<std::vector<AnnotationRecord>, std::vector<AnnotationRecord>>
make_validation_split(const std::vector<AnnotationRecord>& records, int count,
                      uint64_t seed);

struct AugmentParams {
  double scale_min = 0.75;
  double scale_max = 1.25;
  double rotation_max_deg = 30.0;
  double hflip_prob = 0.5;
  // Left/right joint index pairs; when empty the layout table for the
  // sample's joint count is used.
  std::vector<std::pair<int, int>> flip_pairs;

  void validate() const;
};

// A network-ready training example: 256x256 image, joints in crop
// coordinates, and the affine that produced the crop (original image coords
// -> crop coords).
struct Sample {
  Image image;
  JointSet joints;
  Affine crop_from_image;
  AnnotationRecord meta;
};

inline constexpr int kSampleSize = 256;

// Person-centered square crop of side 200*scale resized to 256x256; joints
// get the identical affine. The crop center maps to pixel (128,128). Joints
// falling outside the crop are marked unlabelled. A crop box fully outside
// the source image raises DataError.
Sample crop_and_resize(const AnnotationRecord& record, const Image& full_image);

// Random scale/rotation/flip about the image center ((S-1)/2,(S-1)/2).
// Flip permutes joint indices by the flip pairs; joints pushed out of frame
// become unlabelled. Deterministic given the seed.
Sample augment(const Sample& sample, const AugmentParams& params,
               uint64_t rng_seed);

// Procedural stick-figure dataset with exactly known joint coordinates,
// head_size and torso_diag. Deterministic given the seed. k of 16 renders
// the MPII joint order, 14 the LSP order.
std::vector<Sample> synth_dataset(int n, int k, uint64_t rng_seed);

// Marker color used for joint k when rendering synthetic figures.
Rgb synth_marker_color(int k, int num_joints);
double synth_marker_radius();

// Replaces the given fraction of labelled joints with uniform random
// in-bounds positions (label-noise fixture for distillation experiments).
void corrupt_joint_labels(std::vector<Sample>& samples, double fraction,
                          uint64_t seed);

}  // namespace fpd
