#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fpd/common.hpp"
#include "fpd/geometry.hpp"

namespace fpd {

// Sentinel coordinate written for unlabelled joints in files and reports.
inline constexpr double kUnlabelledCoord = -1.0;

enum class Visibility : uint8_t {
  kUnlabelled = 0,  // no annotation; excluded from losses and metrics
  kOccluded = 1,    // labelled but not visible
  kVisible = 2,
};

struct Joint {
  double x = kUnlabelledCoord;
  double y = kUnlabelledCoord;
  Visibility vis = Visibility::kUnlabelled;

  bool labelled() const { return vis != Visibility::kUnlabelled; }
  Vec2 pos() const { return {x, y}; }
};

// K labelled 2D joint positions with visibility flags for one person.
struct JointSet {
  std::vector<Joint> joints;

  JointSet() = default;
  explicit JointSet(int k) : joints(k) {}

  int size() const { return static_cast<int>(joints.size()); }
  Joint& operator[](int k) { return joints[k]; }
  const Joint& operator[](int k) const { return joints[k]; }

  int labelled_count() const {
    int n = 0;
    for (const auto& j : joints) n += j.labelled() ? 1 : 0;
    return n;
  }

  std::vector<uint8_t> labelled_mask() const {
    std::vector<uint8_t> m(joints.size());
    for (size_t k = 0; k < joints.size(); ++k) m[k] = joints[k].labelled();
    return m;
  }

  void set(int k, double x, double y, Visibility v = Visibility::kVisible) {
    joints[k] = Joint{x, y, v};
  }

  void set_unlabelled(int k) {
    joints[k] = Joint{kUnlabelledCoord, kUnlabelledCoord, Visibility::kUnlabelled};
  }

  // Transforms labelled joints; unlabelled entries stay sentinel.
  JointSet transformed(const Affine& m) const {
    JointSet out(size());
    for (int k = 0; k < size(); ++k) {
      if (!joints[k].labelled()) continue;
      const Vec2 p = m.apply(joints[k].pos());
      out.joints[k] = Joint{p.x, p.y, joints[k].vis};
    }
    return out;
  }
};

// Image/heatmap geometry shared by the codec, the datasets and the network.
struct ImageSpec {
  int height = 256;
  int width = 256;
  int heatmap_height = 64;
  int heatmap_width = 64;
  int stride = 4;

  void validate() const {
    if (height <= 0 || width <= 0 || heatmap_height <= 0 || heatmap_width <= 0 ||
        stride <= 0) {
      throw ConfigError("ImageSpec: all dimensions must be positive");
    }
    if (height != heatmap_height * stride || width != heatmap_width * stride) {
      throw ConfigError("ImageSpec: image size must equal heatmap size times stride");
    }
  }

  static ImageSpec standard(int input_size = 256, int stride = 4) {
    ImageSpec s;
    s.height = s.width = input_size;
    s.heatmap_height = s.heatmap_width = input_size / stride;
    s.stride = stride;
    s.validate();
    return s;
  }

  bool operator==(const ImageSpec&) const = default;
};

// Known joint orderings.
enum class JointLayout { kMpii16, kLsp14, kGeneric };

inline JointLayout layout_for(int k) {
  if (k == 16) return JointLayout::kMpii16;
  if (k == 14) return JointLayout::kLsp14;
  return JointLayout::kGeneric;
}

// Left/right index pairs swapped under horizontal flip.
inline const std::vector<std::pair<int, int>>& flip_pairs(JointLayout layout) {
  static const std::vector<std::pair<int, int>> mpii = {
      {0, 5}, {1, 4}, {2, 3}, {10, 15}, {11, 14}, {12, 13}};
  static const std::vector<std::pair<int, int>> lsp = {
      {0, 5}, {1, 4}, {2, 3}, {6, 11}, {7, 10}, {8, 9}};
  static const std::vector<std::pair<int, int>> none;
  switch (layout) {
    case JointLayout::kMpii16: return mpii;
    case JointLayout::kLsp14: return lsp;
    default: return none;
  }
}

inline const std::vector<std::string>& joint_names(JointLayout layout) {
  static const std::vector<std::string> mpii = {
      "r_ankle", "r_knee", "r_hip", "l_hip", "l_knee", "l_ankle",
      "pelvis", "thorax", "neck", "head_top",
      "r_wrist", "r_elbow", "r_shoulder", "l_shoulder", "l_elbow", "l_wrist"};
  static const std::vector<std::string> lsp = {
      "r_ankle", "r_knee", "r_hip", "l_hip", "l_knee", "l_ankle",
      "r_wrist", "r_elbow", "r_shoulder", "l_shoulder", "l_elbow", "l_wrist",
      "neck", "head_top"};
  static const std::vector<std::string> none;
  switch (layout) {
    case JointLayout::kMpii16: return mpii;
    case JointLayout::kLsp14: return lsp;
    default: return none;
  }
}

}  // namespace fpd
