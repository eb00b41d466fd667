#ifndef TEXTSPOT_GEOMETRY_HPP
#define TEXTSPOT_GEOMETRY_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "textspot/phoc.hpp"

namespace textspot {

/// Axis-aligned box in pixels; (x, y) is the top-left corner.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BoundingBox&) const = default;
};

/// Width/height prior (or ground-truth box size) with no position.
struct BoxShape {
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BoxShape&) const = default;
};

struct AnchorSet {
  std::vector<BoxShape> shapes;

  std::size_t size() const { return shapes.size(); }
};

struct GridDecodeConfig {
  int input_width = 608;
  int input_height = 608;
  int stride = 32;
  AnchorSet anchors;
  double objectness_threshold = 0.0025;
  // Suppression is intentionally unsupported; decode_grid rejects true.
  bool apply_nms = false;

  int grid_width() const { return input_width / stride; }
  int grid_height() const { return input_height / stride; }
};

/**
 * Raw network activations for one image.
 *
 * Layout is [cell_x][cell_y][anchor][channel] with channel order
 * (tx, ty, tw, th, tc, phoc_0 ... phoc_{D-1}).
 */
struct RawGrid {
  int grid_width = 0;
  int grid_height = 0;
  int anchors = 0;
  int phoc_dim = 0;
  std::vector<float> values;

  RawGrid() = default;
  RawGrid(int gw, int gh, int n_anchors, int dim);

  int channels() const { return 5 + phoc_dim; }
  std::size_t offset(int cx, int cy, int anchor) const {
    return ((static_cast<std::size_t>(cx) * grid_height + cy) * anchors + anchor) *
           static_cast<std::size_t>(channels());
  }
  std::span<float> cell(int cx, int cy, int anchor) {
    return {values.data() + offset(cx, cy, anchor), static_cast<std::size_t>(channels())};
  }
};

struct Detection {
  std::string image_id;
  BoundingBox box;
  float objectness = 0.0f;
  PhocVector phoc;
};

double iou(const BoundingBox& a, const BoundingBox& b);

/// IoU of two shapes placed with coincident centres.
double shape_iou(const BoxShape& a, const BoxShape& b);

/// Fraction of `gt` shapes with at least one anchor at shape_iou >= min_iou.
double coverage(std::span<const BoxShape> gt, const AnchorSet& anchors, double min_iou);

/// Lowest-index argmax of shape_iou.
std::size_t assign_best_anchor(const BoxShape& gt, const AnchorSet& anchors);

struct AnchorSearchOptions {
  double min_iou = 0.6;
  std::size_t max_k = 32;
  std::uint64_t seed = 0;
  int max_iterations = 50;
};

/**
 * Smallest-k prior set that covers every ground-truth shape.
 *
 * For k = 1, 2, ... runs farthest-point seeding (random first pick) followed
 * by k-medians refinement under the 1 - shape_iou distance, keeping the
 * covering iterate with the highest mean best-IoU. Returns the first k that
 * reaches full coverage; throws kCoverageUnreachable beyond max_k.
 */
AnchorSet select_anchors(std::span<const BoxShape> gt, const AnchorSearchOptions& options);

double sigmoid(double x);

/// Converts one image's grid into detections with objectness >= threshold.
/// No suppression is applied.
std::vector<Detection> decode_grid(const RawGrid& raw, const GridDecodeConfig& config,
                                   const std::string& image_id);

}  // namespace textspot

#endif  // TEXTSPOT_GEOMETRY_HPP
