#include "textspot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "textspot/error.hpp"

namespace textspot {

RawGrid::RawGrid(int gw, int gh, int n_anchors, int dim)
    : grid_width(gw), grid_height(gh), anchors(n_anchors), phoc_dim(dim) {
  values.assign(static_cast<std::size_t>(gw) * gh * n_anchors * (5 + dim), 0.0f);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double shape_iou(const BoxShape& a, const BoxShape& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  return inter / (a.w * a.h + b.w * b.h - inter);
}

double coverage(std::span<const BoxShape> gt, const AnchorSet& anchors, double min_iou) {
  if (gt.empty() || anchors.shapes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "coverage needs non-empty inputs");
  }
  std::size_t covered = 0;
  for (const auto& shape : gt) {
    for (const auto& anchor : anchors.shapes) {
      if (shape_iou(shape, anchor) >= min_iou) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(gt.size());
}

std::size_t assign_best_anchor(const BoxShape& gt, const AnchorSet& anchors) {
  if (anchors.shapes.empty()) throw Error(ErrorCode::kInvalidArgument, "no anchors");
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < anchors.shapes.size(); ++i) {
    const double v = shape_iou(gt, anchors.shapes[i]);
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  return best;
}

namespace {

struct Fit {
  bool covers = false;
  double mean_iou = 0.0;
};

Fit evaluate_fit(std::span<const BoxShape> gt, const std::vector<BoxShape>& anchors,
                 double min_iou, std::vector<std::size_t>* assignment) {
  Fit fit{true, 0.0};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    std::size_t best = 0;
    double best_iou = -1.0;
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      const double v = shape_iou(gt[i], anchors[j]);
      if (v > best_iou) {
        best_iou = v;
        best = j;
      }
    }
    if (best_iou < min_iou) fit.covers = false;
    fit.mean_iou += best_iou;
    if (assignment) (*assignment)[i] = best;
  }
  fit.mean_iou /= static_cast<double>(gt.size());
  return fit;
}

std::vector<BoxShape> farthest_point_seeds(std::span<const BoxShape> gt, std::size_t k,
                                           std::mt19937_64& rng) {
  std::vector<BoxShape> seeds;
  std::uniform_int_distribution<std::size_t> pick(0, gt.size() - 1);
  seeds.push_back(gt[pick(rng)]);
  std::vector<double> nearest(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) nearest[i] = 1.0 - shape_iou(gt[i], seeds[0]);
  while (seeds.size() < k) {
    auto far = std::max_element(nearest.begin(), nearest.end());
    const BoxShape next = gt[static_cast<std::size_t>(far - nearest.begin())];
    seeds.push_back(next);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      nearest[i] = std::min(nearest[i], 1.0 - shape_iou(gt[i], next));
    }
  }
  return seeds;
}

double median_of(std::vector<double>& values) {
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace

AnchorSet select_anchors(std::span<const BoxShape> gt, const AnchorSearchOptions& options) {
  if (gt.empty()) throw Error(ErrorCode::kInvalidArgument, "no ground-truth shapes");
  if (!(options.min_iou > 0.0 && options.min_iou < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "min_iou must lie in (0, 1)");
  }
  for (const auto& s : gt) {
    if (!(s.w > 0.0 && s.h > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "shapes must have positive dimensions");
    }
  }

  std::vector<std::size_t> assignment(gt.size());
  for (std::size_t k = 1; k <= options.max_k; ++k) {
    std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ULL * k);
    std::vector<BoxShape> anchors = farthest_point_seeds(gt, k, rng);

    std::vector<BoxShape> best;
    double best_score = -1.0;
    Fit fit = evaluate_fit(gt, anchors, options.min_iou, &assignment);
    if (fit.covers) {
      best = anchors;
      best_score = fit.mean_iou;
    }
    for (int it = 0; it < options.max_iterations; ++it) {
      std::vector<std::vector<double>> widths(k), heights(k);
      for (std::size_t i = 0; i < gt.size(); ++i) {
        widths[assignment[i]].push_back(gt[i].w);
        heights[assignment[i]].push_back(gt[i].h);
      }
      std::vector<BoxShape> next = anchors;
      for (std::size_t j = 0; j < k; ++j) {
        if (widths[j].empty()) continue;
        next[j] = {median_of(widths[j]), median_of(heights[j])};
      }
      if (next == anchors) break;
      anchors = std::move(next);
      fit = evaluate_fit(gt, anchors, options.min_iou, &assignment);
      if (fit.covers && fit.mean_iou > best_score) {
        best = anchors;
        best_score = fit.mean_iou;
      }
    }
    if (!best.empty()) {
      AnchorSet result{std::move(best)};
      if (coverage(gt, result, options.min_iou) != 1.0) {
        throw Error(ErrorCode::kCoverageUnreachable, "internal coverage check failed");
      }
      return result;
    }
  }
  throw Error(ErrorCode::kCoverageUnreachable,
              "no anchor set with at most " + std::to_string(options.max_k) +
                  " priors covers every shape at IoU " + std::to_string(options.min_iou));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<Detection> decode_grid(const RawGrid& raw, const GridDecodeConfig& config,
                                   const std::string& image_id) {
  if (config.stride <= 0 || config.input_width <= 0 || config.input_height <= 0 ||
      config.input_width % config.stride != 0 || config.input_height % config.stride != 0) {
    throw Error(ErrorCode::kInvalidArgument, "input size must be a positive multiple of stride");
  }
  if (!(config.objectness_threshold >= 0.0 && config.objectness_threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "objectness threshold must lie in [0, 1)");
  }
  if (config.apply_nms) {
    throw Error(ErrorCode::kInvalidArgument, "non-maximal suppression is not supported");
  }
  if (config.anchors.shapes.empty()) throw Error(ErrorCode::kInvalidArgument, "no anchors");
  const int gw = config.grid_width();
  const int gh = config.grid_height();
  const int n_anchors = static_cast<int>(config.anchors.size());
  if (raw.grid_width != gw || raw.grid_height != gh || raw.anchors != n_anchors ||
      raw.phoc_dim < 0 ||
      raw.values.size() != static_cast<std::size_t>(gw) * gh * n_anchors * raw.channels()) {
    throw Error(ErrorCode::kShapeMismatch,
                "raw grid does not match " + std::to_string(gw) + "x" + std::to_string(gh) +
                    "x" + std::to_string(n_anchors) + " layout");
  }

  const double stride = config.stride;
  std::vector<Detection> out;
  for (int cx = 0; cx < gw; ++cx) {
    for (int cy = 0; cy < gh; ++cy) {
      for (int a = 0; a < n_anchors; ++a) {
        const float* t = raw.values.data() + raw.offset(cx, cy, a);
        const double objectness = sigmoid(t[4]);
        if (objectness < config.objectness_threshold) continue;
        const BoxShape& prior = config.anchors.shapes[static_cast<std::size_t>(a)];
        const double center_x = (sigmoid(t[0]) + cx) * stride;
        const double center_y = (sigmoid(t[1]) + cy) * stride;
        const double w = prior.w * std::exp(static_cast<double>(t[2]));
        const double h = prior.h * std::exp(static_cast<double>(t[3]));
        Detection det;
        det.image_id = image_id;
        det.box = {center_x - w / 2.0, center_y - h / 2.0, w, h};
        det.objectness = static_cast<float>(objectness);
        det.phoc.kind = PhocKind::kPrediction;
        det.phoc.values.resize(static_cast<std::size_t>(raw.phoc_dim));
        for (int d = 0; d < raw.phoc_dim; ++d) {
          det.phoc.values[static_cast<std::size_t>(d)] = static_cast<float>(sigmoid(t[5 + d]));
        }
        out.push_back(std::move(det));
      }
    }
  }
  return out;
}

}  // namespace textspot
