#include "textspot/loss.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "textspot/error.hpp"

namespace textspot {

void LossConfig::validate() const {
  if (lambda_box < 0 || lambda_obj < 0 || lambda_noobj < 0 || lambda_cls < 0) {
    throw Error(ErrorCode::kInvalidArgument, "loss weights must be non-negative");
  }
  if (!(epsilon > 0.0 && epsilon < 1e-3)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1e-3)");
  }
}

namespace {

template <typename T>
double cross_entropy(std::span<const T> target, std::span<const T> pred, double epsilon) {
  if (target.size() != pred.size() || target.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "target and prediction lengths differ");
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < target.size(); ++n) {
    const double c = static_cast<double>(target[n]);
    const double p = std::clamp(static_cast<double>(pred[n]), epsilon, 1.0 - epsilon);
    sum += c * std::log(p) + (1.0 - c) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(target.size());
}

template <typename T>
std::vector<double> cross_entropy_grad(std::span<const T> target, std::span<const T> pred,
                                       double epsilon) {
  if (target.size() != pred.size() || target.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "target and prediction lengths differ");
  }
  const double n_total = static_cast<double>(target.size());
  std::vector<double> grad(target.size());
  for (std::size_t n = 0; n < target.size(); ++n) {
    const double c = static_cast<double>(target[n]);
    const double p = std::clamp(static_cast<double>(pred[n]), epsilon, 1.0 - epsilon);
    grad[n] = (p - c) / (n_total * p * (1.0 - p));
  }
  return grad;
}

}  // namespace

double l_cls(std::span<const float> target, std::span<const float> pred, double epsilon) {
  return cross_entropy(target, pred, epsilon);
}

std::vector<double> grad_l_cls(std::span<const float> target, std::span<const float> pred,
                               double epsilon) {
  return cross_entropy_grad(target, pred, epsilon);
}

double l_cls(std::span<const double> target, std::span<const double> pred, double epsilon) {
  return cross_entropy(target, pred, epsilon);
}

std::vector<double> grad_l_cls(std::span<const double> target, std::span<const double> pred,
                               double epsilon) {
  return cross_entropy_grad(target, pred, epsilon);
}

double l_box(std::span<const double> target, std::span<const double> pred) {
  if (target.size() != 4 || pred.size() != 4) {
    throw Error(ErrorCode::kDimensionMismatch, "box offsets must have 4 components");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = target[i] - pred[i];
    sum += d * d;
  }
  return sum;
}

double l_obj(int target, double pred, double lambda_obj, double lambda_noobj) {
  if (target != 0 && target != 1) {
    throw Error(ErrorCode::kInvalidArgument, "objectness target must be 0 or 1");
  }
  const double d = static_cast<double>(target) - pred;
  return (target == 1 ? lambda_obj : lambda_noobj) * d * d;
}

double total_loss(const LossInputs& in, const LossConfig& config) {
  config.validate();
  return config.lambda_box * l_box(in.box_target, in.box_pred) +
         l_obj(in.objectness_target, in.objectness_pred, config.lambda_obj,
               config.lambda_noobj) +
         config.lambda_cls * l_cls(std::span<const float>(in.phoc_target),
                                   std::span<const float>(in.phoc_pred), config.epsilon);
}

GradientCheckReport check_cls_gradient(std::size_t pairs, std::size_t dimension,
                                       std::uint64_t seed, double step) {
  if (pairs == 0 || dimension == 0) {
    throw Error(ErrorCode::kInvalidArgument, "gradient check needs pairs and dimension");
  }
  constexpr double kEps = 1e-7;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(0.5);
  std::uniform_real_distribution<double> prob(0.01, 0.99);

  GradientCheckReport report;
  report.pairs = pairs;
  std::vector<double> target(dimension), pred(dimension);
  for (std::size_t p = 0; p < pairs; ++p) {
    for (std::size_t n = 0; n < dimension; ++n) {
      target[n] = bit(rng) ? 1.0 : 0.0;
      pred[n] = prob(rng);
    }
    const auto analytic = grad_l_cls(std::span<const double>(target),
                                     std::span<const double>(pred), kEps);
    // Only the n-th term of the mean moves.
    const double scale_n = 1.0 / static_cast<double>(dimension);
    for (std::size_t n = 0; n < dimension; ++n) {
      const std::span<const double> c(&target[n], 1);
      const double hi = pred[n] + step;
      const double lo = pred[n] - step;
      const double up = l_cls(c, std::span<const double>(&hi, 1), kEps) * scale_n;
      const double down = l_cls(c, std::span<const double>(&lo, 1), kEps) * scale_n;
      const double numeric = (up - down) / (2.0 * step);
      const double scale = std::max(std::abs(analytic[n]), std::abs(numeric));
      const double rel = scale > 0.0 ? std::abs(analytic[n] - numeric) / scale : 0.0;
      report.max_relative_error = std::max(report.max_relative_error, rel);
    }
  }
  return report;
}

}  // namespace textspot
