#ifndef TEXTSPOT_LOSS_HPP
#define TEXTSPOT_LOSS_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace textspot {

struct LossConfig {
  double lambda_box = 5.0;
  double lambda_obj = 1.0;
  double lambda_noobj = 0.5;
  double lambda_cls = 0.015;
  double epsilon = 1e-7;

  void validate() const;
};

/// One matched (target, prediction) pair for a single anchor slot.
struct LossInputs {
  std::array<double, 4> box_target{};
  std::array<double, 4> box_pred{};
  int objectness_target = 0;
  double objectness_pred = 0.0;
  std::vector<float> phoc_target;
  std::vector<float> phoc_pred;
};

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
double l_cls(std::span<const float> target, std::span<const float> pred, double epsilon);

/// d l_cls / d pred, component n = (p_n - c_n) / (N p_n (1 - p_n)).
std::vector<double> grad_l_cls(std::span<const float> target, std::span<const float> pred,
                               double epsilon);

/// Double-precision overloads used for finite-difference checks.
double l_cls(std::span<const double> target, std::span<const double> pred, double epsilon);
std::vector<double> grad_l_cls(std::span<const double> target, std::span<const double> pred,
                               double epsilon);

double l_box(std::span<const double> target, std::span<const double> pred);

double l_obj(int target, double pred, double lambda_obj, double lambda_noobj);

double total_loss(const LossInputs& inputs, const LossConfig& config);

struct GradientCheckReport {
  std::size_t pairs = 0;
  double max_relative_error = 0.0;
};

/// Central finite differences of l_cls against grad_l_cls on random pairs
/// with predictions drawn from [0.01, 0.99].
GradientCheckReport check_cls_gradient(std::size_t pairs, std::size_t dimension,
                                       std::uint64_t seed, double step = 1e-5);

}  // namespace textspot

#endif  // TEXTSPOT_LOSS_HPP
