#ifndef TEXTSPOT_DISTANCE_HPP
#define TEXTSPOT_DISTANCE_HPP

#include <cstddef>

namespace textspot {

/// Squared Euclidean distance. Sixteen independent float lanes are summed in
/// a fixed order, so the result is deterministic and the loop vectorizes.
inline float squared_l2(const float* a, const float* b, std::size_t dim) {
  float acc[16] = {};
  std::size_t i = 0;
  for (; i + 16 <= dim; i += 16) {
    for (std::size_t j = 0; j < 16; ++j) {
      const float d = a[i + j] - b[i + j];
      acc[j] += d * d;
    }
  }
  float tail = 0.0f;
  for (; i < dim; ++i) {
    const float d = a[i] - b[i];
    tail += d * d;
  }
  for (std::size_t width = 8; width > 0; width /= 2) {
    for (std::size_t j = 0; j < width; ++j) acc[j] += acc[j + width];
  }
  return acc[0] + tail;
}

}  // namespace textspot

#endif  // TEXTSPOT_DISTANCE_HPP
