#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "cflab/matrix.hpp"
#include "cflab/rng.hpp"

namespace cflab {

inline constexpr int kImageSide = 16;
inline constexpr int kImagePixels = kImageSide * kImageSide;

/// Latent coordinates: spatial frequency (radians per pixel) and
/// orientation (radians).
struct Vec2 {
  double omega = 0.0;
  double theta = 0.0;
};

/// One category: an isotropic 2D Gaussian over (omega, theta) with
/// covariance sigma2 * I.
struct Category {
  Vec2 mean;
  double sigma2 = 0.0;
};

/// A binary grating classification task. cat0 draws label 0, cat1 label 1;
/// both categories share sigma2.
struct GratingTask {
  Category cat0;
  Category cat1;
};

struct GratingParams {
  double omega = 0.0;
  double theta = 0.0;
  double phi = 0.0;  // in [0, 1); enters the luminance formula unscaled
};

enum class Role : std::uint8_t { train = 0, validation = 1 };

struct LabeledImageSet {
  Matrix images;                     // n x 256, row-major 16x16, luminance in [-1, 1]
  std::vector<std::uint8_t> labels;  // n entries in {0, 1}
  Role role = Role::train;

  std::size_t size() const { return labels.size(); }
};

/// Pixel (x, y), x and y in 0..15, stored at index 16*y + x, with luminance
///   sin(omega * (x cos(theta) + y sin(theta) - phi)).
std::array<double, kImagePixels> render_grating(const GratingParams& p);

/// Draws n labeled gratings: label ~ Bernoulli(0.5), (omega, theta) from the
/// label's category (independent per-axis Gaussians), phi ~ U(0, 1).
/// Per-row draw order is fixed: label, omega, theta, phi.
LabeledImageSet sample_task_dataset(const GratingTask& task, std::size_t n, Rng& rng,
                                    Role role = Role::train);

/// Dump format: one-line JSON header (n, width, height, role, seed) + '\n',
/// then n*256 little-endian float32 pixels, then n raw label bytes.
void write_image_set(const LabeledImageSet& set, const std::filesystem::path& path,
                     std::uint64_t seed);
LabeledImageSet read_image_set(const std::filesystem::path& path);

}  // namespace cflab
