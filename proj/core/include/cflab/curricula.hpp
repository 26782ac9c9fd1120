#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cflab/gratings.hpp"
#include "cflab/rng.hpp"

namespace cflab {

/// Binary classification between two digit classes; label 0 <-> digit0.
struct MnistTask {
  int digit0 = 0;
  int digit1 = 1;
};

using TaskSpec = std::variant<GratingTask, MnistTask>;

struct CurriculumId {
  std::string experiment;  // "exp1", "exp2", ...
  int index = 0;           // curriculum index within the experiment
};

struct Curriculum {
  CurriculumId id;
  std::vector<TaskSpec> tasks;
  std::uint64_t construction_seed = 0;
  std::optional<double> gamma;   // inter-task distance (randomized curricula)
  std::optional<Vec2> direction; // unit shift direction (randomized curricula)
};

/// Default category spread. The category means are 0.2 apart, so this keeps
/// the two categories of a task ~4 standard deviations apart on the
/// frequency axis: reliably separable but with genuine overlap in the tails.
inline constexpr double kDefaultSigma2 = 0.0025;

/// Inter-category separation vector, frequency axis only.
inline constexpr double kCategorySep = 0.2;

/// Three-task contrasting curricula. `positions` are the per-task category
/// midpoints along the varying latent dimension; the other dimension stays
/// at `fixed_center`. The frequency-shift curriculum varies the category
/// pair's midpoint in omega with theta pinned; the orientation-shift
/// curriculum pins the omega pair around fixed_center and varies theta.
struct ContrastingConfig {
  std::vector<double> positions{0.3, 0.5, 0.7};
  double fixed_center = 0.5;
  double category_sep = kCategorySep;
  double sigma2 = kDefaultSigma2;

  /// Rejects configs whose categories are not frequency-separable
  /// (mean gap below 3 sigma). Throws std::invalid_argument.
  void validate() const;
};

/// Returns (semantic-shift curriculum, perceptual-shift curriculum).
std::pair<Curriculum, Curriculum> build_contrasting_curricula(const ContrastingConfig& cfg);

/// One randomized two-task curriculum:
///   mu1 ~ U(0.2, 0.8)^2 (or fixed_first), upsilon1 = mu1 + (0.2, 0),
///   d ~ U(-1, 1)^2 normalized to unit length (redrawn while |d| < 1e-9),
///   task 2 = task 1 shifted rigidly by gamma * d_hat.
/// Draw order per curriculum: mu1.omega, mu1.theta, d.omega, d.theta.
Curriculum build_random_curriculum(int index, double gamma,
                                   const std::optional<GratingTask>& fixed_first, Rng& rng,
                                   double sigma2 = kDefaultSigma2);

/// (|mu2.omega - mu1.omega|, |mu2.theta - mu1.theta|) for a two-task grating
/// curriculum; equals gamma * |d_hat| componentwise for randomized ones.
std::pair<double, double> semantic_and_perceptual_distance(const Curriculum& c);

const GratingTask& grating_task(const Curriculum& c, std::size_t task_idx);

}  // namespace cflab
