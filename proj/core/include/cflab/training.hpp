#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cflab/curricula.hpp"
#include "cflab/diagnostics.hpp"
#include "cflab/mnist.hpp"
#include "cflab/model.hpp"

namespace cflab {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  int batch_size = 128;
  int epochs_per_task = 1000;
  int n_train = 1000;  // per grating task; MNIST uses all images of the pair
  int n_val = 1000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double eps_cf = 0.2;

  /// 1 records validation losses every epoch; k > 1 every k-th epoch;
  /// 0 records no per-epoch rows (task-boundary evaluations still happen).
  int val_trace_stride = 1;

  InitMode init = InitMode::fan_in;
  /// Gradient scope of the boundary diagnostic: one training batch
  /// (default) or the task's whole training set.
  bool diag_full_set = false;

  void validate() const;  // throws std::invalid_argument
};

/// Substream purposes for the run's PRNG. The stream id packs
/// (curriculum index, task index, purpose, sequence number) so every
/// consumer draws from its own independent stream.
enum class StreamPurpose : std::uint8_t {
  curriculum_build = 1,
  param_init = 2,
  train_data = 3,
  val_data = 4,
  shuffle = 5,
};

std::uint64_t make_stream(int curriculum_index, int task_index, StreamPurpose purpose,
                          std::uint32_t k = 0);

/// Fisher-Yates permutation of 0..n-1 driven by `rng`.
std::vector<std::size_t> epoch_permutation(std::size_t n, Rng rng);

struct TaskData {
  LabeledImageSet train;
  LabeledImageSet val;
};

/// Gratings datasets are generated from the curriculum's construction seed
/// (shared by every run seed); MNIST tasks slice the store, with the
/// canonical test split as validation.
std::vector<TaskData> materialize_datasets(const Curriculum& c, const TrainConfig& cfg,
                                           const MnistStore* store);

struct NetSnapshot {
  std::vector<double> theta;
  std::vector<double> bn_mean;
  std::vector<double> bn_var;
};

/// Full trace of one (curriculum, seed) run.
struct RunRecord {
  CurriculumId id;
  std::uint64_t seed = 0;
  int n_tasks = 0;

  // Per-epoch rows (subject to val_trace_stride). val and align hold
  // n_tasks entries per row; align is NaN for tasks without a snapshot yet.
  std::vector<int> rec_epoch;  // global epoch index, 0-based
  std::vector<int> rec_task;   // active task, 0-based
  std::vector<double> rec_val;
  std::vector<double> rec_grad_norm;  // mean over the epoch's batch gradient 2-norms
  std::vector<double> rec_align;

  std::vector<std::vector<double>> end_losses;  // [j][k] = L_k(theta_j)
  std::vector<FirstStepDiag> diags;             // one per task boundary
  std::vector<NetSnapshot> snapshots;           // theta_j + running stats

  bool aborted = false;
  std::string abort_reason;

  std::size_t n_records() const { return rec_epoch.size(); }
};

/// Sequential SGD over the curriculum's tasks: fresh init for task 1, then
/// each task starts from the previous snapshot (including running stats).
/// Epoch = one shuffled pass, batches of cfg.batch_size (a trailing
/// singleton is merged into the previous batch so training batches always
/// have >= 2 rows). Update: theta <- theta - lr * (g + weight_decay * theta).
/// A non-finite training loss aborts the run; the record up to that point is
/// returned with `aborted` set.
RunRecord train_curriculum(const Curriculum& c, const TrainConfig& cfg, std::uint64_t seed,
                           const MnistStore* store = nullptr);

/// Mean BCE of the network on a full set, eval-mode normalization.
double evaluate(const NetParams& p, const LabeledImageSet& set);

}  // namespace cflab
