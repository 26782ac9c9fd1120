#include "cflab/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cflab {

void TrainConfig::validate() const {
  if (lr < 0.0) throw std::invalid_argument("config: lr must be >= 0");
  if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
  if (epochs_per_task < 1) throw std::invalid_argument("config: epochs_per_task must be >= 1");
  if (n_train < 2) throw std::invalid_argument("config: n_train must be >= 2");
  if (n_val < 1) throw std::invalid_argument("config: n_val must be >= 1");
  if (val_trace_stride < 0) throw std::invalid_argument("config: val_trace_stride must be >= 0");
  if (seeds.empty()) throw std::invalid_argument("config: need at least one seed");
}

std::uint64_t make_stream(int curriculum_index, int task_index, StreamPurpose purpose,
                          std::uint32_t k) {
  return (static_cast<std::uint64_t>(curriculum_index + 1) << 40) |
         (static_cast<std::uint64_t>(task_index + 1) << 32) |
         (static_cast<std::uint64_t>(purpose) << 24) | k;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, Rng rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<TaskData> materialize_datasets(const Curriculum& c, const TrainConfig& cfg,
                                           const MnistStore* store) {
  std::vector<TaskData> out;
  out.reserve(c.tasks.size());
  for (std::size_t j = 0; j < c.tasks.size(); ++j) {
    TaskData td;
    if (const auto* g = std::get_if<GratingTask>(&c.tasks[j])) {
      Rng train_rng(c.construction_seed,
                    make_stream(c.id.index, static_cast<int>(j), StreamPurpose::train_data));
      Rng val_rng(c.construction_seed,
                  make_stream(c.id.index, static_cast<int>(j), StreamPurpose::val_data));
      td.train = sample_task_dataset(*g, static_cast<std::size_t>(cfg.n_train), train_rng,
                                     Role::train);
      td.val = sample_task_dataset(*g, static_cast<std::size_t>(cfg.n_val), val_rng,
                                   Role::validation);
    } else {
      if (store == nullptr)
        throw std::runtime_error("curriculum has MNIST tasks but no store was provided");
      const auto& m = std::get<MnistTask>(c.tasks[j]);
      td.train = mnist_task_images(*store, m, Role::train);
      td.val = mnist_task_images(*store, m, Role::validation);
    }
    out.push_back(std::move(td));
  }
  return out;
}

double evaluate(const NetParams& p, const LabeledImageSet& set) {
  if (set.size() == 0) throw std::invalid_argument("evaluate: empty set");
  ModelWorkspace ws;
  return eval_loss(p, set.images, set.labels, ws);
}

namespace {

// Batch row ranges over a permuted index list; a trailing singleton is
// folded into the previous batch.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t bs) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < n; start += bs)
    ranges.emplace_back(start, std::min(start + bs, n));
  if (ranges.size() > 1 && ranges.back().second - ranges.back().first == 1) {
    ranges.pop_back();
    ranges.back().second = n;
  }
  return ranges;
}

void gather_batch(const LabeledImageSet& set, const std::vector<std::size_t>& perm,
                  std::size_t begin, std::size_t end, Matrix& x, std::vector<std::uint8_t>& y) {
  const std::size_t b = end - begin;
  x.rows = b;
  x.cols = kImagePixels;
  x.data.resize(b * kImagePixels);
  y.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t src = perm[begin + i];
    const auto row = set.images.row(src);
    std::copy(row.begin(), row.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * kImagePixels));
    y[i] = set.labels[src];
  }
}

NetSnapshot snapshot_of(const NetParams& p) {
  return {p.theta, p.bn_mean, p.bn_var};
}

}  // namespace

RunRecord train_curriculum(const Curriculum& c, const TrainConfig& cfg, std::uint64_t seed,
                           const MnistStore* store) {
  cfg.validate();
  if (c.tasks.empty()) throw std::invalid_argument("train_curriculum: empty curriculum");

  const int n_tasks = static_cast<int>(c.tasks.size());
  const int epochs = cfg.epochs_per_task;
  const auto datasets = materialize_datasets(c, cfg, store);

  RunRecord rec;
  rec.id = c.id;
  rec.seed = seed;
  rec.n_tasks = n_tasks;

  Rng init_rng(seed, make_stream(c.id.index, 0, StreamPurpose::param_init));
  NetParams p = init_params(init_rng, cfg.init);

  ModelWorkspace ws;
  Matrix batch_x;
  std::vector<std::uint8_t> batch_y;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto record_epoch = [&](int task, int global_epoch, double grad_norm_mean) {
    rec.rec_epoch.push_back(global_epoch);
    rec.rec_task.push_back(task);
    rec.rec_grad_norm.push_back(grad_norm_mean);
    for (int k = 0; k < n_tasks; ++k)
      rec.rec_val.push_back(eval_loss(p, datasets[static_cast<std::size_t>(k)].val.images,
                                      datasets[static_cast<std::size_t>(k)].val.labels, ws));
    for (int k = 0; k < n_tasks; ++k)
      rec.rec_align.push_back(k < static_cast<int>(rec.snapshots.size())
                                  ? dot(rec.snapshots[static_cast<std::size_t>(k)].theta, p.theta)
                                  : nan);
  };

  for (int j = 0; j < n_tasks && !rec.aborted; ++j) {
    const auto& train = datasets[static_cast<std::size_t>(j)].train;
    const auto ranges = batch_ranges(train.size(), static_cast<std::size_t>(cfg.batch_size));

    for (int epoch = 0; epoch < epochs && !rec.aborted; ++epoch) {
      Rng shuffle_rng(seed, make_stream(c.id.index, j, StreamPurpose::shuffle,
                                        static_cast<std::uint32_t>(epoch)));
      const auto perm = epoch_permutation(train.size(), shuffle_rng);

      double grad_norm_acc = 0.0;
      for (const auto& [begin, end] : ranges) {
        gather_batch(train, perm, begin, end, batch_x, batch_y);
        const double loss = loss_and_grad(p, batch_x, batch_y, /*training=*/true, ws);
        if (!std::isfinite(loss)) {
          rec.aborted = true;
          rec.abort_reason = "non-finite training loss (task " + std::to_string(j + 1) +
                             ", epoch " + std::to_string(epoch) + ")";
          break;
        }
        grad_norm_acc += norm2(ws.grad);
        if (cfg.weight_decay != 0.0) {
          for (int i = 0; i < kParamCount; ++i)
            p.theta[static_cast<std::size_t>(i)] -=
                cfg.lr * (ws.grad[static_cast<std::size_t>(i)] +
                          cfg.weight_decay * p.theta[static_cast<std::size_t>(i)]);
        } else {
          for (int i = 0; i < kParamCount; ++i)
            p.theta[static_cast<std::size_t>(i)] -= cfg.lr * ws.grad[static_cast<std::size_t>(i)];
        }
      }
      if (rec.aborted) break;

      const bool record = cfg.val_trace_stride > 0 && (epoch % cfg.val_trace_stride) == cfg.val_trace_stride - 1;
      if (record)
        record_epoch(j, j * epochs + epoch, grad_norm_acc / static_cast<double>(ranges.size()));
    }
    if (rec.aborted) break;

    rec.snapshots.push_back(snapshot_of(p));
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(n_tasks));
    for (int k = 0; k < n_tasks; ++k)
      losses.push_back(eval_loss(p, datasets[static_cast<std::size_t>(k)].val.images,
                                 datasets[static_cast<std::size_t>(k)].val.labels, ws));
    rec.end_losses.push_back(std::move(losses));

    if (j + 1 < n_tasks) {
      const auto& next = datasets[static_cast<std::size_t>(j) + 1].train;
      const auto& prev = train;
      Matrix xn, xp;
      std::vector<std::uint8_t> yn, yp;
      if (cfg.diag_full_set) {
        xn = next.images;
        yn = next.labels;
        xp = prev.images;
        yp = prev.labels;
      } else {
        // The exact batch the first update of the next task will use, and the
        // batch the previous task's next epoch would have used.
        const auto bs = static_cast<std::size_t>(cfg.batch_size);
        Rng next_rng(seed, make_stream(c.id.index, j + 1, StreamPurpose::shuffle, 0));
        const auto next_perm = epoch_permutation(next.size(), next_rng);
        gather_batch(next, next_perm, 0, std::min(bs, next.size()), xn, yn);
        Rng prev_rng(seed, make_stream(c.id.index, j, StreamPurpose::shuffle,
                                       static_cast<std::uint32_t>(epochs)));
        const auto prev_perm = epoch_permutation(prev.size(), prev_rng);
        gather_batch(prev, prev_perm, 0, std::min(bs, prev.size()), xp, yp);
      }
      rec.diags.push_back(first_step_diag(p, xn, yn, xp, yp));
    }
  }
  return rec;
}

}  // namespace cflab
