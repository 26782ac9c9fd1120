#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "cflab/training.hpp"

using namespace cflab;

namespace {

Curriculum tiny_grating_curriculum(int index = 0, double gamma = 0.25) {
  Rng rng(static_cast<std::uint64_t>(index),
          make_stream(index, 0, StreamPurpose::curriculum_build));
  auto c = build_random_curriculum(index, gamma, std::nullopt, rng);
  c.id.experiment = "test";
  return c;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs_per_task = 3;
  cfg.n_train = 48;
  cfg.n_val = 24;
  cfg.batch_size = 16;
  cfg.seeds = {0};
  return cfg;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero learning rate leaves parameters at initialization") {
  const auto c = tiny_grating_curriculum();
  auto cfg = tiny_config();
  cfg.lr = 0.0;
  const auto rec = train_curriculum(c, cfg, 0);
  Rng init_rng(0, make_stream(c.id.index, 0, StreamPurpose::param_init));
  const auto p0 = init_params(init_rng);
  REQUIRE(rec.snapshots.size() == 2);
  CHECK(rec.snapshots[0].theta == p0.theta);
  CHECK(rec.snapshots[1].theta == p0.theta);
  // running stats still updated by the forward passes
  CHECK(rec.snapshots[0].bn_var != p0.bn_var);
}

TEST_CASE("one SGD step is exactly theta - lr * g") {
  const auto c = tiny_grating_curriculum(1);
  TrainConfig cfg = tiny_config();
  cfg.epochs_per_task = 1;
  cfg.batch_size = cfg.n_train;  // single batch per epoch

  const auto rec = train_curriculum(c, cfg, 3);

  // Reproduce the step by hand from the same streams.
  const auto data = materialize_datasets(c, cfg, nullptr);
  Rng init_rng(3, make_stream(c.id.index, 0, StreamPurpose::param_init));
  auto p = init_params(init_rng);
  const auto perm =
      epoch_permutation(data[0].train.size(), Rng(3, make_stream(c.id.index, 0, StreamPurpose::shuffle, 0)));
  Matrix x(data[0].train.size(), kImagePixels);
  std::vector<std::uint8_t> y(data[0].train.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto row = data[0].train.images.row(perm[i]);
    std::copy(row.begin(), row.end(), x.row(i).begin());
    y[i] = data[0].train.labels[perm[i]];
  }
  const auto bw = backward(p, x, y, true);
  for (int i = 0; i < kParamCount; ++i) {
    const double expected = p.theta[static_cast<std::size_t>(i)] - cfg.lr * bw.grad[static_cast<std::size_t>(i)];
    REQUIRE(std::fabs(rec.snapshots[0].theta[static_cast<std::size_t>(i)] - expected) <= 1e-15);
  }
}

TEST_CASE("task 2 training starts from the task 1 snapshot") {
  const auto c = tiny_grating_curriculum(2);
  TrainConfig cfg = tiny_config();
  cfg.epochs_per_task = 1;
  cfg.batch_size = cfg.n_train;
  const auto rec = train_curriculum(c, cfg, 1);

  // replay task 2's only step starting from snapshot 1
  const auto data = materialize_datasets(c, cfg, nullptr);
  NetParams p;
  p.theta = rec.snapshots[0].theta;
  p.bn_mean = rec.snapshots[0].bn_mean;
  p.bn_var = rec.snapshots[0].bn_var;
  const auto perm =
      epoch_permutation(data[1].train.size(), Rng(1, make_stream(c.id.index, 1, StreamPurpose::shuffle, 0)));
  Matrix x(data[1].train.size(), kImagePixels);
  std::vector<std::uint8_t> y(data[1].train.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto row = data[1].train.images.row(perm[i]);
    std::copy(row.begin(), row.end(), x.row(i).begin());
    y[i] = data[1].train.labels[perm[i]];
  }
  const auto bw = backward(p, x, y, true);
  for (int i = 0; i < kParamCount; ++i) {
    const double expected = rec.snapshots[0].theta[static_cast<std::size_t>(i)] -
                            cfg.lr * bw.grad[static_cast<std::size_t>(i)];
    REQUIRE(std::fabs(rec.snapshots[1].theta[static_cast<std::size_t>(i)] - expected) <= 1e-15);
  }
}

TEST_CASE("weight decay enters the update as an additive L2 term") {
  const auto c = tiny_grating_curriculum(3);
  TrainConfig cfg = tiny_config();
  cfg.epochs_per_task = 1;
  cfg.batch_size = cfg.n_train;
  cfg.weight_decay = 0.5;
  const auto rec = train_curriculum(c, cfg, 2);

  const auto data = materialize_datasets(c, cfg, nullptr);
  Rng init_rng(2, make_stream(c.id.index, 0, StreamPurpose::param_init));
  auto p = init_params(init_rng);
  const auto perm =
      epoch_permutation(data[0].train.size(), Rng(2, make_stream(c.id.index, 0, StreamPurpose::shuffle, 0)));
  Matrix x(data[0].train.size(), kImagePixels);
  std::vector<std::uint8_t> y(data[0].train.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto row = data[0].train.images.row(perm[i]);
    std::copy(row.begin(), row.end(), x.row(i).begin());
    y[i] = data[0].train.labels[perm[i]];
  }
  const auto bw = backward(p, x, y, true);
  for (int i = 0; i < kParamCount; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double expected = p.theta[ui] - cfg.lr * (bw.grad[ui] + 0.5 * p.theta[ui]);
    REQUIRE(std::fabs(rec.snapshots[0].theta[ui] - expected) <= 1e-15);
  }
}

TEST_CASE("trace shape covers every epoch and every task from the start") {
  const auto c = tiny_grating_curriculum(4);
  const auto cfg = tiny_config();
  const auto rec = train_curriculum(c, cfg, 0);
  const auto total = static_cast<std::size_t>(2 * cfg.epochs_per_task);
  REQUIRE(rec.n_records() == total);
  REQUIRE(rec.rec_val.size() == total * 2);
  for (double v : rec.rec_val) CHECK(std::isfinite(v));
  // alignment: NaN until the snapshot exists
  CHECK(std::isnan(rec.rec_align[0]));
  const auto last = (total - 1) * 2;
  CHECK(std::isfinite(rec.rec_align[last + 0]));  // task 1 snapshot exists in task 2
  CHECK(std::isnan(rec.rec_align[last + 1]));     // task 2 completes after the last record
  for (std::size_t r = 0; r < total; ++r) {
    CHECK(rec.rec_epoch[r] == static_cast<int>(r));
    CHECK(rec.rec_task[r] == (r < total / 2 ? 0 : 1));
  }
  CHECK(rec.end_losses.size() == 2);
  CHECK(rec.end_losses[0].size() == 2);
  CHECK(rec.diags.size() == 1);
}

TEST_CASE("trace stride thins the records; stride 0 keeps only boundaries") {
  const auto c = tiny_grating_curriculum(5);
  auto cfg = tiny_config();
  cfg.epochs_per_task = 6;
  cfg.val_trace_stride = 3;
  const auto rec = train_curriculum(c, cfg, 0);
  REQUIRE(rec.n_records() == 4);  // epochs 2, 5 within each task
  CHECK(rec.rec_epoch[0] == 2);
  CHECK(rec.rec_epoch[1] == 5);

  cfg.val_trace_stride = 0;
  const auto rec0 = train_curriculum(c, cfg, 0);
  CHECK(rec0.n_records() == 0);
  CHECK(rec0.end_losses.size() == 2);
}

TEST_CASE("runs are bit-identical across invocations") {
  const auto c = tiny_grating_curriculum(6);
  const auto cfg = tiny_config();
  const auto a = train_curriculum(c, cfg, 5);
  const auto b = train_curriculum(c, cfg, 5);
  CHECK(a.rec_val == b.rec_val);
  CHECK(a.rec_grad_norm == b.rec_grad_norm);
  CHECK(a.snapshots[1].theta == b.snapshots[1].theta);
  CHECK(a.end_losses == b.end_losses);
  CHECK(a.diags[0].gnew_inf == b.diags[0].gnew_inf);
}

TEST_CASE("boundary diagnostic equals the first batch gradient at the snapshot") {
  const auto c = tiny_grating_curriculum(7);
  const auto cfg = tiny_config();
  const auto rec = train_curriculum(c, cfg, 4);

  const auto data = materialize_datasets(c, cfg, nullptr);
  NetParams p;
  p.theta = rec.snapshots[0].theta;
  p.bn_mean = rec.snapshots[0].bn_mean;
  p.bn_var = rec.snapshots[0].bn_var;
  const auto perm =
      epoch_permutation(data[1].train.size(), Rng(4, make_stream(c.id.index, 1, StreamPurpose::shuffle, 0)));
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  Matrix x(bs, kImagePixels);
  std::vector<std::uint8_t> y(bs);
  for (std::size_t i = 0; i < bs; ++i) {
    const auto row = data[1].train.images.row(perm[i]);
    std::copy(row.begin(), row.end(), x.row(i).begin());
    y[i] = data[1].train.labels[perm[i]];
  }
  const auto bw = backward_eval(p, x, y);
  CHECK(rec.diags[0].gnew_inf == norm_inf(bw.grad));
  CHECK(rec.diags[0].gnew_norm2 == norm2(bw.grad));
  CHECK(rec.diags[0].fisher_diag_max ==
        doctest::Approx(rec.diags[0].gnew_inf * rec.diags[0].gnew_inf).epsilon(1e-15));
}

TEST_CASE("evaluate: zero-parameter network scores ln 2 and ignores row order") {
  const auto c = tiny_grating_curriculum(8);
  const auto data = materialize_datasets(c, tiny_config(), nullptr);
  NetParams p;
  CHECK(evaluate(p, data[0].val) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng prng(21, 0);
  const auto trained = init_params(prng);
  LabeledImageSet shuffled = data[0].val;
  const auto perm = epoch_permutation(shuffled.size(), Rng(99, 1));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy(data[0].val.images.row(perm[i]).begin(), data[0].val.images.row(perm[i]).end(),
              shuffled.images.row(i).begin());
    shuffled.labels[i] = data[0].val.labels[perm[i]];
  }
  CHECK(evaluate(trained, shuffled) == doctest::Approx(evaluate(trained, data[0].val)).epsilon(1e-12));

  LabeledImageSet empty;
  CHECK_THROWS_AS(evaluate(p, empty), std::invalid_argument);
}

TEST_CASE("divergent training aborts with the record preserved") {
  const auto c = tiny_grating_curriculum(9);
  TrainConfig cfg = tiny_config();
  cfg.epochs_per_task = 4000;
  cfg.batch_size = cfg.n_train;
  cfg.lr = 1.0;
  cfg.weight_decay = 4.0;  // |1 - lr*wd| = 3: parameters diverge geometrically
  cfg.val_trace_stride = 0;
  const auto rec = train_curriculum(c, cfg, 0);
  CHECK(rec.aborted);
  CHECK(!rec.abort_reason.empty());
  CHECK(rec.end_losses.size() < 2);
}

TEST_CASE("mnist curricula refuse to train without a store") {
  Curriculum c;
  c.id = {"exp4", 0};
  c.tasks = {TaskSpec{MnistTask{0, 1}}, TaskSpec{MnistTask{2, 3}}};
  CHECK_THROWS_AS(train_curriculum(c, tiny_config(), 0, nullptr), std::runtime_error);
}

}  // TEST_SUITE
