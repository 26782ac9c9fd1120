#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "cflab/curricula.hpp"
#include "cflab/gratings.hpp"
#include "test_support.hpp"

using namespace cflab;

TEST_SUITE("gratings") {

TEST_CASE("zero frequency renders a blank image") {
  const auto img = render_grating({0.0, 0.7, 0.3});
  for (double v : img) CHECK(v == 0.0);
}

TEST_CASE("axis-aligned quarter-cycle pattern") {
  // theta = 0, omega = pi/2, phi = 0: value depends on x only, cycling 0, 1, 0, -1.
  const auto img = render_grating({M_PI / 2.0, 0.0, 0.0});
  for (int y = 0; y < kImageSide; ++y) {
    CHECK(img[static_cast<std::size_t>(y) * 16 + 0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(img[static_cast<std::size_t>(y) * 16 + 1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::fabs(img[static_cast<std::size_t>(y) * 16 + 2]) < 1e-9);
    CHECK(img[static_cast<std::size_t>(y) * 16 + 3] == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("full image matches scalar-at-a-time evaluation") {
  const GratingParams p{0.55, 0.30, 0.25};
  const auto img = render_grating(p);
  for (int y = 0; y < kImageSide; ++y) {
    for (int x = 0; x < kImageSide; ++x) {
      const double expected =
          std::sin(p.omega * (x * std::cos(p.theta) + y * std::sin(p.theta) - p.phi));
      REQUIRE(img[static_cast<std::size_t>(y) * 16 + x] == expected);
    }
  }
}

TEST_CASE("renderer output stays within [-1, 1] for wild latents") {
  Rng rng(41, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const GratingParams p{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform()};
    for (double v : render_grating(p)) {
      REQUIRE(v >= -1.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("degenerate categories: images depend on phi alone, labels carry nothing") {
  GratingTask task;
  task.cat0 = {{0.5, 0.5}, 0.0};
  task.cat1 = {{0.5, 0.5}, 0.0};
  Rng rng(42, 7);
  const auto set = sample_task_dataset(task, 32, rng, Role::train);

  // Replay the documented draw order to reconstruct every row independently.
  Rng replay(42, 7);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const bool y = replay.bernoulli(0.5);
    const double omega = replay.gaussian(0.5, 0.0);
    const double theta = replay.gaussian(0.5, 0.0);
    const double phi = replay.uniform();
    CHECK(set.labels[i] == (y ? 1 : 0));
    const auto expected = render_grating({omega, theta, phi});
    const auto row = set.images.row(i);
    for (int j = 0; j < kImagePixels; ++j)
      REQUIRE(row[static_cast<std::size_t>(j)] == expected[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("latent draws concentrate around the category mean") {
  GratingTask task;
  task.cat0 = {{0.3, 0.5}, 0.05};
  task.cat1 = {{0.5, 0.5}, 0.05};
  Rng rng(1, 1);
  const auto set = sample_task_dataset(task, 1000, rng, Role::train);

  // Replay to recover the latent omegas by label.
  Rng replay(1, 1);
  double sum0 = 0.0;
  int n0 = 0, n1 = 0;
  const double sd = std::sqrt(0.05);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const bool y = replay.bernoulli(0.5);
    const double omega = replay.gaussian(y ? 0.5 : 0.3, sd);
    replay.gaussian(0.5, sd);
    replay.uniform();
    if (!y) {
      sum0 += omega;
      ++n0;
    } else {
      ++n1;
    }
  }
  CHECK(std::fabs(sum0 / n0 - 0.3) < 4.0 * std::sqrt(0.05 / 500.0));
  CHECK(std::fabs(static_cast<double>(n1) / 1000.0 - 0.5) < 0.05);
}

TEST_CASE("sampling is deterministic in (task, n, seed, stream)") {
  GratingTask task;
  task.cat0 = {{0.3, 0.4}, kDefaultSigma2};
  task.cat1 = {{0.5, 0.4}, kDefaultSigma2};
  Rng r1(9, 4), r2(9, 4);
  const auto a = sample_task_dataset(task, 64, r1, Role::validation);
  const auto b = sample_task_dataset(task, 64, r2, Role::validation);
  CHECK(a.labels == b.labels);
  CHECK(a.images.data == b.images.data);
}

TEST_CASE("omega threshold separates degenerate categories in latent space") {
  // sanity oracle on latents: with sigma2 = 0, a threshold between the two
  // omega means classifies every draw.
  GratingTask task;
  task.cat0 = {{0.3, 0.5}, 0.0};
  task.cat1 = {{0.5, 0.5}, 0.0};
  Rng replay(13, 2);
  for (int i = 0; i < 256; ++i) {
    const bool y = replay.bernoulli(0.5);
    const double omega = replay.gaussian(y ? 0.5 : 0.3, 0.0);
    replay.gaussian(0.5, 0.0);
    replay.uniform();
    CHECK((omega > 0.4) == y);
  }
}

TEST_CASE("image-set dump round-trips through the documented format") {
  GratingTask task;
  task.cat0 = {{0.35, 0.45}, kDefaultSigma2};
  task.cat1 = {{0.55, 0.45}, kDefaultSigma2};
  Rng rng(5, 5);
  const auto set = sample_task_dataset(task, 17, rng, Role::validation);
  const auto dir = testsupport::scratch_dir("imgset");
  const auto file = dir / "set.bin";
  write_image_set(set, file, 1234);
  const auto back = read_image_set(file);
  CHECK(back.size() == set.size());
  CHECK(back.role == Role::validation);
  CHECK(back.labels == set.labels);
  for (std::size_t i = 0; i < set.images.data.size(); ++i)
    CHECK(back.images.data[i] == static_cast<double>(static_cast<float>(set.images.data[i])));
  std::filesystem::remove_all(dir);
}

TEST_CASE("sampling rejects n = 0 and mismatched sigma") {
  GratingTask task;
  task.cat0 = {{0.3, 0.5}, 0.01};
  task.cat1 = {{0.5, 0.5}, 0.02};
  Rng rng(1, 0);
  CHECK_THROWS_AS(sample_task_dataset(task, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_task_dataset(task, 4, rng), std::invalid_argument);
}

}  // TEST_SUITE
