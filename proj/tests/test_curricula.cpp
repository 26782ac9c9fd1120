#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "cflab/curricula.hpp"
#include "cflab/training.hpp"

using namespace cflab;

TEST_SUITE("curricula") {

TEST_CASE("contrasting curricula vary exactly one latent dimension") {
  const ContrastingConfig cfg;
  const auto [semantic, perceptual] = build_contrasting_curricula(cfg);
  REQUIRE(semantic.tasks.size() == 3);
  REQUIRE(perceptual.tasks.size() == 3);

  for (std::size_t j = 0; j < 3; ++j) {
    const auto& s = std::get<GratingTask>(semantic.tasks[j]);
    const auto& p = std::get<GratingTask>(perceptual.tasks[j]);
    // perceptual: omega means identical across tasks, centred on fixed_center
    CHECK(p.cat0.mean.omega == cfg.fixed_center - cfg.category_sep / 2);
    CHECK(p.cat1.mean.omega == cfg.fixed_center + cfg.category_sep / 2);
    CHECK(p.cat0.mean.theta == cfg.positions[j]);
    CHECK(p.cat1.mean.theta == cfg.positions[j]);
    // semantic: theta means identical across tasks
    CHECK(s.cat0.mean.theta == cfg.fixed_center);
    CHECK(s.cat1.mean.theta == cfg.fixed_center);
    CHECK(s.cat0.mean.omega == doctest::Approx(cfg.positions[j] - cfg.category_sep / 2));
    CHECK(s.cat1.mean.omega == doctest::Approx(cfg.positions[j] + cfg.category_sep / 2));
    // same per-task position along the varying dimension in both curricula
    CHECK((s.cat0.mean.omega + s.cat1.mean.omega) / 2 == doctest::Approx(p.cat0.mean.theta));
  }
}

TEST_CASE("contrasting config validation rejects overlapping categories") {
  ContrastingConfig cfg;
  cfg.sigma2 = 0.01;  // 3 sigma = 0.3 > category separation 0.2
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.sigma2 = kDefaultSigma2;
  CHECK_NOTHROW(cfg.validate());
  cfg.positions = {0.3, 0.5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("random curricula keep category separation and task distance exact") {
  for (int i = 0; i < 30; ++i) {
    Rng rng(static_cast<std::uint64_t>(i), make_stream(i, 0, StreamPurpose::curriculum_build));
    const auto c = build_random_curriculum(i, 0.25, std::nullopt, rng);
    const auto& t1 = grating_task(c, 0);
    const auto& t2 = grating_task(c, 1);

    CHECK(t1.cat1.mean.omega - t1.cat0.mean.omega == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(t1.cat1.mean.theta == t1.cat0.mean.theta);
    CHECK(t2.cat1.mean.omega - t2.cat0.mean.omega == doctest::Approx(0.2).epsilon(1e-15));

    const double dist = std::hypot(t2.cat0.mean.omega - t1.cat0.mean.omega,
                                   t2.cat0.mean.theta - t1.cat0.mean.theta);
    CHECK(dist == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::hypot(c.direction->omega, c.direction->theta) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(t1.cat0.mean.omega >= 0.2);
    CHECK(t1.cat0.mean.omega <= 0.8);
    CHECK(t1.cat0.mean.theta >= 0.2);
    CHECK(t1.cat0.mean.theta <= 0.8);
  }
}

TEST_CASE("construction is reproducible bit-exactly") {
  for (int i = 0; i < 30; ++i) {
    Rng r1(static_cast<std::uint64_t>(i), make_stream(i, 0, StreamPurpose::curriculum_build));
    Rng r2(static_cast<std::uint64_t>(i), make_stream(i, 0, StreamPurpose::curriculum_build));
    const auto a = build_random_curriculum(i, 0.25, std::nullopt, r1);
    const auto b = build_random_curriculum(i, 0.25, std::nullopt, r2);
    CHECK(grating_task(a, 0).cat0.mean.omega == grating_task(b, 0).cat0.mean.omega);
    CHECK(a.direction->omega == b.direction->omega);
    CHECK(a.direction->theta == b.direction->theta);
  }
}

TEST_CASE("golden latents for the first curricula") {
  // Pinned from the first generation; guards the draw-order contract.
  Rng r0(0, make_stream(0, 0, StreamPurpose::curriculum_build));
  const auto c0 = build_random_curriculum(0, 0.25, std::nullopt, r0);
  CHECK(grating_task(c0, 0).cat0.mean.omega == doctest::Approx(0.27818182220093696).epsilon(1e-15));
  CHECK(grating_task(c0, 0).cat0.mean.theta == doctest::Approx(0.40520141115843578).epsilon(1e-15));
  CHECK(c0.direction->omega == doctest::Approx(0.44990365653486447).epsilon(1e-15));
  CHECK(c0.direction->theta == doctest::Approx(0.89307709624452836).epsilon(1e-15));

  Rng r1(1, make_stream(1, 0, StreamPurpose::curriculum_build));
  const auto c1 = build_random_curriculum(1, 0.25, std::nullopt, r1);
  CHECK(grating_task(c1, 0).cat0.mean.omega == doctest::Approx(0.55915949719512015).epsilon(1e-15));
  CHECK(c1.direction->omega == doctest::Approx(-0.82713525353778983).epsilon(1e-15));
}

TEST_CASE("fixed first task is shared bit-exactly") {
  Rng r0(0, make_stream(0, 0, StreamPurpose::curriculum_build));
  const auto c0 = build_random_curriculum(0, 0.25, std::nullopt, r0);
  const GratingTask first = grating_task(c0, 0);
  for (int i = 1; i < 5; ++i) {
    Rng ri(static_cast<std::uint64_t>(i), make_stream(i, 0, StreamPurpose::curriculum_build));
    const auto ci = build_random_curriculum(i, 0.25, first, ri);
    const auto& t1 = grating_task(ci, 0);
    CHECK(t1.cat0.mean.omega == first.cat0.mean.omega);
    CHECK(t1.cat0.mean.theta == first.cat0.mean.theta);
    CHECK(t1.cat1.mean.omega == first.cat1.mean.omega);
  }
}

TEST_CASE("semantic and perceptual distances") {
  auto make = [](Vec2 d) {
    Curriculum c;
    GratingTask t1, t2;
    t1.cat0 = {{0.4, 0.5}, kDefaultSigma2};
    t1.cat1 = {{0.6, 0.5}, kDefaultSigma2};
    t2.cat0 = {{0.4 + 0.25 * d.omega, 0.5 + 0.25 * d.theta}, kDefaultSigma2};
    t2.cat1 = {{0.6 + 0.25 * d.omega, 0.5 + 0.25 * d.theta}, kDefaultSigma2};
    c.tasks = {TaskSpec{t1}, TaskSpec{t2}};
    c.gamma = 0.25;
    c.direction = d;
    return c;
  };
  auto [dw1, dt1] = semantic_and_perceptual_distance(make({1.0, 0.0}));
  CHECK(dw1 == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(dt1 == 0.0);
  auto [dw2, dt2] = semantic_and_perceptual_distance(make({0.0, 1.0}));
  CHECK(dw2 == 0.0);
  CHECK(dt2 == doctest::Approx(0.25).epsilon(1e-15));

  // unit direction: dw^2 + dt^2 = gamma^2 over random curricula
  for (int i = 0; i < 20; ++i) {
    Rng rng(static_cast<std::uint64_t>(i), make_stream(i, 0, StreamPurpose::curriculum_build));
    const auto c = build_random_curriculum(i, 0.25, std::nullopt, rng);
    const auto [dw, dt] = semantic_and_perceptual_distance(c);
    CHECK(dw * dw + dt * dt == doctest::Approx(0.25 * 0.25).epsilon(1e-12));
  }
}

TEST_CASE("distance helper rejects non-grating and 3-task curricula") {
  Curriculum mnist_c;
  mnist_c.tasks = {TaskSpec{MnistTask{0, 1}}, TaskSpec{MnistTask{2, 3}}};
  CHECK_THROWS_AS(semantic_and_perceptual_distance(mnist_c), std::invalid_argument);
  const auto [semantic, perceptual] = build_contrasting_curricula(ContrastingConfig{});
  CHECK_THROWS_AS(semantic_and_perceptual_distance(semantic), std::invalid_argument);
}

TEST_CASE("rejects non-positive gamma") {
  Rng rng(0, 0);
  CHECK_THROWS_AS(build_random_curriculum(0, 0.0, std::nullopt, rng), std::invalid_argument);
}

}  // TEST_SUITE
