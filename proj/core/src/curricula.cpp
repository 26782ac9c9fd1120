#include "cflab/curricula.hpp"

#include <cmath>
#include <stdexcept>

namespace cflab {

void ContrastingConfig::validate() const {
  if (positions.size() != 3)
    throw std::invalid_argument("contrasting config: expected 3 task positions");
  if (sigma2 < 0.0) throw std::invalid_argument("contrasting config: sigma2 must be >= 0");
  if (category_sep <= 0.0)
    throw std::invalid_argument("contrasting config: category separation must be > 0");
  const double sd = std::sqrt(sigma2);
  if (category_sep < 3.0 * sd)
    throw std::invalid_argument(
        "contrasting config: categories overlap in omega (mean gap below 3 sigma)");
}

std::pair<Curriculum, Curriculum> build_contrasting_curricula(const ContrastingConfig& cfg) {
  cfg.validate();
  const double half = 0.5 * cfg.category_sep;

  Curriculum semantic;
  semantic.id = {"exp1", 0};
  Curriculum perceptual;
  perceptual.id = {"exp1", 1};

  for (double pos : cfg.positions) {
    GratingTask s;  // decision boundary moves: omega midpoint at pos
    s.cat0 = {{pos - half, cfg.fixed_center}, cfg.sigma2};
    s.cat1 = {{pos + half, cfg.fixed_center}, cfg.sigma2};
    semantic.tasks.emplace_back(s);

    GratingTask p;  // boundary fixed at fixed_center, orientation at pos
    p.cat0 = {{cfg.fixed_center - half, pos}, cfg.sigma2};
    p.cat1 = {{cfg.fixed_center + half, pos}, cfg.sigma2};
    perceptual.tasks.emplace_back(p);
  }
  return {semantic, perceptual};
}

Curriculum build_random_curriculum(int index, double gamma,
                                   const std::optional<GratingTask>& fixed_first, Rng& rng,
                                   double sigma2) {
  if (gamma <= 0.0) throw std::invalid_argument("build_random_curriculum: gamma must be > 0");

  GratingTask task1;
  if (fixed_first) {
    task1 = *fixed_first;
  } else {
    Vec2 mu1{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    task1.cat0 = {mu1, sigma2};
    task1.cat1 = {{mu1.omega + kCategorySep, mu1.theta}, sigma2};
  }

  Vec2 dir;
  double len = 0.0;
  do {
    dir.omega = rng.uniform(-1.0, 1.0);
    dir.theta = rng.uniform(-1.0, 1.0);
    len = std::hypot(dir.omega, dir.theta);
  } while (len < 1e-9);
  dir.omega /= len;
  dir.theta /= len;

  GratingTask task2;
  task2.cat0 = {{task1.cat0.mean.omega + gamma * dir.omega, task1.cat0.mean.theta + gamma * dir.theta},
                sigma2};
  task2.cat1 = {{task1.cat1.mean.omega + gamma * dir.omega, task1.cat1.mean.theta + gamma * dir.theta},
                sigma2};

  Curriculum c;
  c.id = {"", index};
  c.tasks = {TaskSpec{task1}, TaskSpec{task2}};
  c.construction_seed = rng.seed();
  c.gamma = gamma;
  c.direction = dir;
  return c;
}

const GratingTask& grating_task(const Curriculum& c, std::size_t task_idx) {
  if (task_idx >= c.tasks.size())
    throw std::invalid_argument("grating_task: task index out of range");
  const auto* t = std::get_if<GratingTask>(&c.tasks[task_idx]);
  if (t == nullptr) throw std::invalid_argument("grating_task: not a grating curriculum");
  return *t;
}

std::pair<double, double> semantic_and_perceptual_distance(const Curriculum& c) {
  if (c.tasks.size() != 2)
    throw std::invalid_argument("semantic_and_perceptual_distance: need a 2-task curriculum");
  const GratingTask& t1 = grating_task(c, 0);
  const GratingTask& t2 = grating_task(c, 1);
  return {std::fabs(t2.cat0.mean.omega - t1.cat0.mean.omega),
          std::fabs(t2.cat0.mean.theta - t1.cat0.mean.theta)};
}

}  // namespace cflab
