#include "cflab/gratings.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cflab {

std::array<double, kImagePixels> render_grating(const GratingParams& p) {
  std::array<double, kImagePixels> img;
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  for (int y = 0; y < kImageSide; ++y) {
    for (int x = 0; x < kImageSide; ++x) {
      img[static_cast<std::size_t>(y) * kImageSide + x] =
          std::sin(p.omega * (x * c + y * s - p.phi));
    }
  }
  return img;
}

LabeledImageSet sample_task_dataset(const GratingTask& task, std::size_t n, Rng& rng, Role role) {
  if (n < 1) throw std::invalid_argument("sample_task_dataset: n must be >= 1");
  if (task.cat0.sigma2 != task.cat1.sigma2)
    throw std::invalid_argument("sample_task_dataset: categories must share sigma2");
  const double sd = std::sqrt(task.cat0.sigma2);

  LabeledImageSet set;
  set.role = role;
  set.images = Matrix(n, kImagePixels);
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = rng.bernoulli(0.5);
    const Category& cat = y ? task.cat1 : task.cat0;
    GratingParams gp;
    gp.omega = rng.gaussian(cat.mean.omega, sd);
    gp.theta = rng.gaussian(cat.mean.theta, sd);
    gp.phi = rng.uniform();
    const auto img = render_grating(gp);
    std::memcpy(set.images.row(i).data(), img.data(), sizeof(img));
    set.labels[i] = y ? 1 : 0;
  }
  return set;
}

namespace {
static_assert(std::endian::native == std::endian::little,
              "image-set dump assumes a little-endian host");
}

void write_image_set(const LabeledImageSet& set, const std::filesystem::path& path,
                     std::uint64_t seed) {
  nlohmann::json header = {
      {"n", set.size()},
      {"width", kImageSide},
      {"height", kImageSide},
      {"role", set.role == Role::train ? "train" : "validation"},
      {"seed", seed},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_image_set: cannot open " + path.string());
  out << header.dump() << '\n';
  std::vector<float> row(kImagePixels);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto src = set.images.row(i);
    for (int j = 0; j < kImagePixels; ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(src[static_cast<std::size_t>(j)]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  out.write(reinterpret_cast<const char*>(set.labels.data()), static_cast<std::streamsize>(set.labels.size()));
  if (!out) throw std::runtime_error("write_image_set: short write to " + path.string());
}

LabeledImageSet read_image_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_image_set: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_image_set: missing header");
  const auto header = nlohmann::json::parse(line);
  const auto n = header.at("n").get<std::size_t>();
  if (header.at("width").get<int>() != kImageSide || header.at("height").get<int>() != kImageSide)
    throw std::runtime_error("read_image_set: unsupported image size");

  LabeledImageSet set;
  set.role = header.at("role").get<std::string>() == "train" ? Role::train : Role::validation;
  set.images = Matrix(n, kImagePixels);
  set.labels.resize(n);
  std::vector<float> row(kImagePixels);
  for (std::size_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    auto dst = set.images.row(i);
    for (int j = 0; j < kImagePixels; ++j) dst[static_cast<std::size_t>(j)] = row[static_cast<std::size_t>(j)];
  }
  in.read(reinterpret_cast<char*>(set.labels.data()), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("read_image_set: truncated payload in " + path.string());
  return set;
}

}  // namespace cflab
