#include "cflab/mnist.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace cflab {

namespace {

constexpr std::uint32_t kLabelMagic = 0x00000801;
constexpr std::uint32_t kImageMagic = 0x00000803;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t off) {
  return (static_cast<std::uint32_t>(bytes[off]) << 24) |
         (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[off + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[off + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IdxFormatError("idx: truncated magic", bytes.size());
  const std::uint32_t magic = read_be32(bytes, 0);
  std::size_t ndims = 0;
  if (magic == kLabelMagic) {
    ndims = 1;
  } else if (magic == kImageMagic) {
    ndims = 3;
  } else {
    throw IdxFormatError("idx: bad magic", 0);
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header) throw IdxFormatError("idx: truncated dimension header", bytes.size());

  IdxTensor t;
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    const std::uint32_t dim = read_be32(bytes, 4 + 4 * d);
    t.dims.push_back(dim);
    if (dim != 0 && total > std::numeric_limits<std::size_t>::max() / dim)
      throw IdxFormatError("idx: dimension product overflows", 4 + 4 * d);
    total *= dim;
  }
  if (bytes.size() - header != total)
    throw IdxFormatError("idx: payload length does not match dimensions", header);
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return t;
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& t) {
  if (t.dims.size() != 1 && t.dims.size() != 3)
    throw std::invalid_argument("encode_idx: only 1D and 3D byte tensors");
  std::vector<std::uint8_t> out;
  write_be32(out, t.dims.size() == 1 ? kLabelMagic : kImageMagic);
  std::size_t total = 1;
  for (std::uint32_t d : t.dims) {
    write_be32(out, d);
    total *= d;
  }
  if (total != t.data.size()) throw std::invalid_argument("encode_idx: dims do not match payload");
  out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

IdxTensor load_idx_file(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::array<std::uint8_t, 1 << 16> buf;
  int n = 0;
  while ((n = gzread(f, buf.data(), buf.size())) > 0)
    bytes.insert(bytes.end(), buf.begin(), buf.begin() + n);
  const bool read_error = n < 0;
  gzclose(f);
  if (read_error) throw std::runtime_error("read error in " + path.string());
  return parse_idx(bytes);
}

namespace {

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& base) {
  for (const auto& name : {base, base + ".gz"}) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) return p;
  }
  throw std::runtime_error("missing MNIST file " + (dir / base).string() + "[.gz]");
}

void check_pair(const IdxTensor& images, const IdxTensor& labels, const char* which) {
  if (images.dims.size() != 3 || images.dims[1] != kMnistSide || images.dims[2] != kMnistSide)
    throw std::runtime_error(std::string(which) + ": expected Nx28x28 images");
  if (labels.dims.size() != 1 || labels.dims[0] != images.dims[0])
    throw std::runtime_error(std::string(which) + ": image/label counts differ");
  for (std::uint8_t l : labels.data)
    if (l > 9) throw std::runtime_error(std::string(which) + ": label out of range");
}

}  // namespace

MnistStore MnistStore::load(const std::filesystem::path& dir) {
  return from_tensors(load_idx_file(find_idx(dir, "train-images-idx3-ubyte")),
                      load_idx_file(find_idx(dir, "train-labels-idx1-ubyte")),
                      load_idx_file(find_idx(dir, "t10k-images-idx3-ubyte")),
                      load_idx_file(find_idx(dir, "t10k-labels-idx1-ubyte")));
}

MnistStore MnistStore::from_tensors(IdxTensor train_images, IdxTensor train_labels,
                                    IdxTensor test_images, IdxTensor test_labels) {
  check_pair(train_images, train_labels, "train");
  check_pair(test_images, test_labels, "test");
  MnistStore s;
  s.train_images_ = std::move(train_images.data);
  s.train_labels_ = std::move(train_labels.data);
  s.test_images_ = std::move(test_images.data);
  s.test_labels_ = std::move(test_labels.data);
  s.index_digits();
  return s;
}

void MnistStore::index_digits() {
  for (std::size_t i = 0; i < train_labels_.size(); ++i)
    train_by_digit_[train_labels_[i]].push_back(i);
  for (std::size_t i = 0; i < test_labels_.size(); ++i)
    test_by_digit_[test_labels_[i]].push_back(i);
}

std::span<const std::uint8_t> MnistStore::train_image(std::size_t i) const {
  return {train_images_.data() + i * kMnistSide * kMnistSide, kMnistSide * kMnistSide};
}

std::span<const std::uint8_t> MnistStore::test_image(std::size_t i) const {
  return {test_images_.data() + i * kMnistSide * kMnistSide, kMnistSide * kMnistSide};
}

const std::vector<std::size_t>& MnistStore::train_indices_of(int digit) const {
  return train_by_digit_.at(static_cast<std::size_t>(digit));
}

const std::vector<std::size_t>& MnistStore::test_indices_of(int digit) const {
  return test_by_digit_.at(static_cast<std::size_t>(digit));
}

std::array<double, kImagePixels> resize_bilinear_16(std::span<const std::uint8_t> img28) {
  if (img28.size() != kMnistSide * kMnistSide)
    throw std::invalid_argument("resize_bilinear_16: expected a 28x28 image");
  constexpr double scale = static_cast<double>(kMnistSide) / kImageSide;
  std::array<double, kImagePixels> out;
  for (int i = 0; i < kImageSide; ++i) {
    const double sy = (i + 0.5) * scale - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, kMnistSide - 1);
    const int y1 = std::min(y0 + 1, kMnistSide - 1);
    const double fy = std::clamp(sy - y0, 0.0, 1.0);
    for (int j = 0; j < kImageSide; ++j) {
      const double sx = (j + 0.5) * scale - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, kMnistSide - 1);
      const int x1 = std::min(x0 + 1, kMnistSide - 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      const double v00 = img28[static_cast<std::size_t>(y0) * kMnistSide + x0];
      const double v01 = img28[static_cast<std::size_t>(y0) * kMnistSide + x1];
      const double v10 = img28[static_cast<std::size_t>(y1) * kMnistSide + x0];
      const double v11 = img28[static_cast<std::size_t>(y1) * kMnistSide + x1];
      const double top = v00 + fx * (v01 - v00);
      const double bot = v10 + fx * (v11 - v10);
      out[static_cast<std::size_t>(i) * kImageSide + j] = (top + fy * (bot - top)) / 255.0;
    }
  }
  return out;
}

Curriculum build_mnist_curriculum(const MnistStore& store, int index, Rng& rng) {
  auto draw_pair = [&rng, &store]() {
    MnistTask t;
    t.digit0 = rng.uniform_int(10);
    int second = rng.uniform_int(9);
    if (second >= t.digit0) ++second;  // without replacement within the task
    t.digit1 = second;
    if (store.train_indices_of(t.digit0).empty() || store.train_indices_of(t.digit1).empty())
      throw std::runtime_error("mnist store has no training images for a drawn digit");
    return t;
  };
  Curriculum c;
  c.id = {"exp4", index};
  c.construction_seed = rng.seed();
  c.tasks = {TaskSpec{draw_pair()}, TaskSpec{draw_pair()}};
  return c;
}

LabeledImageSet mnist_task_images(const MnistStore& store, const MnistTask& task, Role role) {
  const bool train = role == Role::train;
  const auto& idx0 = train ? store.train_indices_of(task.digit0) : store.test_indices_of(task.digit0);
  const auto& idx1 = train ? store.train_indices_of(task.digit1) : store.test_indices_of(task.digit1);

  LabeledImageSet set;
  set.role = role;
  set.images = Matrix(idx0.size() + idx1.size(), kImagePixels);
  set.labels.resize(idx0.size() + idx1.size());
  std::size_t row = 0;
  for (int label = 0; label <= 1; ++label) {
    for (std::size_t i : (label == 0 ? idx0 : idx1)) {
      const auto img = resize_bilinear_16(train ? store.train_image(i) : store.test_image(i));
      std::memcpy(set.images.row(row).data(), img.data(), sizeof(img));
      set.labels[row] = static_cast<std::uint8_t>(label);
      ++row;
    }
  }
  return set;
}

}  // namespace cflab
