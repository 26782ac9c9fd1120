#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cflab/curricula.hpp"
#include "cflab/rng.hpp"

namespace cflab {

/// Raised for malformed IDX payloads; `offset` is the byte position of the
/// first inconsistency.
struct IdxFormatError : std::runtime_error {
  std::size_t offset;
  IdxFormatError(const std::string& what, std::size_t off)
      : std::runtime_error(what + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;  // row-major

  std::size_t count() const { return dims.empty() ? 0 : dims[0]; }
};

/// IDX with unsigned-byte payload: magic 0x00000801 (1D labels) or
/// 0x00000803 (3D images), big-endian header.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx(const IdxTensor& t);

/// Reads a file through zlib, so plain and gzip-compressed IDX files both
/// work transparently.
IdxTensor load_idx_file(const std::filesystem::path& path);

/// The four canonical IDX files, loaded once and shared read-only.
class MnistStore {
 public:
  /// Expects train-images-idx3-ubyte, train-labels-idx1-ubyte,
  /// t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte under `dir`
  /// (a .gz suffix on any of them is fine).
  static MnistStore load(const std::filesystem::path& dir);

  /// Assembles a store from already-parsed tensors (synthetic fixtures).
  static MnistStore from_tensors(IdxTensor train_images, IdxTensor train_labels,
                                 IdxTensor test_images, IdxTensor test_labels);

  std::size_t n_train() const { return train_labels_.size(); }
  std::size_t n_test() const { return test_labels_.size(); }
  std::span<const std::uint8_t> train_image(std::size_t i) const;
  std::span<const std::uint8_t> test_image(std::size_t i) const;
  int train_label(std::size_t i) const { return train_labels_[i]; }
  int test_label(std::size_t i) const { return test_labels_[i]; }
  const std::vector<std::size_t>& train_indices_of(int digit) const;
  const std::vector<std::size_t>& test_indices_of(int digit) const;

 private:
  std::vector<std::uint8_t> train_images_, test_images_;  // 28x28 rows
  std::vector<std::uint8_t> train_labels_, test_labels_;
  std::array<std::vector<std::size_t>, 10> train_by_digit_, test_by_digit_;

  void index_digits();
};

inline constexpr int kMnistSide = 28;

/// 28x28 bytes -> 16x16 doubles in [0, 1]. Half-pixel-center source mapping
/// ((i + 0.5) * 28 / 16 - 0.5), edge-clamped bilinear blend, then / 255.
std::array<double, kImagePixels> resize_bilinear_16(std::span<const std::uint8_t> img28);

/// Two random digit-pair tasks; within each task the two digits are drawn
/// without replacement from {0..9} (pairs may repeat across the two tasks).
/// Draw order: task1 digit0, task1 digit1, task2 digit0, task2 digit1.
Curriculum build_mnist_curriculum(const MnistStore& store, int index, Rng& rng);

/// All train (respectively test) images of the task's two digits, resized to
/// 16x16; label 0 <-> digit0. Row order follows the store's file order:
/// digit0 block first, then digit1.
LabeledImageSet mnist_task_images(const MnistStore& store, const MnistTask& task, Role role);

}  // namespace cflab
