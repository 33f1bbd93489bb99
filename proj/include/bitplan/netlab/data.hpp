#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bitplan::netlab {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

struct Batch {
  Matrix inputs;
  std::vector<int> labels;
  // Real-valued targets for regression objectives; empty for classification.
  std::vector<double> targets;

  std::size_t size() const { return inputs.rows; }
  Batch subset(std::span<const std::size_t> rows) const;
  void validate(std::size_t num_classes) const;
};

struct Dataset {
  Batch train;
  Batch val;
  std::size_t num_classes = 0;
  // Image geometry when inputs are flattened channel x height x width.
  std::size_t channels = 1, height = 1, width = 0;
};

// Isotropic Gaussian blobs around random class centres.
Dataset make_blobs(std::size_t per_class, std::size_t classes, std::size_t dim,
                   double spread, double val_fraction, std::uint64_t seed);

// side x side single-channel images: a class-specific stroke pattern plus
// Gaussian pixel noise.
Dataset make_patterns(std::size_t per_class, std::size_t classes, std::size_t side,
                      double noise, double val_fraction, std::uint64_t seed);

// Binary dataset file, little-endian throughout:
//   char[4]  magic "BPDS"
//   u32      version (1)
//   u32      channels, height, width, num_classes
//   u32      n_train, n_val
//   f64      train inputs [n_train * channels*height*width]
//   i32      train labels [n_train]
//   f64      val inputs   [n_val * channels*height*width]
//   i32      val labels   [n_val]
void save_dataset(const std::filesystem::path& path, const Dataset& d);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace bitplan::netlab
