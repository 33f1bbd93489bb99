#include "bitplan/netlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "bitplan/common/error.hpp"
#include "bitplan/common/rng.hpp"

namespace bitplan::netlab {

Batch Batch::subset(std::span<const std::size_t> rows) const {
  Batch b;
  b.inputs = Matrix(rows.size(), inputs.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = inputs.row(rows[i]);
    std::copy(src.begin(), src.end(), b.inputs.row(i).begin());
    if (!labels.empty()) b.labels.push_back(labels[rows[i]]);
    if (!targets.empty()) b.targets.push_back(targets[rows[i]]);
  }
  return b;
}

void Batch::validate(std::size_t num_classes) const {
  if (!labels.empty() && labels.size() != inputs.rows)
    throw InputError("E_SHAPE", "label count does not match input rows");
  if (!targets.empty() && targets.size() != inputs.rows)
    throw InputError("E_SHAPE", "target count does not match input rows");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
      throw InputError("E_LABEL", "label " + std::to_string(l) + " outside [0, " +
                                      std::to_string(num_classes) + ")");
}

namespace {

Dataset split(Matrix x, std::vector<int> y, std::size_t classes, double val_fraction, Rng& rng) {
  std::vector<std::size_t> idx(x.rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::round(val_fraction * static_cast<double>(x.rows)));
  Batch all{std::move(x), std::move(y), {}};
  Dataset d;
  d.num_classes = classes;
  d.val = all.subset(std::span(idx).first(n_val));
  d.train = all.subset(std::span(idx).subspan(n_val));
  return d;
}

}  // namespace

Dataset make_blobs(std::size_t per_class, std::size_t classes, std::size_t dim, double spread,
                   double val_fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix centres(classes, dim);
  for (double& c : centres.data) c = 3.0 * normal(rng);
  Matrix x(per_class * classes, dim);
  std::vector<int> y;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t r = c * per_class + k;
      for (std::size_t j = 0; j < dim; ++j) x(r, j) = centres(c, j) + spread * normal(rng);
      y.push_back(static_cast<int>(c));
    }
  Dataset d = split(std::move(x), std::move(y), classes, val_fraction, rng);
  d.channels = 1;
  d.height = 1;
  d.width = dim;
  return d;
}

Dataset make_patterns(std::size_t per_class, std::size_t classes, std::size_t side, double noise,
                      double val_fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pos(0, side - 1);
  const std::size_t pixels = side * side;
  // Each prototype is a few random horizontal/vertical strokes.
  Matrix proto(classes, pixels);
  for (std::size_t c = 0; c < classes; ++c) {
    for (int s = 0; s < 3; ++s) {
      const bool horizontal = (rng() & 1U) != 0;
      const std::size_t line = pos(rng);
      for (std::size_t t = 0; t < side; ++t) {
        const std::size_t r = horizontal ? line : t;
        const std::size_t col = horizontal ? t : line;
        proto(c, r * side + col) = 1.0;
      }
    }
    for (std::size_t p = 0; p < pixels; ++p) proto(c, p) = 2.0 * proto(c, p) - 0.5;
  }
  Matrix x(per_class * classes, pixels);
  std::vector<int> y;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t r = c * per_class + k;
      for (std::size_t p = 0; p < pixels; ++p) x(r, p) = proto(c, p) + noise * normal(rng);
      y.push_back(static_cast<int>(c));
    }
  Dataset d = split(std::move(x), std::move(y), classes, val_fraction, rng);
  d.channels = 1;
  d.height = side;
  d.width = side;
  return d;
}

namespace {

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("E_DATASET", "dataset file truncated: " + path.string());
  return v;
}

void put_split(std::ofstream& out, const Batch& b) {
  out.write(reinterpret_cast<const char*>(b.inputs.data.data()),
            static_cast<std::streamsize>(b.inputs.data.size() * sizeof(double)));
  for (int l : b.labels) put<std::int32_t>(out, l);
}

Batch get_split(std::ifstream& in, std::size_t n, std::size_t dim, const std::filesystem::path& path) {
  Batch b;
  b.inputs = Matrix(n, dim);
  for (double& v : b.inputs.data) v = get<double>(in, path);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(get<std::int32_t>(in, path));
  return b;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& d) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("E_WRITE", "cannot write " + path.string());
  out.write("BPDS", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.train.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.val.size()));
  put_split(out, d.train);
  put_split(out, d.val);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("E_DATASET_NOT_FOUND", "dataset not found: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BPDS", 4) != 0)
    throw InputError("E_DATASET", "not a BPDS dataset: " + path.string());
  if (get<std::uint32_t>(in, path) != 1)
    throw InputError("E_DATASET", "unsupported dataset version");
  Dataset d;
  d.channels = get<std::uint32_t>(in, path);
  d.height = get<std::uint32_t>(in, path);
  d.width = get<std::uint32_t>(in, path);
  d.num_classes = get<std::uint32_t>(in, path);
  const std::size_t n_train = get<std::uint32_t>(in, path);
  const std::size_t n_val = get<std::uint32_t>(in, path);
  const std::size_t dim = d.channels * d.height * d.width;
  d.train = get_split(in, n_train, dim, path);
  d.val = get_split(in, n_val, dim, path);
  d.train.validate(d.num_classes);
  d.val.validate(d.num_classes);
  return d;
}

}  // namespace bitplan::netlab
