#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bitplan/common/json.hpp"

namespace bitplan::netlab {

// One layer's slice of the flat parameter vector. The first
// product(weight_shape) entries are the weight tensor (leading axis = output
// channel); any remaining entries are bias or affine terms.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::vector<std::size_t> weight_shape;
  bool quantizable = false;

  std::size_t weight_count() const;
};

class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(std::vector<Segment> segments);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return total_; }
  // Throws InputError naming the layer when absent.
  const Segment& at(const std::string& name) const;
  const Segment* find(const std::string& name) const;
  std::vector<std::string> quantizable_names() const;

  bool operator==(const ParamLayout& other) const;

  Json to_json() const;
  static ParamLayout from_json(const Json& j);

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

struct ParamVector {
  std::vector<double> values;
  ParamLayout layout;
  // Non-trainable state (batchnorm running statistics), keyed by layer.
  std::map<std::string, std::vector<double>> buffers;

  ParamVector() = default;
  explicit ParamVector(ParamLayout l)
      : values(l.size(), 0.0), layout(std::move(l)) {}

  std::span<double> segment(const std::string& name);
  std::span<const double> segment(const std::string& name) const;
  std::span<double> weights(const std::string& name);
  std::span<const double> weights(const std::string& name) const;

  // Order-sensitive FNV checksum of values and buffers.
  std::uint64_t checksum() const;
};

// Checkpoint = <path> holding little-endian float64 values plus
// <path>.json sidecar with the layout and buffers.
void save_checkpoint(const std::filesystem::path& path, const ParamVector& p);
ParamVector load_checkpoint(const std::filesystem::path& path);

}  // namespace bitplan::netlab
