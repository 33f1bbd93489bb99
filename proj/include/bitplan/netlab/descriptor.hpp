#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bitplan/common/json.hpp"

namespace bitplan::netlab {

enum class LayerKind { dense, conv, batchnorm, activation };
enum class ActivationFn { tanh, relu };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

// Shape information needed to instantiate a layer. Descriptors of reference
// architectures (used only for cost accounting) omit it.
struct Geometry {
  std::size_t in = 0, out = 0;                           // dense
  std::size_t in_channels = 0, out_channels = 0;         // conv
  std::size_t kernel = 0, in_h = 0, in_w = 0;            // conv
  std::size_t channels = 0, spatial = 0;                 // batchnorm
  ActivationFn fn = ActivationFn::tanh;                  // activation
  std::size_t width = 0;                                 // activation
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::dense;
  std::int64_t param_count = 0;
  std::int64_t mac_count = 0;
  bool quantizable = false;
  std::optional<Geometry> geometry;
};

struct ModelDescriptor {
  std::vector<LayerSpec> layers;

  // Throws InputError on duplicate names, negative counts, or quantizable
  // batchnorm/activation layers.
  void validate() const;

  std::vector<const LayerSpec*> quantizable_layers() const;
  const LayerSpec* find(const std::string& name) const;
  std::int64_t total_params(bool quantizable_only) const;
  std::int64_t total_macs(bool quantizable_only) const;

  Json to_json() const;
  static ModelDescriptor from_json(const Json& j);
  static ModelDescriptor load(const std::filesystem::path& path);
};

// Reference ImageNet architectures at 224x224 input. Conv and fc layers are
// quantizable; batchnorm layers carry their affine parameters only.
ModelDescriptor resnet18_descriptor();
ModelDescriptor resnet50_descriptor();

}  // namespace bitplan::netlab
