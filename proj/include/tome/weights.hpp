#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tome/config.hpp"
#include "tome/errors.hpp"
#include "tome/types.hpp"

namespace tome {

/// One named float32 tensor.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

/// Name -> tensor map. Iteration (and therefore the file layout) is in
/// sorted-name order.
using TensorStore = std::map<std::string, Tensor>;

/// Every tensor the model expects, with its shape, in sorted-name order.
std::vector<std::pair<std::string, std::vector<std::uint32_t>>>
expected_tensor_shapes(const ModelConfig& cfg);

/// Deterministic initialization: each tensor is drawn uniform(-a, a) with
/// a = sqrt(6 / (fan_in + fan_out)), from a generator seeded by the global
/// seed mixed with the tensor-name hash. fan_out is the leading dim,
/// fan_in the product of the rest (1 for vectors).
TensorStore init_weights(const ModelConfig& cfg, std::uint64_t seed);

/// Binary weight container, little-endian throughout:
///   magic "TOME", u8 version = 1, u32 tensor count,
///   then per tensor in sorted-name order:
///   u16 name length, name bytes, u8 ndim, u32 per dim, float32 data.
void save_weights(const TensorStore& store, const std::filesystem::path& path);

/// Throws ParseError naming the offending tensor and byte offset on
/// truncated or malformed input.
TensorStore load_weights(const std::filesystem::path& path);

/// Shape-checks a store against the config. Throws ConfigError on missing,
/// extra, or misshapen tensors.
void validate_against_config(const TensorStore& store, const ModelConfig& cfg);

/// Typed weight views for a forward pass, cast from the float32 store.
template <class Scalar>
struct ModelWeights {
  MatrixX<Scalar> patch_embed_w;  // C x patch_dim
  VectorX<Scalar> patch_embed_b;  // C
  MatrixX<Scalar> pos_embed;      // N x C
  VectorX<Scalar> cls_token;      // C

  struct Block {
    VectorX<Scalar> norm1_w, norm1_b;
    MatrixX<Scalar> qkv_w;   // 3C x C
    VectorX<Scalar> qkv_b;   // 3C
    MatrixX<Scalar> proj_w;  // C x C
    VectorX<Scalar> proj_b;  // C
    VectorX<Scalar> norm2_w, norm2_b;
    MatrixX<Scalar> fc1_w;  // hidden x C
    VectorX<Scalar> fc1_b;  // hidden
    MatrixX<Scalar> fc2_w;  // C x hidden
    VectorX<Scalar> fc2_b;  // C
  };
  std::vector<Block> blocks;

  VectorX<Scalar> norm_w, norm_b;
  MatrixX<Scalar> head_w;  // num_classes x C
  VectorX<Scalar> head_b;  // num_classes

  static ModelWeights from_store(const TensorStore& store, const ModelConfig& cfg);
};

// ---------------------------------------------------------------------------

namespace detail {

template <class Scalar>
MatrixX<Scalar> tensor_as_matrix(const TensorStore& store,
                                 const std::string& name) {
  const Tensor& t = store.at(name);
  const Eigen::Index rows = t.dims.at(0);
  const Eigen::Index cols = t.dims.at(1);
  MatrixX<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = static_cast<Scalar>(
          t.data[static_cast<std::size_t>(i * cols + j)]);
    }
  }
  return m;
}

template <class Scalar>
VectorX<Scalar> tensor_as_vector(const TensorStore& store,
                                 const std::string& name) {
  const Tensor& t = store.at(name);
  VectorX<Scalar> v(static_cast<Eigen::Index>(t.data.size()));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(t.data[i]);
  }
  return v;
}

}  // namespace detail

template <class Scalar>
ModelWeights<Scalar> ModelWeights<Scalar>::from_store(const TensorStore& store,
                                                      const ModelConfig& cfg) {
  validate_against_config(store, cfg);
  ModelWeights<Scalar> w;
  w.patch_embed_w = detail::tensor_as_matrix<Scalar>(store, "patch_embed.weight");
  w.patch_embed_b = detail::tensor_as_vector<Scalar>(store, "patch_embed.bias");
  w.pos_embed = detail::tensor_as_matrix<Scalar>(store, "pos_embed");
  w.cls_token = detail::tensor_as_vector<Scalar>(store, "cls_token");
  w.blocks.resize(static_cast<std::size_t>(cfg.depth));
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    Block& b = w.blocks[static_cast<std::size_t>(i)];
    b.norm1_w = detail::tensor_as_vector<Scalar>(store, p + "norm1.weight");
    b.norm1_b = detail::tensor_as_vector<Scalar>(store, p + "norm1.bias");
    b.qkv_w = detail::tensor_as_matrix<Scalar>(store, p + "qkv.weight");
    b.qkv_b = detail::tensor_as_vector<Scalar>(store, p + "qkv.bias");
    b.proj_w = detail::tensor_as_matrix<Scalar>(store, p + "proj.weight");
    b.proj_b = detail::tensor_as_vector<Scalar>(store, p + "proj.bias");
    b.norm2_w = detail::tensor_as_vector<Scalar>(store, p + "norm2.weight");
    b.norm2_b = detail::tensor_as_vector<Scalar>(store, p + "norm2.bias");
    b.fc1_w = detail::tensor_as_matrix<Scalar>(store, p + "mlp_fc1.weight");
    b.fc1_b = detail::tensor_as_vector<Scalar>(store, p + "mlp_fc1.bias");
    b.fc2_w = detail::tensor_as_matrix<Scalar>(store, p + "mlp_fc2.weight");
    b.fc2_b = detail::tensor_as_vector<Scalar>(store, p + "mlp_fc2.bias");
  }
  w.norm_w = detail::tensor_as_vector<Scalar>(store, "norm.weight");
  w.norm_b = detail::tensor_as_vector<Scalar>(store, "norm.bias");
  w.head_w = detail::tensor_as_matrix<Scalar>(store, "head.weight");
  w.head_b = detail::tensor_as_vector<Scalar>(store, "head.bias");
  return w;
}

}  // namespace tome
