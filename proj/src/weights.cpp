#include "tome/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tome/rng.hpp"

namespace tome {

std::vector<std::pair<std::string, std::vector<std::uint32_t>>>
expected_tensor_shapes(const ModelConfig& cfg) {
  const auto c = static_cast<std::uint32_t>(cfg.width);
  const auto hidden = static_cast<std::uint32_t>(cfg.mlp_hidden());
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> shapes;
  shapes.emplace_back("patch_embed.weight",
                      std::vector<std::uint32_t>{
                          c, static_cast<std::uint32_t>(cfg.patch_dim())});
  shapes.emplace_back("patch_embed.bias", std::vector<std::uint32_t>{c});
  shapes.emplace_back("pos_embed",
                      std::vector<std::uint32_t>{
                          static_cast<std::uint32_t>(cfg.n_tokens()), c});
  shapes.emplace_back("cls_token", std::vector<std::uint32_t>{c});
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    shapes.emplace_back(p + "norm1.weight", std::vector<std::uint32_t>{c});
    shapes.emplace_back(p + "norm1.bias", std::vector<std::uint32_t>{c});
    shapes.emplace_back(p + "qkv.weight", std::vector<std::uint32_t>{3 * c, c});
    shapes.emplace_back(p + "qkv.bias", std::vector<std::uint32_t>{3 * c});
    shapes.emplace_back(p + "proj.weight", std::vector<std::uint32_t>{c, c});
    shapes.emplace_back(p + "proj.bias", std::vector<std::uint32_t>{c});
    shapes.emplace_back(p + "norm2.weight", std::vector<std::uint32_t>{c});
    shapes.emplace_back(p + "norm2.bias", std::vector<std::uint32_t>{c});
    shapes.emplace_back(p + "mlp_fc1.weight", std::vector<std::uint32_t>{hidden, c});
    shapes.emplace_back(p + "mlp_fc1.bias", std::vector<std::uint32_t>{hidden});
    shapes.emplace_back(p + "mlp_fc2.weight", std::vector<std::uint32_t>{c, hidden});
    shapes.emplace_back(p + "mlp_fc2.bias", std::vector<std::uint32_t>{c});
  }
  shapes.emplace_back("norm.weight", std::vector<std::uint32_t>{c});
  shapes.emplace_back("norm.bias", std::vector<std::uint32_t>{c});
  shapes.emplace_back("head.weight",
                      std::vector<std::uint32_t>{
                          static_cast<std::uint32_t>(cfg.num_classes), c});
  shapes.emplace_back("head.bias",
                      std::vector<std::uint32_t>{
                          static_cast<std::uint32_t>(cfg.num_classes)});
  std::sort(shapes.begin(), shapes.end());
  return shapes;
}

TensorStore init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TensorStore store;
  for (const auto& [name, dims] : expected_tensor_shapes(cfg)) {
    Tensor t;
    t.dims = dims;
    const std::size_t fan_out = dims.front();
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < dims.size(); ++i) fan_in *= dims[i];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(mix_seed(seed, fnv1a64(name)));
    t.data.resize(t.numel());
    for (float& v : t.data) {
      v = static_cast<float>(rng.uniform(-a, a));
    }
    store.emplace(name, std::move(t));
  }
  return store;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint8_t u8(const std::string& what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint16_t u16(const std::string& what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) {
      v |= static_cast<std::uint16_t>(
          static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 2;
    return v;
  }

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
          static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32(const std::string& what) {
    return std::bit_cast<float>(u32(what));
  }

  std::string str(std::size_t len, const std::string& what) {
    need(len, what);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

 private:
  void need(std::size_t n, const std::string& what) {
    if (pos_ + n > bytes_.size()) {
      throw ParseError("weights file truncated while reading " + what, pos_);
    }
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_weights(const TensorStore& store, const std::filesystem::path& path) {
  std::string out;
  out += "TOME";
  out.push_back(1);  // version
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, tensor] : store) {  // map iterates sorted by name
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(tensor.dims.size()));
    for (std::uint32_t d : tensor.dims) put_u32(out, d);
    if (tensor.data.size() != tensor.numel()) {
      throw std::invalid_argument("save_weights: tensor '" + name +
                                  "' data does not match its dims");
    }
    for (float v : tensor.data) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

TensorStore load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));

  if (r.str(4, "magic") != "TOME") {
    throw ParseError("bad magic, expected \"TOME\"", 0);
  }
  const auto version = r.u8("version");
  if (version != 1) {
    throw ParseError("unsupported version " + std::to_string(version), 4);
  }
  const auto count = r.u32("tensor count");

  TensorStore store;
  std::string prev_name;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u16("tensor name length");
    std::string name = r.str(name_len, "tensor name");
    const std::string ctx = "tensor '" + name + "'";
    Tensor t;
    const auto ndim = r.u8("ndim of " + ctx);
    if (ndim == 0) throw ParseError(ctx + " has zero dims", r.offset());
    for (std::uint8_t d = 0; d < ndim; ++d) {
      t.dims.push_back(r.u32("dims of " + ctx));
    }
    const std::size_t numel = t.numel();
    t.data.reserve(numel);
    for (std::size_t k = 0; k < numel; ++k) {
      t.data.push_back(r.f32("data of " + ctx));
    }
    if (!prev_name.empty() && !(prev_name < name)) {
      throw ParseError("tensor names out of order: '" + prev_name +
                       "' before '" + name + "'", r.offset());
    }
    prev_name = name;
    store.emplace(std::move(name), std::move(t));
  }
  if (!r.at_end()) {
    throw ParseError("trailing bytes after last tensor", r.offset());
  }
  return store;
}

void validate_against_config(const TensorStore& store, const ModelConfig& cfg) {
  const auto expected = expected_tensor_shapes(cfg);
  for (const auto& [name, dims] : expected) {
    const auto it = store.find(name);
    if (it == store.end()) {
      throw ConfigError("missing tensor '" + name + "'");
    }
    if (it->second.dims != dims) {
      std::string want, got;
      for (auto d : dims) want += std::to_string(d) + " ";
      for (auto d : it->second.dims) got += std::to_string(d) + " ";
      throw ConfigError("tensor '" + name + "' has shape [ " + got +
                        "], config expects [ " + want + "]");
    }
    if (it->second.data.size() != it->second.numel()) {
      throw ConfigError("tensor '" + name + "' data does not match its dims");
    }
  }
  if (store.size() != expected.size()) {
    for (const auto& [name, tensor] : store) {
      (void)tensor;
      const bool known =
          std::any_of(expected.begin(), expected.end(),
                      [&](const auto& e) { return e.first == name; });
      if (!known) throw ConfigError("unexpected tensor '" + name + "'");
    }
  }
}

}  // namespace tome
