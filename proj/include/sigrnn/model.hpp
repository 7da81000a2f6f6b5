/* Copyright 2026 The sigrnn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Layer stacks with a linear regression head, model variant strings, and the
// versioned binary checkpoint format.
//
// Checkpoint layout (all integers and floats little-endian):
//
//   "SIGRNN1\n"                    8 magic bytes
//   u8   format version            (kCheckpointVersion)
//   u32  config length, then that many bytes of ModelConfig text
//   f64  parameters, block by block in declaration order
//   u8   optimizer flag; when 1: u64 Adam step, first moments, second
//        moments (each in parameter order)
//
// Declaration order is layer by layer; inside a layer each ordinary gate
// contributes b, U, W (LSTM gates i, f, c, o; GRU gates z, r, h), a
// signature layer then adds b_gate, W_gate, W_sig. The head (b, W) is last.

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sigrnn/cells.hpp"
#include "sigrnn/errors.hpp"
#include "sigrnn/layers.hpp"
#include "sigrnn/numerics.hpp"
#include "sigrnn/params.hpp"

namespace sigrnn {

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t seq_len = 0;
  std::vector<LayerConfig> layers;
  bool flatten_output = false;

  void validate() const {
    if (input_dim == 0) throw ConfigError("model input dimension must be >= 1");
    if (seq_len == 0) throw ConfigError("model sequence length must be >= 1");
    if (layers.empty()) throw ConfigError("model needs at least one layer");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].validate();
      if (layers[i].hidden != layers.front().hidden) {
        throw ConfigError("hidden width must be uniform across layers");
      }
      const bool last = i + 1 == layers.size();
      if (!last && !layers[i].return_sequences) {
        throw ConfigError("layer " + std::to_string(i) + " feeds another layer and must return sequences");
      }
      if (last && layers[i].return_sequences != flatten_output) {
        throw ConfigError("last layer returns sequences iff the output is flattened");
      }
    }
  }

  std::size_t hidden() const { return layers.back().hidden; }
  std::size_t head_input() const { return flatten_output ? seq_len * hidden() : hidden(); }

  std::string to_text() const {
    std::ostringstream os;
    os << "input_dim=" << input_dim << "\n"
       << "seq_len=" << seq_len << "\n"
       << "flatten_output=" << (flatten_output ? 1 : 0) << "\n"
       << "layers=" << layers.size() << "\n";
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string p = "layer" + std::to_string(i) + ".";
      os << p << "kind=" << to_string(l.kind) << "\n"
         << p << "hidden=" << l.hidden << "\n"
         << p << "sig_depth=" << l.sig_depth << "\n"
         << p << "proj_dim=" << l.proj_dim << "\n"
         << p << "return_sequences=" << (l.return_sequences ? 1 : 0) << "\n";
    }
    return os.str();
  }

  static ModelConfig from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw IntegrityError("model config line without '=': " + line);
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> std::string {
      const auto it = kv.find(key);
      if (it == kv.end()) throw IntegrityError("model config is missing '" + key + "'");
      return it->second;
    };
    auto num = [&](const std::string& key) -> std::size_t {
      const std::string v = get(key);
      try {
        std::size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
      } catch (const std::exception&) {
        throw IntegrityError("model config key '" + key + "' is not a count: " + v);
      }
    };
    ModelConfig cfg;
    cfg.input_dim = num("input_dim");
    cfg.seq_len = num("seq_len");
    cfg.flatten_output = num("flatten_output") != 0;
    const std::size_t n = num("layers");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      LayerConfig l;
      try {
        l.kind = cell_kind_from_string(get(p + "kind"));
      } catch (const ConfigError& e) {
        throw IntegrityError(e.what());
      }
      l.hidden = num(p + "hidden");
      l.sig_depth = num(p + "sig_depth");
      l.proj_dim = num(p + "proj_dim");
      l.return_sequences = num(p + "return_sequences") != 0;
      cfg.layers.push_back(l);
    }
    try {
      cfg.validate();
    } catch (const ConfigError& e) {
      throw IntegrityError(std::string("stored model config is invalid: ") + e.what());
    }
    return cfg;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr const char* kValidVariants =
    "lstm, gru, lstm-<layers>, gru-<layers>, sig_lstm[-<depth>...], sig_gru[-<depth>...] "
    "(one depth per layer, depths 1..4)";

// Variant strings follow the table labels: "gru" (one layer), "lstm-3"
// (three baseline layers), "sig_gru-3-2" (two signature layers of depth 3
// and 2). A bare "sig_lstm" is one layer of depth 2. `baseline_layers`
// applies to a bare "lstm"/"gru".
inline ModelConfig parse_variant(const std::string& variant, std::size_t input_dim,
                                 std::size_t seq_len, std::size_t hidden, std::size_t proj_dim,
                                 bool flatten, std::size_t baseline_layers = 1) {
  std::vector<std::string> parts;
  {
    std::string cur;
    for (char ch : variant) {
      if (ch == '-') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    parts.push_back(cur);
  }
  auto invalid = [&](const std::string& why) {
    return ConfigError("invalid model variant '" + variant + "' (" + why + "); valid variants: " +
                       kValidVariants);
  };
  CellKind kind;
  try {
    kind = cell_kind_from_string(parts.front());
  } catch (const ConfigError&) {
    throw invalid("unknown cell kind");
  }
  std::vector<std::size_t> numbers;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (p.empty() || p.find_first_not_of("0123456789") != std::string::npos || p.size() > 3) {
      throw invalid("suffix '" + p + "' is not a number");
    }
    numbers.push_back(std::stoul(p));
  }
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.seq_len = seq_len;
  cfg.flatten_output = flatten;
  if (is_signature_kind(kind)) {
    if (numbers.empty()) numbers.push_back(2);
    for (std::size_t depth : numbers) {
      if (depth < 1 || depth > kMaxSignatureDepth) throw invalid("signature depth out of range");
      cfg.layers.push_back({kind, hidden, depth, proj_dim, true});
    }
  } else {
    if (numbers.size() > 1) throw invalid("baseline variants take at most one layer count");
    const std::size_t n = numbers.empty() ? baseline_layers : numbers.front();
    if (n < 1) throw invalid("layer count must be >= 1");
    for (std::size_t i = 0; i < n; ++i) cfg.layers.push_back({kind, hidden, 0, 0, true});
  }
  cfg.layers.back().return_sequences = flatten;
  cfg.validate();
  return cfg;
}

class Model {
 public:
  struct Tape {
    std::vector<RecurrentLayer::Cache> caches;
  };

  // Random initialization from `seed`.
  Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    RngStream rng(seed);
    build(&rng);
  }

  // All parameters zero except the LSTM forget-gate biases, which start at
  // one. Call params().fill(0) for a fully zero model.
  static Model unset(ModelConfig cfg) { return Model(std::move(cfg)); }

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const std::vector<RecurrentLayer>& layers() const { return layers_; }

  // Predictions, one per sample.
  Vec forward(const Tensor3& x, Tape* tape = nullptr) const {
    check_input(x);
    Tape local;
    Tape& tp = tape ? *tape : local;
    tp.caches.assign(layers_.size(), {});
    Tensor3 cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      cur = layers_[i].forward(params_, cur, &tp.caches[i]);
    }
    return head_forward(cur);
  }

  Vec predict(const Tensor3& x) const { return forward(x, nullptr); }

  // Given dL/dpred, accumulates all parameter gradients into `grads`
  // (zeroed by the caller) and returns dL/dx.
  Tensor3 backward(const Tape& tape, std::span<const double> d_pred, ParamSet& grads) const {
    const Tensor3& top = tape.caches.back().output;
    const std::size_t batch = top.batch(), time = top.time(), h = top.features();
    const Matrix& w = params_.value(head_w_);
    double db = 0.0;
    Tensor3 dy(batch, time, h);
    auto& gw = grads.value(head_w_);
    for (std::size_t b = 0; b < batch; ++b) {
      const double g = d_pred[b];
      db += g;
      if (cfg_.flatten_output) {
        const std::size_t k = time * h;
        const double* feat = top.values().data() + b * k;
        double* dfeat = dy.values().data() + b * k;
        for (std::size_t j = 0; j < k; ++j) {
          gw(0, j) += g * feat[j];
          dfeat[j] = g * w(0, j);
        }
      } else {
        const auto feat = top.row(b, time - 1);
        auto dfeat = dy.row(b, time - 1);
        for (std::size_t j = 0; j < h; ++j) {
          gw(0, j) += g * feat[j];
          dfeat[j] = g * w(0, j);
        }
      }
    }
    grads.value(head_b_)(0, 0) += db;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      dy = layers_[i].backward(params_, tape.caches[i], dy, grads);
    }
    return dy;
  }

 private:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) { build(nullptr); }

  void build(RngStream* rng) {
    cfg_.validate();
    std::size_t in = cfg_.input_dim;
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
      layers_.emplace_back(cfg_.layers[i], in, "layer" + std::to_string(i) + ".", params_, rng);
      in = cfg_.layers[i].hidden;
    }
    const std::size_t k = cfg_.head_input();
    head_b_ = params_.add("head.b", Matrix(1, 1));
    head_w_ = params_.add("head.W", rng ? glorot_uniform(*rng, 1, k) : Matrix(1, k));
  }

  void check_input(const Tensor3& x) const {
    if (x.features() != cfg_.input_dim) {
      throw ShapeError("model input " + shape_str(x) + " does not match input width " +
                       std::to_string(cfg_.input_dim));
    }
    if (cfg_.flatten_output && x.time() != cfg_.seq_len) {
      throw ShapeError("flattened model expects " + std::to_string(cfg_.seq_len) +
                       " time steps, got " + shape_str(x));
    }
    if (x.time() == 0) throw ShapeError("model input has no time steps");
  }

  Vec head_forward(const Tensor3& top) const {
    const std::size_t batch = top.batch(), time = top.time(), h = top.features();
    const Matrix& w = params_.value(head_w_);
    const double bias = params_.value(head_b_)(0, 0);
    Vec out(batch, bias);
    for (std::size_t b = 0; b < batch; ++b) {
      double acc = 0.0;
      if (cfg_.flatten_output) {
        const double* feat = top.values().data() + b * time * h;
        for (std::size_t j = 0; j < time * h; ++j) acc += w(0, j) * feat[j];
      } else {
        const auto feat = top.row(b, time - 1);
        for (std::size_t j = 0; j < h; ++j) acc += w(0, j) * feat[j];
      }
      out[b] += acc;
    }
    return out;
  }

  ModelConfig cfg_;
  ParamSet params_;
  std::vector<RecurrentLayer> layers_;
  std::size_t head_b_ = 0;
  std::size_t head_w_ = 0;
};

inline Vec stack_forward(const Tensor3& x, const Model& model) { return model.predict(x); }

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr char kCheckpointMagic[8] = {'S', 'I', 'G', 'R', 'N', 'N', '1', '\n'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ParamSet& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_blocks(std::string& out, const ParamSet& p) {
  for (const auto& b : p) {
    for (double x : b.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw IntegrityError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void blocks(ParamSet& p, const char* what) {
    for (auto& b : p) {
      for (double& x : b.value.values()) x = std::bit_cast<double>(u64(what));
    }
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Model& model, const AdamState* adam = nullptr) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.push_back(static_cast<char>(kCheckpointVersion));
  const std::string text = model.config().to_text();
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  detail::put_blocks(out, model.params());
  out.push_back(adam ? 1 : 0);
  if (adam) {
    detail::put_u64(out, adam->step);
    detail::put_blocks(out, adam->m);
    detail::put_blocks(out, adam->v);
  }
  return out;
}

struct Checkpoint {
  Model model;
  std::optional<AdamState> adam;
};

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  detail::Reader r(bytes);
  if (r.bytes(sizeof(kCheckpointMagic), "magic") != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw IntegrityError("not a sigrnn checkpoint (bad magic)");
  }
  const std::uint8_t version = r.u8("version");
  if (version != kCheckpointVersion) {
    throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t len = r.u32("config length");
  const ModelConfig cfg = ModelConfig::from_text(r.bytes(len, "model config"));
  Checkpoint ck{Model::unset(cfg), std::nullopt};
  r.blocks(ck.model.params(), "parameters");
  const std::uint8_t flag = r.u8("optimizer flag");
  if (flag > 1) throw IntegrityError("corrupt optimizer flag");
  if (flag == 1) {
    AdamState adam = AdamState::for_params(ck.model.params());
    adam.step = r.u64("optimizer step");
    r.blocks(adam.m, "first moments");
    r.blocks(adam.v, "second moments");
    ck.adam = std::move(adam);
  }
  if (!r.at_end()) throw IntegrityError("trailing bytes after checkpoint payload");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Model& model, const AdamState* adam = nullptr) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(model, adam);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace sigrnn
