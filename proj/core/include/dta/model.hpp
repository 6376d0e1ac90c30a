// SPDX-License-Identifier: Apache-2.0
//
// Parameter store and full model assembly: named persistent buffers with
// Adam moments, seed-deterministic Glorot initialization, per-tape leaf
// binding, both encoders plus the prediction head, and the checkpoint
// bridge. Tapes are transient; parameters live here between steps.
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "dta/checkpoint.hpp"
#include "dta/config.hpp"
#include "dta/errors.hpp"
#include "dta/gcn.hpp"
#include "dta/losses.hpp"
#include "dta/protein.hpp"
#include "dta/rng.hpp"
#include "dta/smiles.hpp"
#include "dta/tensor.hpp"

namespace dta {

template <class T>
constexpr ScalarType scalar_type_of() {
  return sizeof(T) == 4 ? ScalarType::Float32 : ScalarType::Float64;
}

template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  double init_limit = 0.0;  // Glorot bound; 0 means zero-initialized
  bool zero_row0 = false;   // padding row: excluded from init and updates
  std::vector<T> value;
  std::vector<T> m;  // Adam first moment
  std::vector<T> v;  // Adam second moment

  int64_t count() const { return static_cast<int64_t>(value.size()); }
  int row_width() const { return shape.size() >= 2 ? shape[1] : 1; }
};

// Insertion-ordered named parameters; addresses are stable so tape views
// and optimizer loops can hold Param pointers.
template <class T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, std::vector<int> shape, double init_limit,
                bool zero_row0 = false) {
    if (find(name) != nullptr) throw ConfigError("duplicate parameter \"" + name + "\"");
    int64_t count = 1;
    for (int extent : shape) {
      if (extent <= 0) throw ConfigError("parameter \"" + name + "\" has non-positive extent");
      count *= extent;
    }
    Param<T> p;
    p.name = name;
    p.shape = std::move(shape);
    p.init_limit = init_limit;
    p.zero_row0 = zero_row0;
    p.value.assign(static_cast<size_t>(count), T(0));
    p.m.assign(static_cast<size_t>(count), T(0));
    p.v.assign(static_cast<size_t>(count), T(0));
    params_.push_back(std::move(p));
    return params_.back();
  }

  Param<T>* find(const std::string& name) {
    for (Param<T>& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  std::deque<Param<T>>& all() { return params_; }
  const std::deque<Param<T>>& all() const { return params_; }

  // Seed-deterministic: each parameter draws from its own name-keyed
  // stream, so the set of other parameters never shifts its values.
  void init(uint64_t seed) {
    for (Param<T>& p : params_) {
      if (p.init_limit == 0.0) {
        std::fill(p.value.begin(), p.value.end(), T(0));
      } else {
        Rng rng = derive_stream(seed, {kInitStreamTag, fnv1a64(p.name)});
        for (T& x : p.value) {
          x = static_cast<T>(rng.next_double(-p.init_limit, p.init_limit));
        }
        if (p.zero_row0) {
          for (int j = 0; j < p.row_width(); ++j) p.value[static_cast<size_t>(j)] = T(0);
        }
      }
      std::fill(p.m.begin(), p.m.end(), T(0));
      std::fill(p.v.begin(), p.v.end(), T(0));
    }
  }

  Checkpoint to_checkpoint(const std::string& metadata) const {
    Checkpoint ck;
    ck.metadata = metadata;
    for (const Param<T>& p : params_) {
      append_entry(ck, p.name, p, p.value);
      append_entry(ck, "adam.m." + p.name, p, p.m);
      append_entry(ck, "adam.v." + p.name, p, p.v);
    }
    return ck;
  }

  // Restores values and moments; every parameter must be present with the
  // exact shape and scalar type.
  void load_from(const Checkpoint& ck) {
    for (Param<T>& p : params_) {
      load_entry(ck, p.name, p, p.value);
      load_entry(ck, "adam.m." + p.name, p, p.m);
      load_entry(ck, "adam.v." + p.name, p, p.v);
    }
  }

 private:
  static constexpr uint64_t kInitStreamTag = 0x494e4954ull;

  static std::vector<int64_t> shape64(const Param<T>& p) {
    return std::vector<int64_t>(p.shape.begin(), p.shape.end());
  }

  static void append_entry(Checkpoint& ck, const std::string& name, const Param<T>& p,
                           const std::vector<T>& data) {
    if constexpr (sizeof(T) == 4) {
      ck.add_f32(name, shape64(p), std::vector<float>(data.begin(), data.end()));
    } else {
      ck.add_f64(name, shape64(p), std::vector<double>(data.begin(), data.end()));
    }
  }

  static void load_entry(const Checkpoint& ck, const std::string& name, const Param<T>& p,
                         std::vector<T>& dest) {
    const CheckpointEntry& entry = ck.expect(name, shape64(p), scalar_type_of<T>());
    if constexpr (sizeof(T) == 4) {
      dest.assign(entry.f32.begin(), entry.f32.end());
    } else {
      dest.assign(entry.f64.begin(), entry.f64.end());
    }
  }

  std::deque<Param<T>> params_;
};

struct ModelDims {
  int gcn_layers = 3;
  int drug_dim = 128;
  ProteinDims protein{};
  int head_hidden = 128;

  void validate() const {
    if (gcn_layers < 1) throw ConfigError("model: gcn_layers must be at least 1");
    if (drug_dim < 1) throw ConfigError("model: drug_dim must be at least 1");
    if (head_hidden < 1) throw ConfigError("model: head hidden width must be at least 1");
    protein.validate();
  }
};

inline ModelDims model_dims_from(const RunConfig& config) {
  ModelDims dims;
  dims.gcn_layers = config.gcn_layers;
  dims.drug_dim = config.drug_dim;
  dims.head_hidden = config.drug_dim;
  dims.protein.embed_dim = config.protein_embed_dim;
  dims.protein.max_len = config.protein_max_len;
  dims.protein.channels = config.conv_channels;
  dims.protein.kernel = config.conv_kernel;
  dims.protein.out_dim = config.target_dim;
  return dims;
}

// All parameters of one model bound onto one tape as gradient leaves.
template <class T>
struct BoundModel {
  std::vector<std::pair<Param<T>*, Var<T>>> leaves;
  std::vector<Var<T>> gcn_w;
  ProteinEncoderVars<T> protein;
  PredictionHeadVars<T> head;
};

template <class T>
class Model {
 public:
  explicit Model(const ModelDims& dims) : dims_(dims) {
    dims_.validate();
    const auto glorot = [](int fan_in, int fan_out) {
      return std::sqrt(6.0 / (fan_in + fan_out));
    };

    gcn_w_.push_back(&store_.add("gcn.w0", {kAtomFeatureCount, dims_.drug_dim},
                                 glorot(kAtomFeatureCount, dims_.drug_dim)));
    for (int l = 1; l < dims_.gcn_layers; ++l) {
      gcn_w_.push_back(&store_.add("gcn.w" + std::to_string(l),
                                   {dims_.drug_dim, dims_.drug_dim},
                                   glorot(dims_.drug_dim, dims_.drug_dim)));
    }

    const ProteinDims& pd = dims_.protein;
    embedding_ = &store_.add("protein.embedding", {kProteinVocab + 1, pd.embed_dim},
                             glorot(kProteinVocab + 1, pd.embed_dim), /*zero_row0=*/true);
    int in_channels = pd.embed_dim;
    for (int l = 0; l < 3; ++l) {
      int out_channels = pd.channels[static_cast<size_t>(l)];
      conv_w_[static_cast<size_t>(l)] = &store_.add(
          "protein.conv" + std::to_string(l) + ".w", {out_channels, in_channels, pd.kernel},
          glorot(in_channels * pd.kernel, out_channels * pd.kernel));
      conv_b_[static_cast<size_t>(l)] =
          &store_.add("protein.conv" + std::to_string(l) + ".b", {out_channels, 1}, 0.0);
      in_channels = out_channels;
    }
    proj_w_ = &store_.add("protein.proj.w", {pd.channels[2], pd.out_dim},
                          glorot(pd.channels[2], pd.out_dim));
    proj_b_ = &store_.add("protein.proj.b", {1, pd.out_dim}, 0.0);

    const int joint = dims_.drug_dim + pd.out_dim;
    const int hidden = dims_.head_hidden;
    v1_ = &store_.add("head.v1", {joint, hidden}, glorot(joint, hidden));
    b1_ = &store_.add("head.b1", {1, hidden}, 0.0);
    v2_ = &store_.add("head.v2", {hidden, hidden}, glorot(hidden, hidden));
    b2_ = &store_.add("head.b2", {1, hidden}, 0.0);
    v3_ = &store_.add("head.v3", {hidden, 1}, glorot(hidden, 1));
    b3_ = &store_.add("head.b3", {1, 1}, 0.0);
  }

  const ModelDims& dims() const { return dims_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  void init(uint64_t seed) { store_.init(seed); }

  BoundModel<T> bind(Tape<T>& tape) {
    BoundModel<T> bound;
    const auto leaf = [&](Param<T>* p) {
      Var<T> var = tape.leaf_view(p->shape, p->value.data());
      bound.leaves.emplace_back(p, var);
      return var;
    };
    for (Param<T>* w : gcn_w_) bound.gcn_w.push_back(leaf(w));
    bound.protein.embedding = leaf(embedding_);
    for (size_t l = 0; l < 3; ++l) {
      bound.protein.conv_w[l] = leaf(conv_w_[l]);
      bound.protein.conv_b[l] = leaf(conv_b_[l]);
    }
    bound.protein.proj_w = leaf(proj_w_);
    bound.protein.proj_b = leaf(proj_b_);
    bound.head.v1 = leaf(v1_);
    bound.head.b1 = leaf(b1_);
    bound.head.v2 = leaf(v2_);
    bound.head.b2 = leaf(b2_);
    bound.head.v3 = leaf(v3_);
    bound.head.b3 = leaf(b3_);
    return bound;
  }

 private:
  ModelDims dims_;
  ParamStore<T> store_;
  std::vector<Param<T>*> gcn_w_;
  Param<T>* embedding_ = nullptr;
  std::array<Param<T>*, 3> conv_w_{};
  std::array<Param<T>*, 3> conv_b_{};
  Param<T>* proj_w_ = nullptr;
  Param<T>* proj_b_ = nullptr;
  Param<T>* v1_ = nullptr;
  Param<T>* b1_ = nullptr;
  Param<T>* v2_ = nullptr;
  Param<T>* b2_ = nullptr;
  Param<T>* v3_ = nullptr;
  Param<T>* b3_ = nullptr;
};

// Atom features [n x k] through the GCN stack to a [1 x h] representation.
template <class T>
Var<T> encode_drug(Tape<T>& tape, const MolecularGraph& graph,
                   const std::vector<double>& norm_adjacency, const BoundModel<T>& bound) {
  const int n = graph.atom_count();
  if (graph.atom_features.size() != static_cast<size_t>(n) * kAtomFeatureCount) {
    throw DataError("encode_drug: graph has no atom features");
  }
  Var<T> x;
  if constexpr (sizeof(T) == 8) {
    x = tape.constant_view({n, kAtomFeatureCount}, graph.atom_features.data());
  } else {
    std::vector<T> converted(graph.atom_features.begin(), graph.atom_features.end());
    x = tape.constant({n, kAtomFeatureCount}, converted.data());
  }
  return global_max_pool(gcn_forward(tape, x, norm_adjacency,
                                     std::span<const Var<T>>(bound.gcn_w)));
}

template <class T>
Var<T> encode_target(Tape<T>& tape, const std::vector<int>& tokens, const BoundModel<T>& bound) {
  return protein_encode(tape, tokens, bound.protein);
}

struct AdamSettings {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One optimizer step over every bound parameter; step_index is 1-based for
// bias correction. Zero-locked rows are skipped entirely, so their values
// and moments stay exactly zero. Updates are computed in double.
template <class T>
void adam_step(Tape<T>& tape, BoundModel<T>& bound, const AdamSettings& s, int64_t step_index) {
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(step_index));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(step_index));
  for (auto& [param, var] : bound.leaves) {
    const bool has_grad = tape.grad_allocated(var);
    const std::span<T> grads = has_grad ? tape.grad(var) : std::span<T>{};
    const size_t skip =
        param->zero_row0 ? static_cast<size_t>(param->row_width()) : size_t{0};
    for (size_t i = skip; i < param->value.size(); ++i) {
      const double g = has_grad ? static_cast<double>(grads[i]) : 0.0;
      const double m = s.beta1 * static_cast<double>(param->m[i]) + (1.0 - s.beta1) * g;
      const double v = s.beta2 * static_cast<double>(param->v[i]) + (1.0 - s.beta2) * g * g;
      param->m[i] = static_cast<T>(m);
      param->v[i] = static_cast<T>(v);
      const double update = s.lr * (m / bc1) / (std::sqrt(v / bc2) + s.eps);
      param->value[i] = static_cast<T>(static_cast<double>(param->value[i]) - update);
    }
  }
}

}  // namespace dta
