// SPDX-License-Identifier: Apache-2.0
//
// Training orchestration: fold selection, per-step batch pipeline (each
// unique drug and target encoded once per batch), joint loss with seeded
// per-step noise, Adam updates, per-epoch validation and TSV logs,
// resumable checkpoints with best-snapshot selection, deterministic
// forward-only evaluation, the ablation grids, and a finite-difference
// check of the full joint loss on a synthetic micro-batch.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dta/checkpoint.hpp"
#include "dta/config.hpp"
#include "dta/dataset.hpp"
#include "dta/errors.hpp"
#include "dta/gcn.hpp"
#include "dta/gradcheck.hpp"
#include "dta/losses.hpp"
#include "dta/metrics.hpp"
#include "dta/model.hpp"

namespace dta {

inline constexpr const char* kEpochLogHeader =
    "epoch\tL_mse\tL_gcl\tL_uniform_d\tL_uniform_t\tL_joint\tval_mse\tval_ci\tval_r2m";

// Per-step noise streams are keyed by (seed, this tag, epoch, step), so a
// resumed run re-derives the exact draws of an uninterrupted one.
inline constexpr uint64_t kNoiseStreamTag = 0x4e4f495345ull;

struct EpochLogRow {
  int epoch = 0;
  double l_mse = 0.0;
  double l_gcl = 0.0;
  double l_uniform_d = 0.0;
  double l_uniform_t = 0.0;
  double l_joint = 0.0;
  double val_mse = 0.0;
  double val_ci = 0.0;   // NaN when the validation set has no comparable pair
  double val_r2m = 0.0;  // NaN when fewer than 3 points or zero variance
};

struct TrainOptions {
  // -1 trains on every sample and validates on the same set; 0..4 selects
  // a cross-validation fold of the seeded split.
  int fold = -1;
  // Checkpoint to continue from; empty starts from seeded initialization.
  std::string resume_from;
  // When positive, stop after completing this epoch even if the config
  // asks for more; the checkpoint stays resumable, so this stands in for
  // an interrupted run.
  int stop_after_epoch = 0;
  // Sink for progress and warning lines; never required.
  std::function<void(const std::string&)> info;
};

struct TrainResult {
  // Rows produced by this call (a resumed run excludes restored epochs).
  std::vector<EpochLogRow> log;
  double best_val_mse = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::string last_checkpoint_path;
  std::string best_checkpoint_path;
  std::string log_path;
  // Validation metrics captured at the best epoch; meaningful only when
  // the best epoch falls inside this call's rows.
  MetricsReport best_validation;
};

// NaN-safe log field: format_double round-trips every finite value and
// infinity but cannot round-trip NaN through equality.
inline std::string format_log_value(double v) {
  return std::isnan(v) ? "nan" : format_double(v);
}

// Unique drugs and targets of one batch in first-appearance order, plus
// each sample's row in the corresponding representation matrix.
struct BatchPlan {
  std::vector<int> drugs;
  std::vector<int> targets;
  std::vector<int> drug_slot;
  std::vector<int> target_slot;
};

inline BatchPlan plan_batch(const Dataset& ds, const std::vector<int>& samples) {
  BatchPlan plan;
  std::vector<int> drug_of(static_cast<size_t>(ds.drug_count()), -1);
  std::vector<int> target_of(static_cast<size_t>(ds.target_count()), -1);
  plan.drug_slot.reserve(samples.size());
  plan.target_slot.reserve(samples.size());
  for (int index : samples) {
    const AffinitySample& s = ds.samples[static_cast<size_t>(index)];
    int& dslot = drug_of[static_cast<size_t>(s.drug)];
    if (dslot < 0) {
      dslot = static_cast<int>(plan.drugs.size());
      plan.drugs.push_back(s.drug);
    }
    int& tslot = target_of[static_cast<size_t>(s.target)];
    if (tslot < 0) {
      tslot = static_cast<int>(plan.targets.size());
      plan.targets.push_back(s.target);
    }
    plan.drug_slot.push_back(dslot);
    plan.target_slot.push_back(tslot);
  }
  return plan;
}

inline void require_token_cache(const Dataset& ds, int max_len) {
  if (ds.target_tokens.size() != ds.target_sequences.size()) {
    throw ConfigError("dataset token cache is missing; call build_token_cache first");
  }
  for (const auto& tokens : ds.target_tokens) {
    if (tokens.size() != static_cast<size_t>(max_len)) {
      throw ConfigError("dataset token cache length does not match protein_max_len");
    }
  }
}

// One batch through both encoders and the head. Representations of
// repeated entities are computed once and gathered per sample.
template <class T>
struct BatchForward {
  BatchPlan plan;
  Var<T> d_unique;     // [U x drug_dim]
  Var<T> t_unique;     // [V x target_dim]
  Var<T> predictions;  // [m x 1]
};

template <class T>
BatchForward<T> forward_batch(Tape<T>& tape, const Dataset& ds,
                              const std::vector<int>& samples, const BoundModel<T>& bound) {
  if (samples.empty()) throw DataError("forward_batch: empty batch");
  BatchForward<T> f;
  f.plan = plan_batch(ds, samples);
  std::vector<Var<T>> drows;
  drows.reserve(f.plan.drugs.size());
  for (int drug : f.plan.drugs) {
    drows.push_back(encode_drug(tape, ds.drug_graphs[static_cast<size_t>(drug)],
                                ds.drug_norm_adjacency[static_cast<size_t>(drug)], bound));
  }
  std::vector<Var<T>> trows;
  trows.reserve(f.plan.targets.size());
  for (int target : f.plan.targets) {
    trows.push_back(encode_target(tape, ds.target_tokens[static_cast<size_t>(target)], bound));
  }
  f.d_unique = concat_rows(std::span<const Var<T>>(drows));
  f.t_unique = concat_rows(std::span<const Var<T>>(trows));
  Var<T> d = gather_rows(f.d_unique, f.plan.drug_slot);
  Var<T> t = gather_rows(f.t_unique, f.plan.target_slot);
  f.predictions = predict_affinity(d, t, bound.head);
  return f;
}

// Identifies the noise stream of one optimizer step; fixed buffers, when
// present, bypass the draw so a finite-difference sweep sees the noise as
// a constant of the loss.
template <class T>
struct StepContext {
  uint64_t epoch = 0;
  uint64_t step = 0;
  const std::vector<T>* fixed_noise_first = nullptr;
  const std::vector<T>* fixed_noise_second = nullptr;
  std::function<void(const std::string&)> warn;
};

template <class T>
struct BatchLoss {
  BatchForward<T> forward;
  Var<T> l_mse;
  Var<T> l_gcl;
  Var<T> l_uniform_d;
  Var<T> l_uniform_t;
  Var<T> l_joint;
};

// Full training loss of one batch. Contrastive views add radius-epsilon
// noise to each unique drug row, drawn inside that row's hyperoctant from
// the step's seeded stream; alpha = 0 and beta = 0 skip building the
// corresponding graphs entirely.
template <class T>
BatchLoss<T> batch_loss(Tape<T>& tape, const Dataset& ds, const std::vector<int>& samples,
                        const BoundModel<T>& bound, const RunConfig& config,
                        const LossWeights& weights, const StepContext<T>& ctx) {
  BatchLoss<T> out;
  out.forward = forward_batch(tape, ds, samples, bound);

  std::vector<T> labels;
  labels.reserve(samples.size());
  for (int index : samples) {
    labels.push_back(static_cast<T>(ds.samples[static_cast<size_t>(index)].affinity));
  }
  Var<T> label_var = tape.constant({static_cast<int>(labels.size()), 1}, labels.data());
  out.l_mse = mse_loss(out.forward.predictions, label_var);

  if (config.alpha == 0.0) {
    out.l_gcl = tape.constant_scalar(T(0));
  } else {
    const int rows = static_cast<int>(out.forward.plan.drugs.size());
    const int width = config.drug_dim;
    const size_t total = static_cast<size_t>(rows) * static_cast<size_t>(width);
    Var<T> first, second;
    if (ctx.fixed_noise_first != nullptr) {
      if (ctx.fixed_noise_first->size() != total || ctx.fixed_noise_second == nullptr ||
          ctx.fixed_noise_second->size() != total) {
        throw ConfigError("batch_loss: fixed noise size does not match the drug matrix");
      }
      first = tape.constant({rows, width}, ctx.fixed_noise_first->data());
      second = tape.constant({rows, width}, ctx.fixed_noise_second->data());
    } else {
      const std::span<const T> values = tape.data(out.forward.d_unique);
      std::vector<T> noise_first(total), noise_second(total);
      Rng rng = derive_stream(config.seed, {kNoiseStreamTag, ctx.epoch, ctx.step});
      for (int r = 0; r < rows; ++r) {
        const std::span<const T> row = values.subspan(
            static_cast<size_t>(r) * static_cast<size_t>(width), static_cast<size_t>(width));
        auto pair = sample_noise_pair(row, config.epsilon, rng);
        std::copy(pair.first.begin(), pair.first.end(),
                  noise_first.begin() + static_cast<std::ptrdiff_t>(r) * width);
        std::copy(pair.second.begin(), pair.second.end(),
                  noise_second.begin() + static_cast<std::ptrdiff_t>(r) * width);
      }
      first = tape.constant({rows, width}, noise_first.data());
      second = tape.constant({rows, width}, noise_second.data());
    }
    out.l_gcl = contrastive_loss(add(out.forward.d_unique, first),
                                 add(out.forward.d_unique, second), config.tau,
                                 config.cosine_similarity);
  }

  if (config.beta == 0.0) {
    out.l_uniform_d = tape.constant_scalar(T(0));
    out.l_uniform_t = tape.constant_scalar(T(0));
  } else {
    out.l_uniform_d = uniformity_term(tape, out.forward.d_unique, ctx.warn);
    out.l_uniform_t = uniformity_term(tape, out.forward.t_unique, ctx.warn);
  }

  out.l_joint = joint_loss(out.l_mse, out.l_gcl, out.l_uniform_d, out.l_uniform_t, weights);
  return out;
}

// Forward-only predictions over fixed-order chunks; no noise is involved,
// so the output is a pure function of parameters and data.
template <class T>
std::vector<double> predict_affinities(Model<T>& model, const Dataset& ds,
                                       const std::vector<int>& indices, int batch_size) {
  if (batch_size <= 0) throw ConfigError("predict_affinities: batch_size must be positive");
  std::vector<double> out;
  out.reserve(indices.size());
  for (size_t pos = 0; pos < indices.size(); pos += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(indices.size(), pos + static_cast<size_t>(batch_size));
    const std::vector<int> chunk(indices.begin() + static_cast<std::ptrdiff_t>(pos),
                                 indices.begin() + static_cast<std::ptrdiff_t>(end));
    Tape<T> tape;
    BoundModel<T> bound = model.bind(tape);
    BatchForward<T> f = forward_batch(tape, ds, chunk, bound);
    for (const T v : tape.data(f.predictions)) out.push_back(static_cast<double>(v));
  }
  return out;
}

// Per-epoch validation row: MSE is always defined; CI and r2m degrade to
// NaN when the set cannot support them instead of aborting the run.
struct ValidationMetrics {
  double mse = 0.0;
  double ci = std::numeric_limits<double>::quiet_NaN();
  double r2m = std::numeric_limits<double>::quiet_NaN();
  int64_t n = 0;
  int64_t comparable_pairs = 0;
  bool r2m_clamped = false;
};

inline ValidationMetrics validation_metrics(std::span<const double> predictions,
                                            std::span<const double> affinities) {
  ValidationMetrics v;
  v.mse = mse_metric(predictions, affinities);
  v.n = static_cast<int64_t>(predictions.size());
  try {
    const CiResult ci = concordance_index(predictions, affinities);
    v.ci = ci.ci;
    v.comparable_pairs = ci.comparable_pairs;
  } catch (const DataError&) {
  }
  try {
    const R2mResult r = r_squared_m(predictions, affinities);
    v.r2m = r.r2m;
    v.r2m_clamped = r.clamped;
  } catch (const DataError&) {
  }
  return v;
}

// Checkpoint metadata: one JSON object per training state. best_val_mse
// travels as canonical text because JSON numbers cannot carry infinity.
std::string train_metadata_json(int epoch, int64_t step, const RunConfig& config,
                                double best_val_mse, int best_epoch);

struct TrainStateMeta {
  int epoch = 0;
  int64_t step = 0;
  uint64_t seed = 0;
  std::string precision;
  std::string config_digest;
  int best_epoch = -1;
  double best_val_mse = std::numeric_limits<double>::infinity();
};

// Throws DataError when the metadata is not a training state.
TrainStateMeta parse_train_metadata(const std::string& text);

template <class T>
TrainResult train_typed(const RunConfig& config, const Dataset& ds, const TrainOptions& opts) {
  config.validate();
  LossWeights weights;
  weights.alpha = config.alpha;
  weights.beta = config.beta;
  weights.tau = config.tau;
  weights.epsilon = config.epsilon;
  weights.cosine_similarity = config.cosine_similarity;
  weights.validate();
  require_token_cache(ds, config.protein_max_len);
  if (ds.sample_count() == 0) throw DataError("train: dataset has no samples");

  std::vector<int> train_indices, val_indices;
  if (opts.fold == -1) {
    train_indices.resize(static_cast<size_t>(ds.sample_count()));
    std::iota(train_indices.begin(), train_indices.end(), 0);
    val_indices = train_indices;
  } else if (opts.fold >= 0 && opts.fold < 5) {
    const SplitPlan plan = make_split(ds.sample_count(), config.seed);
    train_indices = plan.fold_train(opts.fold);
    val_indices = plan.fold_validation(opts.fold);
  } else {
    throw ConfigError("train: fold must be -1 for the full set or 0..4");
  }
  if (train_indices.empty() || val_indices.empty()) {
    throw DataError("train: split produced an empty subset");
  }

  std::vector<double> val_labels;
  val_labels.reserve(val_indices.size());
  for (int index : val_indices) {
    val_labels.push_back(ds.samples[static_cast<size_t>(index)].affinity);
  }

  Model<T> model(model_dims_from(config));
  AdamSettings adam;
  adam.lr = config.learning_rate;

  int start_epoch = 1;
  int64_t step = 0;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  TrainResult result;
  result.last_checkpoint_path = (fs::path(config.out_dir) / "last.ckpt").string();
  result.best_checkpoint_path = (fs::path(config.out_dir) / "best.ckpt").string();
  result.log_path = (fs::path(config.out_dir) / "train_log.tsv").string();

  const std::string digest = config_digest(config);
  if (opts.resume_from.empty()) {
    model.init(config.seed);
  } else {
    const Checkpoint ck = load_checkpoint(opts.resume_from);
    const TrainStateMeta meta = parse_train_metadata(ck.metadata);
    if (meta.config_digest != digest) {
      throw ConfigError("resume: checkpoint config digest " + meta.config_digest +
                        " does not match this config (" + digest + ")");
    }
    if (meta.precision != config.precision) {
      throw ConfigError("resume: checkpoint precision " + meta.precision +
                        " does not match config precision " + config.precision);
    }
    model.params().load_from(ck);
    start_epoch = meta.epoch + 1;
    step = meta.step;
    best = meta.best_val_mse;
    best_epoch = meta.best_epoch;
  }

  std::ofstream log(result.log_path,
                    opts.resume_from.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("train: cannot open log file " + result.log_path);
  if (opts.resume_from.empty()) log << kEpochLogHeader << '\n';

  for (int epoch = start_epoch; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train_indices, config.batch_size, config.seed, epoch);
    double sum_mse = 0.0, sum_gcl = 0.0, sum_ud = 0.0, sum_ut = 0.0, sum_joint = 0.0;
    int step_in_epoch = 0;
    for (const auto& batch : batches) {
      ++step_in_epoch;
      Tape<T> tape;
      BoundModel<T> bound = model.bind(tape);
      StepContext<T> ctx;
      ctx.epoch = static_cast<uint64_t>(epoch);
      ctx.step = static_cast<uint64_t>(step_in_epoch);
      ctx.warn = opts.info;
      BatchLoss<T> loss = batch_loss(tape, ds, batch, bound, config, weights, ctx);
      tape.backward(loss.l_joint);
      ++step;
      adam_step(tape, bound, adam, step);
      sum_mse += static_cast<double>(tape.value(loss.l_mse));
      sum_gcl += static_cast<double>(tape.value(loss.l_gcl));
      sum_ud += static_cast<double>(tape.value(loss.l_uniform_d));
      sum_ut += static_cast<double>(tape.value(loss.l_uniform_t));
      sum_joint += static_cast<double>(tape.value(loss.l_joint));
    }

    const double steps = static_cast<double>(batches.size());
    EpochLogRow row;
    row.epoch = epoch;
    row.l_mse = sum_mse / steps;
    row.l_gcl = sum_gcl / steps;
    row.l_uniform_d = sum_ud / steps;
    row.l_uniform_t = sum_ut / steps;
    row.l_joint = sum_joint / steps;

    const std::vector<double> val_preds =
        predict_affinities(model, ds, val_indices, config.batch_size);
    const ValidationMetrics val = validation_metrics(val_preds, val_labels);
    row.val_mse = val.mse;
    row.val_ci = val.ci;
    row.val_r2m = val.r2m;

    log << row.epoch << '\t' << format_log_value(row.l_mse) << '\t'
        << format_log_value(row.l_gcl) << '\t' << format_log_value(row.l_uniform_d) << '\t'
        << format_log_value(row.l_uniform_t) << '\t' << format_log_value(row.l_joint) << '\t'
        << format_log_value(row.val_mse) << '\t' << format_log_value(row.val_ci) << '\t'
        << format_log_value(row.val_r2m) << '\n';
    log.flush();
    result.log.push_back(row);

    const bool improved = row.val_mse < best;
    if (improved) {
      best = row.val_mse;
      best_epoch = epoch;
      result.best_validation.mse = val.mse;
      result.best_validation.ci = val.ci;
      result.best_validation.r2m = val.r2m;
      result.best_validation.n = val.n;
      result.best_validation.comparable_pairs = val.comparable_pairs;
      result.best_validation.r2m_clamped = val.r2m_clamped;
      result.best_validation.config_digest = digest;
    }
    const std::string metadata = train_metadata_json(epoch, step, config, best, best_epoch);
    save_checkpoint(result.last_checkpoint_path, model.params().to_checkpoint(metadata));
    if (improved) {
      save_checkpoint(result.best_checkpoint_path, model.params().to_checkpoint(metadata));
    }
    if (opts.info) {
      opts.info("epoch " + std::to_string(epoch) + " joint " + format_log_value(row.l_joint) +
                " val_mse " + format_log_value(row.val_mse));
    }
    if (opts.stop_after_epoch > 0 && epoch >= opts.stop_after_epoch) break;
  }

  result.best_val_mse = best;
  result.best_epoch = best_epoch;
  return result;
}

inline TrainResult train(const RunConfig& config, const Dataset& ds,
                         const TrainOptions& opts = {}) {
  config.validate();
  if (config.precision == "float32") return train_typed<float>(config, ds, opts);
  return train_typed<double>(config, ds, opts);
}

// Strict evaluation: every metric must be defined over the set, and the
// report carries the config digest of the evaluating configuration.
template <class T>
MetricsReport evaluate_on(Model<T>& model, const Dataset& ds, const std::vector<int>& indices,
                          const RunConfig& config) {
  if (indices.empty()) throw DataError("evaluate: empty evaluation set");
  require_token_cache(ds, config.protein_max_len);
  const std::vector<double> predictions =
      predict_affinities(model, ds, indices, config.batch_size);
  std::vector<double> affinities;
  affinities.reserve(indices.size());
  for (int index : indices) {
    affinities.push_back(ds.samples[static_cast<size_t>(index)].affinity);
  }
  return compute_metrics(predictions, affinities, config_digest(config));
}

// Loads parameters from a checkpoint (shape and scalar type must match
// the config's model) and evaluates the index set. Checkpoint metadata is
// not consulted: a state may be evaluated under any compatible config.
template <class T>
MetricsReport evaluate_checkpoint_typed(const RunConfig& config, const Dataset& ds,
                                        const std::vector<int>& indices,
                                        const std::string& checkpoint_path) {
  config.validate();
  Model<T> model(model_dims_from(config));
  model.params().load_from(load_checkpoint(checkpoint_path));
  return evaluate_on(model, ds, indices, config);
}

inline MetricsReport evaluate_checkpoint(const RunConfig& config, const Dataset& ds,
                                         const std::vector<int>& indices,
                                         const std::string& checkpoint_path) {
  config.validate();
  if (config.precision == "float32") {
    return evaluate_checkpoint_typed<float>(config, ds, indices, checkpoint_path);
  }
  return evaluate_checkpoint_typed<double>(config, ds, indices, checkpoint_path);
}

enum class AblationMode { kAlphaOff, kBetaSweep };

struct AblationRow {
  std::string label;
  double alpha = 0.0;
  double beta = 0.0;
  std::string config_digest;
  int best_epoch = -1;
  double best_val_mse = std::numeric_limits<double>::quiet_NaN();
  MetricsReport metrics;
};

struct AblationTable {
  std::string mode;
  std::vector<AblationRow> rows;
};

// Grid values: alpha-off compares the contrastive term against its
// absence; beta-sweep walks the documented uniformity-weight interval.
inline std::vector<double> ablation_grid(AblationMode mode, const RunConfig& base) {
  if (mode == AblationMode::kAlphaOff) return {0.0, base.alpha};
  return {0.0, 0.01, 0.1, 0.5, 1.0};
}

inline AblationTable ablate(const RunConfig& base, AblationMode mode, const Dataset& ds,
                            int fold = -1,
                            const std::function<void(const std::string&)>& info = {}) {
  base.validate();
  AblationTable table;
  table.mode = mode == AblationMode::kAlphaOff ? "alpha-off" : "beta-sweep";
  const std::vector<double> grid = ablation_grid(mode, base);
  namespace fs = std::filesystem;
  for (size_t i = 0; i < grid.size(); ++i) {
    RunConfig config = base;
    std::string key;
    if (mode == AblationMode::kAlphaOff) {
      config.alpha = grid[i];
      key = "alpha=" + format_double(grid[i]);
    } else {
      config.beta = grid[i];
      key = "beta=" + format_double(grid[i]);
    }
    std::string dir_name = std::to_string(i) + "_" + key;
    for (char& c : dir_name) {
      if (c == '=') c = '_';
    }
    config.out_dir = (fs::path(base.out_dir) / table.mode / dir_name).string();
    if (info) info("ablation run " + key);
    TrainOptions opts;
    opts.fold = fold;
    opts.info = info;
    const TrainResult run = train(config, ds, opts);
    AblationRow row;
    row.label = key;
    row.alpha = config.alpha;
    row.beta = config.beta;
    row.config_digest = config_digest(config);
    row.best_epoch = run.best_epoch;
    row.best_val_mse = run.best_val_mse;
    row.metrics = run.best_validation;
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Merged delimited table, one row per grid setting.
inline std::string ablation_table_tsv(const AblationTable& table) {
  std::string out =
      "mode\tsetting\talpha\tbeta\tconfig_digest\tbest_epoch\tval_mse\tval_ci\tval_r2m\tn\n";
  for (const AblationRow& row : table.rows) {
    out += table.mode;
    out += '\t';
    out += row.label;
    out += '\t';
    out += format_log_value(row.alpha);
    out += '\t';
    out += format_log_value(row.beta);
    out += '\t';
    out += row.config_digest;
    out += '\t';
    out += std::to_string(row.best_epoch);
    out += '\t';
    out += format_log_value(row.metrics.mse);
    out += '\t';
    out += format_log_value(row.metrics.ci);
    out += '\t';
    out += format_log_value(row.metrics.r2m);
    out += '\t';
    out += std::to_string(row.metrics.n);
    out += '\n';
  }
  return out;
}

// Four parseable drugs and two targets, every pair labeled: small enough
// that a finite-difference sweep over every coordinate stays fast, large
// enough that every loss term and both encoders are exercised. Sequences
// fill the encoder window exactly: zero-initialized biases make padded
// positions sit on the ReLU kink, where central differences and the
// subgradient legitimately disagree.
inline Dataset gradcheck_dataset() {
  const std::array<const char*, 4> smiles = {"CCO", "c1ccccc1", "CC(=O)O", "C1CCCCC1"};
  const std::array<const char*, 2> sequences = {"MKTAYIAKQRQISFVKSHFSRQLEERLGLIEV",
                                                "GSHMADEEKLPPGWEKRMSRSSGRVYYFNHIT"};
  const std::array<double, 8> affinities = {6.1, 4.3, 7.2, 5.5, 4.9, 6.8, 5.2, 7.9};
  Dataset ds;
  for (size_t i = 0; i < smiles.size(); ++i) {
    ds.drug_ids.push_back("D" + std::to_string(i));
    ds.drug_smiles.push_back(smiles[i]);
    MolecularGraph graph = parse_smiles(smiles[i]);
    ds.drug_norm_adjacency.push_back(normalize_adjacency(graph.adjacency, graph.atom_count()));
    ds.drug_graphs.push_back(std::move(graph));
  }
  for (size_t i = 0; i < sequences.size(); ++i) {
    ds.target_ids.push_back("T" + std::to_string(i));
    ds.target_sequences.push_back(sequences[i]);
  }
  for (int drug = 0; drug < 4; ++drug) {
    for (int target = 0; target < 2; ++target) {
      ds.samples.push_back(
          {drug, target, affinities[static_cast<size_t>(drug * 2 + target)]});
    }
  }
  return ds;
}

// Central-difference verification of the full joint-loss gradient over
// every parameter coordinate, on a synthetic micro-batch with small
// dimensions. Loss weights, seed, and layer count come from the given
// config; precision is always double, the only width where the probe
// step is meaningful. Noise is drawn once at the base point and held
// fixed, so the swept loss is a deterministic function of parameters.
inline GradCheckReport run_gradcheck(const RunConfig& base) {
  RunConfig config = base;
  config.precision = "float64";
  config.drug_dim = 8;
  config.target_dim = 8;
  config.protein_embed_dim = 8;
  config.protein_max_len = 32;
  config.conv_channels = {4, 5, 6};
  config.conv_kernel = 8;
  config.batch_size = 8;
  config.validate();
  LossWeights weights;
  weights.alpha = config.alpha;
  weights.beta = config.beta;
  weights.tau = config.tau;
  weights.epsilon = config.epsilon;
  weights.cosine_similarity = config.cosine_similarity;
  weights.validate();

  Dataset ds = gradcheck_dataset();
  ds.build_token_cache(config.protein_max_len);
  std::vector<int> batch(ds.samples.size());
  std::iota(batch.begin(), batch.end(), 0);

  Model<double> model(model_dims_from(config));
  model.init(config.seed);

  // Base-point noise, reused by every evaluation of the swept loss.
  std::vector<double> noise_first, noise_second;
  {
    Tape<double> tape;
    BoundModel<double> bound = model.bind(tape);
    BatchForward<double> f = forward_batch(tape, ds, batch, bound);
    const std::span<const double> values = tape.data(f.d_unique);
    const int width = config.drug_dim;
    const int rows = static_cast<int>(f.plan.drugs.size());
    noise_first.assign(values.size(), 0.0);
    noise_second.assign(values.size(), 0.0);
    Rng rng = derive_stream(config.seed, {kNoiseStreamTag, 0, 0});
    for (int r = 0; r < rows; ++r) {
      const std::span<const double> row = values.subspan(
          static_cast<size_t>(r) * static_cast<size_t>(width), static_cast<size_t>(width));
      auto pair = sample_noise_pair(row, config.epsilon, rng);
      std::copy(pair.first.begin(), pair.first.end(),
                noise_first.begin() + static_cast<std::ptrdiff_t>(r) * width);
      std::copy(pair.second.begin(), pair.second.end(),
                noise_second.begin() + static_cast<std::ptrdiff_t>(r) * width);
    }
  }

  const auto loss_value = [&]() {
    Tape<double> tape;
    BoundModel<double> bound = model.bind(tape);
    StepContext<double> ctx;
    ctx.fixed_noise_first = &noise_first;
    ctx.fixed_noise_second = &noise_second;
    const BatchLoss<double> loss = batch_loss(tape, ds, batch, bound, config, weights, ctx);
    return static_cast<double>(tape.value(loss.l_joint));
  };

  // Analytic gradients at the base point, one snapshot per parameter.
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    BoundModel<double> bound = model.bind(tape);
    StepContext<double> ctx;
    ctx.fixed_noise_first = &noise_first;
    ctx.fixed_noise_second = &noise_second;
    const BatchLoss<double> loss = batch_loss(tape, ds, batch, bound, config, weights, ctx);
    tape.backward(loss.l_joint);
    for (auto& [param, var] : bound.leaves) {
      if (tape.grad_allocated(var)) {
        const std::span<const double> g = tape.grad(var);
        analytic.emplace_back(g.begin(), g.end());
      } else {
        analytic.emplace_back(param->value.size(), 0.0);
      }
    }
  }

  GradCheckReport report;
  size_t group = 0;
  for (Param<double>& param : model.params().all()) {
    report.groups.push_back(finite_diff_group(param.name, std::span<double>(param.value),
                                              std::span<const double>(analytic[group]),
                                              loss_value));
    ++group;
  }
  return report;
}

}  // namespace dta
