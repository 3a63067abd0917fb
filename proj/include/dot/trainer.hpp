#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dot/augment.hpp"
#include "dot/layers.hpp"
#include "dot/pdl_loss.hpp"
#include "dot/pixel_distill.hpp"

namespace dot {

/// PD (HD) front end, two conv+BN+relu stages and a 3x3 logit head, with an
/// optional 1x1 auxiliary head after the second stage.
struct ToyNetParams {
  PdParams pd;
  ConvParams stage1, stage2, head, aux;
  BatchNormParams bn1, bn2;
  Grid4 input_mean, input_std;  // (1, 3, 1, 1) standardisation constants
  bool use_aux = true;

  static ToyNetParams init(Rng& rng, bool use_aux = true);
  void set_training(bool on);
  /// Every array, trainable or not, in a stable order.
  NamedGrids named() const;
  std::vector<Grid4> trainable() const;
  Index parameter_count() const;
};

struct ToyNetOutput {
  Grid4 logits;  // (N, 1, H/2, W/2)
  std::optional<Grid4> aux;
};

ToyNetOutput toy_forward(const Grid4& images, ToyNetParams& p);

struct SynthConfig {
  Index n_images = 400;
  Index size = 64;
  Index dots_min = 1;
  Index dots_max = 10;
  double radius_min = 1.0;
  double radius_max = 3.0;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Gaussian blobs on smoothed-noise backgrounds; labels are blob centres.
std::vector<AugSample> synth_dataset(const SynthConfig& cfg);

enum class LossKind { kPdl, kMse };

struct TrainConfig {
  Index steps = 2000;
  Index batch_size = 8;
  double lr = 3e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossWeights loss;
  LossKind loss_kind = LossKind::kPdl;
  bool aux = true;
  double aux_weight = 0.4;
  Index patience = 20;  // epochs without validation L-mAP improvement
  Index n_images = 400;
  Index image_size = 64;
  Index dots_min = 1;
  Index dots_max = 10;
  double val_fraction = 0.2;
  bool augment = true;

  /// Sets one field from its text form; unknown keys and bad values raise
  /// ValidationError.
  void set(const std::string& key, const std::string& value);
  /// key=value lines, one per field, readable by set().
  std::string to_text() const;
  void validate() const;
};

/// Reads `key=value` lines; blank lines and lines starting with '#' are skipped.
std::map<std::string, std::string> read_config_file(const std::string& path);

struct EpochLog {
  Index epoch = 0;
  Index step = 0;  // optimiser steps completed
  double lr = 0.0;
  double loss = 0.0;  // mean training objective over the epoch
  double neg = 0.0, obj = 0.0, reg = 0.0;
  double val_lap5 = 0.0;
  double val_lmap = 0.0;
};

struct TrainResult {
  ToyNetParams model;  // best validation L-mAP (initialisation when no steps ran)
  std::vector<EpochLog> trace;
  double best_val_lmap = 0.0;
  double best_val_lap5 = 0.0;
  Index steps_run = 0;
  bool early_stopped = false;
};

struct ValMetrics {
  double lap5 = 0.0;
  double lmap = 0.0;
};

/// Inference-mode forward, peak extraction, upscaling and L-AP evaluation
/// against image-resolution labels.
ValMetrics evaluate_model(ToyNetParams& model, const std::vector<AugSample>& samples, Index batch_size = 16);

TrainResult train_toy(const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {});

/// Cosine-annealed step size at optimiser step t of total.
double cosine_lr(double lr0, Index t, Index total);

struct Checkpoint {
  NamedGrids arrays;
  std::string config_text;
};

Checkpoint make_checkpoint(const ToyNetParams& model, const TrainConfig& cfg);
/// "DOTC" format: little-endian, named float64 arrays with shapes, then the
/// config snapshot. Errors carry the byte offset.
void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);
/// Copies checkpoint arrays into a freshly initialised model.
ToyNetParams model_from_checkpoint(const Checkpoint& ck);

}  // namespace dot
