#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rode/ccm.hpp"
#include "rode/clustering.hpp"
#include "rode/dataset.hpp"
#include "rode/encoder.hpp"
#include "rode/objectives.hpp"
#include "rode/ral.hpp"

namespace rode {

enum class ModelId : std::uint8_t { A = 0, B = 1 };
inline std::size_t index_of(ModelId z) { return static_cast<std::size_t>(z); }
inline ModelId peer(ModelId z) { return z == ModelId::A ? ModelId::B : ModelId::A; }

struct ModelState {
  ModelId id = ModelId::A;
  EncoderSet encoders;           // indexed by modality
  std::optional<BankSet> banks;  // set once the model has clustered its features

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct Ablation {
  bool ral_intra = true;
  bool ral_inter = true;
  bool ccm_cross_modal = true;
  bool ccm_cross_model = true;
  bool single_model = false;  // train and evaluate model A alone on its own labels
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double lr = 3.5e-4;
  double lr_decay_factor = 10.0;
  int lr_decay_period = 25;
  int warmup_epochs = 2;
  std::uint64_t seed_a = 1;
  std::uint64_t seed_b = 2;
  std::uint64_t shuffle_seed = 0;
  // Both models start from a shared base (the pretrained-backbone analog)
  // plus init_spread times a model-specific draw of the same distribution.
  std::uint64_t init_seed = 0;
  double init_spread = 0.5;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 0;  // 0: affine projector
  double lambda = 0.6;
  double eta = 0.15;
  double tau = 0.05;
  RalConfig ral;
  DbscanConfig dbscan;
  Ablation ablation;
  std::optional<double> fixed_gamma;  // replaces the adaptive exponents when set
  double label_noise = 0.0;           // fraction of pseudo-labels flipped for diagnostics
  double feature_jitter = 0.0;        // Gaussian jitter on training inputs; 0 disables
};

void validate(const TrainConfig& config);

// lr0 * factor^(-floor(epoch / period)), epoch counted from 0.
double learning_rate(const TrainConfig& config, int epoch);

ModelState init_model(ModelId id, std::size_t input_dim, const TrainConfig& config);

// Per (model, modality) record of one epoch.
struct ModalityLog {
  int clusters = 0;
  std::size_t noise_points = 0;
  std::vector<int> own_labels;          // clustering output, before noise injection
  std::vector<bool> flipped;            // own labels changed by noise injection
  std::vector<int> intra_targets;       // labels the model trained on (its bank index space)
  std::vector<int> inter_targets;
  std::vector<bool> target_flipped;     // whether the provider flipped that target
  std::vector<bool> target_noisy;       // flipped or wrong by identity; filled by the harness
  std::vector<double> diagnostic_loss;  // gamma-free loss fed to the mixture fit
  std::vector<double> gammas;
  bool gmm_degenerate = false;
  GmmParams gmm;
};

struct ModelEpochLog {
  bool trained = false;
  double mean_batch_loss = 0.0;
  double intra_term = 0.0;
  double inter_term = 0.0;
  std::size_t clamped = 0;
  std::vector<double> batch_losses;
  std::array<ModalityLog, 2> modality;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  std::array<ModelEpochLog, 2> models;
  // Visible (P) against infrared (Q), per model.
  std::array<std::optional<Matching>, 2> cross_modal;
  // Model A (P) against model B (Q), per modality.
  std::array<std::optional<Matching>, 2> cross_model;
};

struct WarmupLog {
  std::vector<double> batch_losses;
  std::vector<int> epoch_clusters;  // visible + infrared counts per warm-up epoch
};

struct RunLog {
  std::array<WarmupLog, 2> warmup;
  std::vector<EpochLog> epochs;
};

struct TrainingState {
  ModelState a;
  ModelState b;
  std::uint64_t step = 0;

  const ModelState& model(ModelId z) const { return z == ModelId::A ? a : b; }
  ModelState& model(ModelId z) { return z == ModelId::A ? a : b; }

  friend bool operator==(const TrainingState&, const TrainingState&) = default;
};

// Self-training with cross-entropy on the model's own labels.
ModelState warm_up(const ModelState& model, const Dataset& dataset, const TrainConfig& config,
                   int epochs, WarmupLog* log = nullptr);

// One co-training epoch. The input state is never modified, so a failed epoch
// leaves the caller's models untouched.
TrainingState train_epoch(const TrainingState& state, const Dataset& dataset,
                          const TrainConfig& config, int epoch, EpochLog* log = nullptr);

struct TrainResult {
  TrainingState state;
  RunLog log;
};

TrainResult train(const Dataset& dataset, const TrainConfig& config);

// Versioned text checkpoint holding both models' encoders and banks.
void save_checkpoint(const TrainingState& state, const std::filesystem::path& path);
TrainingState load_checkpoint(const std::filesystem::path& path);

}  // namespace rode
