#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pnp/datagen.hpp"
#include "pnp/fastcluster.hpp"
#include "pnp/network.hpp"
#include "pnp/objectives.hpp"
#include "pnp/prototypes.hpp"

namespace pnp {

enum class OmegaForm {
  kCorrected,  // ω_max − (1−ω_min)·(cos(πt/T) + 1)/2
  kPrinted,    // ω_max − (1−ω_min)·cos(πt/T + 1)/2
};

struct TrainConfig {
  // temperatures
  double tau = 0.1;
  double tau_t_start = 0.07;
  double tau_t_end = 0.04;
  std::size_t tau_t_warmup_epochs = 30;
  double tau_r = 1.0;
  double tau_f = 0.6;
  // loss weights
  double gamma = kDefaultGamma;
  double alpha1 = kDefaultAlpha1;
  double beta1 = kDefaultBeta1;
  // teacher EMA
  double omega_min = 0.7;
  double omega_max = 0.99;
  OmegaForm omega_form = OmegaForm::kCorrected;
  // optimization
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr = 0.01;
  double momentum = 0.9;
  // clustering
  std::size_t buffer_multiplier = kDefaultBufferMultiplier;
  std::size_t knn_k = 10;
  int infomap_restarts = 8;
  // architecture
  std::size_t encoder_hidden = 64;
  std::size_t feature_dim = 32;
  std::size_t head_hidden = 64;
  std::size_t proj_dim = 32;
  LayerInit encoder_init = LayerInit::kNearIdentity;
  bool train_last_layer_only = true;
  bool normalize_features = true;
  bool cross_view_denominator = false;
  // augmentation
  AugmentParams augment{0.1, 0.1};
  // seeds
  std::uint64_t seed = 0;          // parameter initialization, clustering
  std::uint64_t shuffle_seed = 0;  // batch order, augmentation
  // ablations
  bool use_potential_prototypes = true;
  bool trainable_potential_prototypes = true;
  bool trainable_cluster_slots = true;
  bool use_ema = true;  // false: teacher copies the student after each step
  bool enable_cru = true;
  bool enable_crl = true;
  bool enable_sup = true;
  bool enable_unsup = true;
  // guards
  double divergence_limit = 1e6;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

double omega_schedule(std::size_t t, std::size_t total, double omega_min, double omega_max,
                      OmegaForm form = OmegaForm::kCorrected);
double lr_schedule(std::size_t step, std::size_t total_steps, double lr0);
// Cosine ramp from start to end over warmup epochs, then held at end.
double tau_t_schedule(std::size_t epoch, std::size_t warmup_epochs, double start, double end);

/// Blends teacher ← ω·teacher + (1−ω)·student elementwise.
void ema_update(Matrix& teacher, const Matrix& student, double omega);
void ema_update(Mlp& teacher, const Mlp& student, double omega);

/// Student prober, teacher prober, projection head and prototype state.
struct ProberState {
  Mlp encoder;          // θ^s
  Mlp teacher_encoder;  // θ^t, only ever written by EMA
  Mlp head;             // projection head h
  PrototypeBank bank;
  MemoryBuffer buffer;          // m^s
  MemoryBuffer teacher_buffer;  // m^t
  std::size_t epoch = 0;        // completed epochs
  std::uint64_t step = 0;       // completed optimizer steps
  std::map<std::string, Matrix> velocity;
};

// Parameter ids used on the gradient tape.
inline const std::string kEncoderPrefix = "encoder";
inline const std::string kHeadPrefix = "head";
inline const std::string kBufferId = "buffer";
inline const std::string kLabelledProtosId = "labelled_protos";

ProberState init_state(const GcdDataset& ds, const TrainConfig& cfg);

/// Training mini-batch. The first `num_labelled` rows are labelled.
struct Batch {
  Matrix view1;
  Matrix view2;
  std::size_t num_labelled = 0;
  std::vector<std::size_t> labels;  // row index into labelled_protos, per labelled row
};

/// Proportional labelled/unlabelled batches for one epoch, each with both
/// groups non-empty. Deterministic in (cfg.shuffle_seed, epoch).
std::vector<Batch> make_batches(const GcdDataset& ds, const TrainConfig& cfg, std::size_t epoch);
std::size_t batches_per_epoch(const GcdDataset& ds, const TrainConfig& cfg);

/// Full objective on one batch. When `tape` is given, adjoints of every
/// student-side trainable parameter are accumulated into it; teacher
/// quantities never receive one.
LossBreakdown compute_objective(const ProberState& state, const Batch& batch,
                                const TrainConfig& cfg, double tau_t, GradientTape* tape);

struct StepSchedule {
  double tau_t = 0.07;
  double omega = 0.99;
  double lr = 0.01;
};

/// One SGD step on the student followed by the EMA teacher update. The
/// adjoints of the step are left in `tape`. Throws DivergenceError when a loss
/// is non-finite or beyond cfg.divergence_limit; the state is then untouched.
LossBreakdown train_step(ProberState& state, const Batch& batch, const TrainConfig& cfg,
                         const StepSchedule& sched, GradientTape& tape);

/// Row-normalizes x, runs the encoder and (optionally) normalizes the output.
Matrix encode(const Mlp& encoder, const Matrix& x, bool normalize_output = true);

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown losses;  // mean over the epoch's steps
  std::size_t k_est = 0;
  double omega = 0.0;
  double lr = 0.0;  // at the epoch's first step
  double tau_t = 0.0;
  std::size_t steps = 0;
  double cluster_ms = 0.0;
  std::vector<double> step_totals;
};

/// One epoch: cluster the unlabelled features, rebuild the buffers, run the
/// mini-batch updates with EMA teacher tracking, write back potential slots.
EpochMetrics train_epoch(ProberState& state, const GcdDataset& ds, const TrainConfig& cfg,
                         std::size_t epoch);

using EpochCallback = std::function<void(const ProberState&, const EpochMetrics&)>;

void train(ProberState& state, const GcdDataset& ds, const TrainConfig& cfg,
           const EpochCallback& on_epoch = {});

/// Cluster unlabelled features with the student encoder only.
ClusterResult infer(const ProberState& state, const Matrix& unlabelled_x, const TrainConfig& cfg);

EstimateKOptions clustering_options(const TrainConfig& cfg, std::uint64_t seed);

}  // namespace pnp
