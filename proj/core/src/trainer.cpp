#include "pnp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {

namespace {

constexpr std::uint64_t kPoolStream = 0x706f74ULL;
constexpr std::uint64_t kLabelledStream = 0x6c6162ULL;
constexpr std::uint64_t kNetStream = 0x6e6574ULL;
constexpr std::uint64_t kBatchStream = 0x626174ULL;
constexpr std::uint64_t kClusterStream = 0x636c75ULL;
constexpr std::uint64_t kInferStream = 0x696e66ULL;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

Matrix normalized_rows(const Matrix& x) { return l2_normalize_rows(x); }

void add_rows(Matrix& dst, std::size_t offset, const Matrix& src) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    auto d = dst.row(offset + r);
    auto s = src.row(r);
    for (std::size_t c = 0; c < s.size(); ++c) d[c] += s[c];
  }
}

void sgd_update(Matrix& param, const Matrix& grad, Matrix& velocity, double lr, double momentum) {
  if (velocity.rows() != param.rows() || velocity.cols() != param.cols())
    velocity = Matrix(param.rows(), param.cols());
  auto p = param.values();
  auto g = grad.values();
  auto v = velocity.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

void apply_gradients(ProberState& state, const GradientTape& tape, const TrainConfig& cfg,
                     double lr) {
  auto update = [&](Matrix& param, const std::string& id) {
    if (!tape.contains(id)) return;
    sgd_update(param, tape.get(id), state.velocity[id], lr, cfg.momentum);
  };
  for (std::size_t i = 0; i < state.encoder.layers().size(); ++i) {
    update(state.encoder.layers()[i].weight, weight_id(kEncoderPrefix, i));
    update(state.encoder.layers()[i].bias, bias_id(kEncoderPrefix, i));
  }
  for (std::size_t i = 0; i < state.head.layers().size(); ++i) {
    update(state.head.layers()[i].weight, weight_id(kHeadPrefix, i));
    update(state.head.layers()[i].bias, bias_id(kHeadPrefix, i));
  }
  update(state.bank.labelled_protos, kLabelledProtosId);

  if (tape.contains(kBufferId)) {
    Matrix g = tape.get(kBufferId);
    const std::size_t ke = state.buffer.cluster_slots;
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const bool trainable = r < ke ? cfg.trainable_cluster_slots
                                    : cfg.trainable_potential_prototypes;
      if (!trainable)
        for (double& v : g.row(r)) v = 0.0;
    }
    sgd_update(state.buffer.slots, g, state.velocity[kBufferId], lr, cfg.momentum);
  }
}

bool diverged(const LossBreakdown& l, double limit) {
  for (double v : {l.l_cru, l.l_crl, l.l_sup, l.l_unsup, l.total})
    if (!std::isfinite(v) || std::abs(v) > limit) return true;
  return false;
}

std::string describe(const LossBreakdown& l) {
  std::ostringstream os;
  os << "l_cru=" << l.l_cru << " l_crl=" << l.l_crl << " l_sup=" << l.l_sup
     << " l_unsup=" << l.l_unsup << " total=" << l.total;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  require(tau > 0.0 && tau_t_start > 0.0 && tau_t_end > 0.0 && tau_r > 0.0,
          "all temperatures must be > 0");
  require(omega_min > 0.0 && omega_min <= omega_max && omega_max <= 1.0,
          "need 0 < omega_min <= omega_max <= 1");
  require(alpha1 >= 0.0 && alpha1 <= 1.0, "alpha1 must lie in [0, 1]");
  require(beta1 >= 0.0 && beta1 <= 1.0, "beta1 must lie in [0, 1]");
  require(gamma >= 0.0, "gamma must be >= 0");
  require(epochs > 0, "epochs must be positive");
  require(batch_size >= 2, "batch size must be at least 2");
  require(lr >= 0.0, "learning rate must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(buffer_multiplier > 0, "buffer multiplier must be positive");
  require(knn_k > 0, "knn k must be positive");
  require(infomap_restarts > 0, "infomap restarts must be positive");
  require(encoder_hidden > 0 && feature_dim > 0 && head_hidden > 0 && proj_dim > 0,
          "layer widths must be positive");
  require(augment.dropout_p >= 0.0 && augment.dropout_p < 1.0, "dropout must lie in [0, 1)");
  require(augment.noise_sd >= 0.0, "augmentation noise must be >= 0");
}

double omega_schedule(std::size_t t, std::size_t total, double omega_min, double omega_max,
                      OmegaForm form) {
  if (total == 0) throw ParameterError("omega_schedule: T must be positive");
  if (t > total) throw ParameterError("omega_schedule: t exceeds T");
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  if (form == OmegaForm::kPrinted) return omega_max - (1.0 - omega_min) * std::cos(phase + 1.0) / 2.0;
  return omega_max - (1.0 - omega_min) * (std::cos(phase) + 1.0) / 2.0;
}

double lr_schedule(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) return lr0;
  if (step > total_steps) throw ParameterError("lr_schedule: step exceeds total steps");
  const double phase =
      std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * (1.0 + std::cos(phase)) / 2.0;
}

double tau_t_schedule(std::size_t epoch, std::size_t warmup_epochs, double start, double end) {
  if (warmup_epochs == 0 || epoch >= warmup_epochs) return end;
  const double phase =
      std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(warmup_epochs);
  return end + (start - end) * (1.0 + std::cos(phase)) / 2.0;
}

void ema_update(Matrix& teacher, const Matrix& student, double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) throw ParameterError("ema_update: omega must lie in [0, 1]");
  if (teacher.rows() != student.rows() || teacher.cols() != student.cols())
    throw DimensionError("ema_update: teacher and student shapes differ");
  auto t = teacher.values();
  auto s = student.values();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = omega * t[i] + (1.0 - omega) * s[i];
}

void ema_update(Mlp& teacher, const Mlp& student, double omega) {
  if (teacher.layers().size() != student.layers().size())
    throw DimensionError("ema_update: encoders differ in depth");
  for (std::size_t i = 0; i < teacher.layers().size(); ++i) {
    ema_update(teacher.layers()[i].weight, student.layers()[i].weight, omega);
    ema_update(teacher.layers()[i].bias, student.layers()[i].bias, omega);
  }
}

ProberState init_state(const GcdDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.old_classes.empty()) throw ConfigError("dataset has no labelled classes");
  ProberState s;
  Rng rng = make_rng({cfg.seed, kNetStream});
  s.encoder = Mlp({ds.dim, cfg.encoder_hidden, cfg.feature_dim}, cfg.encoder_init, rng);
  s.teacher_encoder = s.encoder;
  s.head = Mlp({cfg.feature_dim, cfg.head_hidden, cfg.head_hidden, cfg.proj_dim},
               LayerInit::kXavier, rng);
  s.bank.buffer_size = buffer_size_for(ds.old_classes.size(), cfg.buffer_multiplier);
  s.bank.potential_pool =
      init_potential_pool(cfg.feature_dim, s.bank.buffer_size, derive_seed({cfg.seed, kPoolStream}));
  s.bank.labelled_protos = init_potential_pool(cfg.feature_dim, ds.old_classes.size(),
                                               derive_seed({cfg.seed, kLabelledStream}));
  return s;
}

std::size_t batches_per_epoch(const GcdDataset& ds, const TrainConfig& cfg) {
  const std::size_t nl = ds.num_labelled();
  const std::size_t nu = ds.num_unlabelled();
  if (nl == 0 || nu == 0) throw ConfigError("training needs labelled and unlabelled instances");
  const std::size_t total = nl + nu;
  const std::size_t by_size = (total + cfg.batch_size - 1) / cfg.batch_size;
  return std::max<std::size_t>(1, std::min({by_size, nl, nu}));
}

std::vector<Batch> make_batches(const GcdDataset& ds, const TrainConfig& cfg, std::size_t epoch) {
  const std::size_t nl = ds.num_labelled();
  const std::size_t nu = ds.num_unlabelled();
  const std::size_t nb = batches_per_epoch(ds, cfg);
  Rng rng = make_rng({cfg.shuffle_seed, epoch, kBatchStream});
  std::vector<std::size_t> lab = iota_indices(nl);
  std::vector<std::size_t> unl = iota_indices(nu);
  shuffle_indices(lab, rng);
  shuffle_indices(unl, rng);

  const Matrix xl = normalized_rows(ds.labelled_x);
  const Matrix xu = normalized_rows(ds.unlabelled_x);

  std::vector<Batch> batches(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t l0 = b * nl / nb, l1 = (b + 1) * nl / nb;
    const std::size_t u0 = b * nu / nb, u1 = (b + 1) * nu / nb;
    Batch& batch = batches[b];
    batch.num_labelled = l1 - l0;
    const std::size_t rows = (l1 - l0) + (u1 - u0);
    batch.view1 = Matrix(rows, ds.dim);
    batch.view2 = Matrix(rows, ds.dim);
    std::size_t r = 0;
    auto emit = [&](const Matrix& x, std::size_t local, std::uint64_t global) {
      const ViewPair vp = augment(x.row(local), cfg.augment, {cfg.shuffle_seed, epoch, global});
      std::copy(vp.view1.begin(), vp.view1.end(), batch.view1.row(r).begin());
      std::copy(vp.view2.begin(), vp.view2.end(), batch.view2.row(r).begin());
      ++r;
    };
    for (std::size_t i = l0; i < l1; ++i) {
      emit(xl, lab[i], lab[i]);
      batch.labels.push_back(ds.old_index(ds.labelled_y[lab[i]]));
    }
    for (std::size_t i = u0; i < u1; ++i) emit(xu, unl[i], nl + unl[i]);
  }
  return batches;
}

Matrix encode(const Mlp& encoder, const Matrix& x, bool normalize_output) {
  Matrix h = encoder.forward(normalized_rows(x));
  return normalize_output ? l2_normalize_rows(h) : h;
}

LossBreakdown compute_objective(const ProberState& state, const Batch& batch,
                                const TrainConfig& cfg, double tau_t, GradientTape* tape) {
  const std::size_t b = batch.view1.rows();
  const std::size_t nl = batch.num_labelled;
  if (batch.labels.size() != nl) throw ContractViolation("batch label count mismatch");
  const std::size_t first_trainable =
      cfg.train_last_layer_only ? state.encoder.layers().size() - 1 : 0;

  // Student encoder on both views.
  Mlp::Cache enc1, enc2;
  const Matrix h1 = state.encoder.forward(batch.view1, &enc1);
  const Matrix h2 = state.encoder.forward(batch.view2, &enc2);
  const Matrix v1 = cfg.normalize_features ? l2_normalize_rows(h1) : h1;
  Matrix dv1(b, v1.cols());
  Matrix dh1(b, h1.cols());
  Matrix dh2(b, h2.cols());

  double l_cru = 0.0, l_crl = 0.0, l_sup = 0.0, l_unsup = 0.0, reg = 0.0;
  const Matrix& buffer = state.buffer.slots;

  if (cfg.enable_cru && b > nl) {
    const Matrix v_u = v1.slice_rows(nl, b);
    const Prediction ps = student_predict(v_u, buffer, cfg.tau);
    // Teacher branch: plain values, never connected to the tape.
    const Matrix th = state.teacher_encoder.forward(batch.view2.slice_rows(nl, b));
    const Matrix tv = cfg.normalize_features ? l2_normalize_rows(th) : th;
    const Prediction pt = teacher_predict(tv, state.teacher_buffer.slots, tau_t);
    const CruLoss cru = loss_cru(ps, pt, cfg.gamma);
    l_cru = cru.value;
    reg = cru.regularizer;
    if (tape) {
      Matrix d = cru.d_scores;
      d *= cfg.alpha1;
      auto g = scores_backward(v_u, buffer, d);
      add_rows(dv1, nl, g.dv);
      tape->accumulate(kBufferId, g.dbuffer);
    }
  }

  if (cfg.enable_crl && nl > 0) {
    const Matrix v_l = v1.slice_rows(0, nl);
    const CrlLoss crl = loss_crl(v_l, batch.labels, state.bank.labelled_protos, cfg.tau);
    l_crl = crl.value;
    if (tape) {
      const double w = 1.0 - cfg.alpha1;
      add_rows(dv1, 0, crl.dv * w);
      tape->accumulate(kLabelledProtosId, crl.dprotos * w);
    }
  }

  if (cfg.enable_sup || cfg.enable_unsup) {
    Mlp::Cache head1, head2;
    const Matrix p1 = state.head.forward(h1, &head1);
    const Matrix p2 = state.head.forward(h2, &head2);
    const Matrix z1 = l2_normalize_rows(p1);
    const Matrix z2 = l2_normalize_rows(p2);
    Matrix dz1(b, z1.cols()), dz2(b, z2.cols());

    if (cfg.enable_sup && nl >= 2) {
      std::vector<int> labels(batch.labels.begin(), batch.labels.end());
      const SupLoss sup = loss_sup(z1.slice_rows(0, nl), labels, cfg.tau_r);
      l_sup = sup.value;
      if (tape) add_rows(dz1, 0, sup.dz * cfg.beta1);
    }
    if (cfg.enable_unsup) {
      const UnsupLoss unsup = loss_unsup(z1, z2, cfg.tau_r, cfg.cross_view_denominator);
      l_unsup = unsup.value;
      if (tape) {
        const double w = 1.0 - cfg.beta1;
        dz1 += unsup.dz1 * w;
        dz2 += unsup.dz2 * w;
      }
    }
    if (tape) {
      dh1 += state.head.backward(head1, l2_normalize_rows_backward(p1, z1, dz1), tape, kHeadPrefix);
      dh2 += state.head.backward(head2, l2_normalize_rows_backward(p2, z2, dz2), tape, kHeadPrefix);
    }
  }

  if (tape) {
    dh1 += cfg.normalize_features ? l2_normalize_rows_backward(h1, v1, dv1) : dv1;
    state.encoder.backward(enc1, dh1, tape, kEncoderPrefix, first_trainable);
    state.encoder.backward(enc2, dh2, tape, kEncoderPrefix, first_trainable);
  }

  LossBreakdown out = combine(l_cru, l_crl, l_sup, l_unsup, cfg.alpha1, cfg.beta1);
  out.regularizer = reg;
  return out;
}

LossBreakdown train_step(ProberState& state, const Batch& batch, const TrainConfig& cfg,
                         const StepSchedule& sched, GradientTape& tape) {
  tape.clear();
  const LossBreakdown loss = compute_objective(state, batch, cfg, sched.tau_t, &tape);
  if (diverged(loss, cfg.divergence_limit)) throw DivergenceError(describe(loss));
  apply_gradients(state, tape, cfg, sched.lr);
  ema_update(state.teacher_encoder, state.encoder, sched.omega);
  ema_update(state.teacher_buffer.slots, state.buffer.slots, sched.omega);
  ++state.step;
  return loss;
}

EstimateKOptions clustering_options(const TrainConfig& cfg, std::uint64_t seed) {
  EstimateKOptions o;
  o.tau_f = cfg.tau_f;
  o.k = cfg.knn_k;
  o.infomap.seed = seed;
  o.infomap.restarts = cfg.infomap_restarts;
  return o;
}

EpochMetrics train_epoch(ProberState& state, const GcdDataset& ds, const TrainConfig& cfg,
                         std::size_t epoch) {
  cfg.validate();
  EpochMetrics m;
  m.epoch = epoch;

  const auto t0 = std::chrono::steady_clock::now();
  const Matrix features = encode(state.encoder, ds.unlabelled_x);
  const ClusterResult clusters =
      estimate_k(features, clustering_options(cfg, derive_seed({cfg.seed, epoch, kClusterStream})));
  m.cluster_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  m.k_est = clusters.num_clusters;

  state.bank.cluster_protos = cluster_prototypes(features, clusters);
  auto [student, teacher] = cfg.use_potential_prototypes ? init_buffers(state.bank, epoch)
                                                         : init_cluster_only_buffers(state.bank, epoch);
  state.buffer = std::move(student);
  state.teacher_buffer = std::move(teacher);
  state.velocity.erase(kBufferId);

  const std::vector<Batch> batches = make_batches(ds, cfg, epoch);
  const std::size_t total_steps = cfg.epochs * batches.size();
  m.omega = cfg.use_ema ? omega_schedule(std::min(epoch, cfg.epochs), cfg.epochs, cfg.omega_min,
                                         cfg.omega_max, cfg.omega_form)
                        : 0.0;
  m.tau_t = tau_t_schedule(epoch, cfg.tau_t_warmup_epochs, cfg.tau_t_start, cfg.tau_t_end);
  m.lr = lr_schedule(std::min<std::size_t>(state.step, total_steps), total_steps, cfg.lr);

  for (std::size_t s = 0; s < batches.size(); ++s) {
    GradientTape tape;
    const double lr = lr_schedule(std::min<std::size_t>(state.step, total_steps), total_steps, cfg.lr);
    LossBreakdown loss;
    try {
      loss = train_step(state, batches[s], cfg, {m.tau_t, m.omega, lr}, tape);
    } catch (const DivergenceError& e) {
      throw DivergenceError("epoch " + std::to_string(epoch) + " step " + std::to_string(s) +
                            ": " + e.what());
    }

    m.step_totals.push_back(loss.total);
    m.losses.l_cru += loss.l_cru;
    m.losses.l_crl += loss.l_crl;
    m.losses.l_sup += loss.l_sup;
    m.losses.l_unsup += loss.l_unsup;
    m.losses.regularizer += loss.regularizer;
  }
  m.steps = batches.size();
  const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, m.steps));
  const double reg = m.losses.regularizer * inv;
  m.losses = combine(m.losses.l_cru * inv, m.losses.l_crl * inv, m.losses.l_sup * inv,
                     m.losses.l_unsup * inv, cfg.alpha1, cfg.beta1);
  m.losses.regularizer = reg;

  if (cfg.use_potential_prototypes) write_back_potential(state.buffer, state.bank);
  state.epoch = epoch + 1;
  return m;
}

void train(ProberState& state, const GcdDataset& ds, const TrainConfig& cfg,
           const EpochCallback& on_epoch) {
  for (std::size_t e = state.epoch; e < cfg.epochs; ++e) {
    const EpochMetrics m = train_epoch(state, ds, cfg, e);
    if (on_epoch) on_epoch(state, m);
  }
}

ClusterResult infer(const ProberState& state, const Matrix& unlabelled_x, const TrainConfig& cfg) {
  if (unlabelled_x.rows() == 0) throw ParameterError("infer: no unlabelled instances");
  const Matrix features = encode(state.encoder, unlabelled_x);
  return estimate_k(features, clustering_options(cfg, derive_seed({cfg.seed, kInferStream})));
}

}  // namespace pnp
