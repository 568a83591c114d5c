// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pnp/checkpoint.hpp"
#include "pnp/datagen.hpp"
#include "pnp/errors.hpp"
#include "pnp/evaluation.hpp"
#include "pnp/fastcluster.hpp"
#include "pnp/metrics.hpp"
#include "pnp/objectives.hpp"
#include "pnp/prototypes.hpp"
#include "pnp/trainer.hpp"

using pnp::Matrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <typename T>
double median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2])
               : 0.5 * (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2]));
}

double grad_err(const Matrix& analytic, const std::function<double(const Matrix&)>& f,
                const Matrix& at) {
  return oracle::max_rel_err(analytic, oracle::numeric_grad5(f, at));
}

// ---- 1. gradients

Outcome gradients() {
  constexpr int kConfigs = 100;
  double worst = 0.0;
  std::string worst_where;
  for (int c = 0; c < kConfigs; ++c) {
    std::mt19937_64 rng(1000 + c);
    auto uni = [&](std::size_t lo, std::size_t hi) {
      return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    auto real = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto note = [&](double e, const std::string& where) {
      if (e > worst) worst = e, worst_where = fmt("config %d %s", c, where.c_str());
    };

    const std::size_t in = uni(2, 8), d = uni(2, 8), old = uni(1, 3);
    const std::size_t kt = pnp::buffer_size_for(old), ke = uni(1, kt - 1);
    const std::size_t nl = uni(2, 8), nu = uni(1, 16 - nl), b = nl + nu;

    pnp::TrainConfig cfg;
    cfg.tau = real(0.05, 0.5);
    cfg.tau_r = real(0.3, 1.5);
    cfg.gamma = real(0.0, 3.0);
    cfg.alpha1 = real(0.0, 1.0);
    cfg.beta1 = real(0.0, 1.0);
    cfg.cross_view_denominator = uni(0, 1);
    cfg.normalize_features = uni(0, 3) != 0;
    cfg.train_last_layer_only = false;
    const double tau_t = real(0.03, 0.2);

    pnp::ProberState s;
    pnp::Rng net_rng(c);
    s.encoder = pnp::Mlp({in, uni(2, 8), d}, pnp::LayerInit::kXavier, net_rng);
    s.teacher_encoder = s.encoder;
    for (auto& l : s.teacher_encoder.layers())
      for (double& v : l.weight.values()) v += real(-0.2, 0.2);
    const std::size_t hh = uni(2, 8);
    s.head = pnp::Mlp({d, hh, hh, uni(2, 8)}, pnp::LayerInit::kXavier, net_rng);
    s.bank.labelled_protos = oracle::random_unit_rows(old, d, rng);
    s.buffer.slots = oracle::random_unit_rows(kt, d, rng);
    s.buffer.cluster_slots = ke;
    s.teacher_buffer = s.buffer;
    s.teacher_buffer.slots = oracle::random_unit_rows(kt, d, rng);

    pnp::Batch batch;
    batch.view1 = oracle::random_unit_rows(b, in, rng);
    batch.view2 = oracle::random_unit_rows(b, in, rng);
    batch.num_labelled = nl;
    for (std::size_t i = 0; i < nl; ++i) batch.labels.push_back(uni(0, old - 1));

    // Individual losses against their own inputs.
    const Matrix v = oracle::random_unit_rows(b, d, rng);
    const Matrix buf = s.buffer.slots;
    const auto teacher = pnp::teacher_predict(oracle::random_unit_rows(b, d, rng), s.teacher_buffer.slots, tau_t);
    auto cru = [&](const Matrix& vv, const Matrix& mm) {
      return pnp::loss_cru(pnp::student_predict(vv, mm, cfg.tau), teacher, cfg.gamma);
    };
    const auto lc = cru(v, buf);
    const auto gc = pnp::scores_backward(v, buf, lc.d_scores);
    note(grad_err(gc.dv, [&](const Matrix& x) { return cru(x, buf).value; }, v), "l_cru/v");
    note(grad_err(gc.dbuffer, [&](const Matrix& x) { return cru(v, x).value; }, buf), "l_cru/buffer");

    const Matrix vl = v.slice_rows(0, nl);
    const Matrix& mu = s.bank.labelled_protos;
    const auto lr = pnp::loss_crl(vl, batch.labels, mu, cfg.tau);
    note(grad_err(lr.dv, [&](const Matrix& x) { return pnp::loss_crl(x, batch.labels, mu, cfg.tau).value; }, vl), "l_crl/v");
    note(grad_err(lr.dprotos, [&](const Matrix& x) { return pnp::loss_crl(vl, batch.labels, x, cfg.tau).value; }, mu), "l_crl/protos");

    const std::vector<int> ys(batch.labels.begin(), batch.labels.end());
    const auto ls = pnp::loss_sup(vl, ys, cfg.tau_r);
    note(grad_err(ls.dz, [&](const Matrix& x) { return pnp::loss_sup(x, ys, cfg.tau_r).value; }, vl), "l_sup/z");

    const Matrix w = oracle::random_unit_rows(b, d, rng);
    const auto lu = pnp::loss_unsup(v, w, cfg.tau_r, cfg.cross_view_denominator);
    note(grad_err(lu.dz1, [&](const Matrix& x) { return pnp::loss_unsup(x, w, cfg.tau_r, cfg.cross_view_denominator).value; }, v), "l_unsup/z1");
    note(grad_err(lu.dz2, [&](const Matrix& x) { return pnp::loss_unsup(v, x, cfg.tau_r, cfg.cross_view_denominator).value; }, w), "l_unsup/z2");

    // Combined objective through the networks, every parameter group.
    pnp::GradientTape tape;
    pnp::compute_objective(s, batch, cfg, tau_t, &tape);
    for (auto& [id, param] : fixture::student_parameters(s)) {
      const Matrix saved = *param;
      const double e = grad_err(
          tape.get_or_zero(id, saved.rows(), saved.cols()),
          [&](const Matrix& x) {
            *param = x;
            return pnp::compute_objective(s, batch, cfg, tau_t, nullptr).total;
          },
          saved);
      *param = saved;
      note(e, "total/" + id);
    }
  }
  return {worst < 1e-4, fmt("max relative error %.2e over %d configs (worst at %s)", worst,
                            kConfigs, worst_where.c_str())};
}

// ---- 2. Infomap

Outcome infomap_oracle() {
  std::mt19937_64 rng(2024);
  std::vector<pnp::SimilarityGraph> small;
  for (int t = 0; t < 900; ++t) {
    const std::size_t n = 2 + t % 9;
    const double density = 0.15 + 0.8 * static_cast<double>((t / 9) % 5) / 4.0;
    small.push_back(oracle::random_graph(n, density, rng));
  }
  struct Ring {
    std::size_t cliques, size;
    double intra, bridge;
  };
  const std::vector<Ring> rings{{2, 5, 0.9, 0.65}, {3, 3, 0.9, 0.65}, {2, 4, 1.0, 0.3},
                                {4, 6, 0.9, 0.65}, {3, 5, 0.9, 0.65}, {5, 5, 0.9, 0.65},
                                {6, 4, 0.9, 0.5},  {8, 6, 1.0, 0.3}};
  for (const auto& r : rings)
    if (r.cliques * r.size <= 10) small.push_back(oracle::ring_of_cliques(r.cliques, r.size, r.intra, r.bridge));

  std::size_t checked = 0, above = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < small.size(); ++i) {
    const auto& g = small[i];
    if (std::none_of(g.edges.begin(), g.edges.end(), [](const pnp::Edge& e) { return e.weight > 0; }))
      continue;
    ++checked;
    const auto r = pnp::infomap(g, {static_cast<std::uint64_t>(i), 8, 1e-12});
    const double gap = oracle::codelength(g, r.assignment) - oracle::min_codelength(g);
    worst = std::max(worst, gap);
    above += gap > 1e-9;
  }

  std::size_t recovered = 0;
  for (const auto& r : rings) {
    const auto g = oracle::ring_of_cliques(r.cliques, r.size, r.intra, r.bridge);
    std::vector<std::size_t> planted(g.node_count);
    for (std::size_t v = 0; v < g.node_count; ++v) planted[v] = v / r.size;
    recovered += oracle::same_partition(pnp::infomap(g).assignment, planted);
  }
  return {above == 0 && recovered == rings.size(),
          fmt("%zu/%zu graphs at the exhaustive minimum (largest excess %.1e bits); "
              "%zu/%zu ring-of-cliques partitions recovered",
              checked - above, checked, std::max(worst, 0.0), recovered, rings.size())};
}

// ---- 3. Hungarian

Outcome hungarian_oracle() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> size(1, 8);
  std::uniform_int_distribution<int> value(-20, 20);
  int equal = 0;
  for (int t = 0; t < 500; ++t) {
    Matrix c(size(rng), size(rng));
    for (double& x : c.values()) x = value(rng);
    equal += pnp::hungarian(c).cost == oracle::brute_assignment(c);
  }
  return {equal == 500, fmt("%d/500 matrices equal to the brute-force minimum", equal)};
}

// ---- 4. ACC

Outcome accuracy_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> k(1, 8), len(1, 40);
  auto random_case = [&](std::vector<int>& y, std::vector<std::size_t>& p) {
    const int nc = k(rng), np = k(rng), n = len(rng);
    y.resize(n);
    p.resize(n);
    for (int i = 0; i < n; ++i) {
      y[i] = std::uniform_int_distribution<int>(0, nc - 1)(rng);
      p[i] = std::uniform_int_distribution<std::size_t>(0, np - 1)(rng);
    }
  };
  int exact = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<int> y;
    std::vector<std::size_t> p;
    random_case(y, p);
    const auto r = pnp::clustering_accuracy(y, p, {0, 1, 2});
    exact += r.correct == oracle::brute_matched(y, p) &&
             r.acc_all == static_cast<double>(r.correct) / static_cast<double>(y.size());
  }
  int invariant = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<int> y;
    std::vector<std::size_t> p;
    random_case(y, p);
    const auto base = pnp::clustering_accuracy(y, p, {0, 1, 2});
    std::vector<std::size_t> ids(8);
    std::iota(ids.begin(), ids.end(), std::size_t{100});
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<std::size_t> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = ids[p[i]];
    const auto r = pnp::clustering_accuracy(y, q, {0, 1, 2});
    invariant += r.acc_all == base.acc_all && r.k_est == base.k_est;
  }
  return {exact == 200 && invariant == 1000,
          fmt("%d/200 equal to brute-force matching; %d/1000 relabelings invariant", exact, invariant)};
}

// ---- 5 / 6. training runs

struct RunResult {
  double acc = 0.0;
  std::size_t k = 0;
};

RunResult train_and_score(const pnp::GcdDataset& ds, pnp::TrainConfig cfg) {
  auto s = pnp::init_state(ds, cfg);
  pnp::train(s, ds, cfg);
  const auto c = pnp::infer(s, ds.unlabelled_x, cfg);
  const auto r = pnp::clustering_accuracy(ds.unlabelled_y, c.assignment, ds.old_classes);
  return {r.acc_all, r.k_est};
}

pnp::TrainConfig run_config(std::uint64_t seed) {
  pnp::TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = cfg.shuffle_seed = seed;
  return cfg;
}

Outcome end_to_end() {
  int ok = 0;
  std::string runs;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto ds = fixture::mixture_dataset(10, 32, 100, 100 + s);
    const auto r = train_and_score(ds, run_config(s));
    ok += r.acc >= 0.9 && (r.k >= 8 && r.k <= 12);
    runs += fmt(" %.3f/%zu", r.acc, r.k);
  }
  return {ok >= 8, fmt("%d/10 seeds with ACC >= 0.90 and |K-10| <= 2 (ACC/K:%s)", ok, runs.c_str())};
}

Outcome potential_prototypes() {
  constexpr double kAngle = 0.08;
  std::vector<std::size_t> k_pp, k_base;
  int acc_ge = 0;
  std::string seeds;
  for (std::uint64_t s = 0; s < 10; ++s) {
    pnp::MixtureParams mp;
    mp.seed = 100 + s;
    auto pts = pnp::generate_mixture(mp);
    // Two pairs of new classes at a small angle; similarity clustering merges them.
    for (std::uint64_t p = 0; p < 2; ++p)
      pnp::plant_close_pair(pts, static_cast<int>(5 + 2 * p), static_cast<int>(6 + 2 * p), kAngle,
                            pnp::derive_seed({mp.seed, p}));
    const auto ds = pnp::split_gcd(pts, 0.5, 0.5, mp.seed);
    auto cfg = run_config(s);
    const auto with = train_and_score(ds, cfg);
    cfg.use_potential_prototypes = false;
    const auto without = train_and_score(ds, cfg);
    k_pp.push_back(with.k);
    k_base.push_back(without.k);
    acc_ge += with.acc >= without.acc;
    seeds += fmt(" %zu/%.3f:%zu/%.3f", with.k, with.acc, without.k, without.acc);
  }
  const double med_pp = median(k_pp), med_base = median(k_base);
  const bool undershoots = med_base < 10.0;
  return {undershoots && med_pp >= med_base && acc_ge >= 7,
          fmt("median K with PP %.1f vs without %.1f (true 10, baseline undershoots: %s); "
              "ACC with PP >= without in %d/10 seeds (K/ACC with:without%s)",
              med_pp, med_base, undershoots ? "yes" : "no", acc_ge, seeds.c_str())};
}

// ---- 7. clustering time

Outcome clustering_time() {
  std::string detail;
  bool all = true;
  for (std::size_t n : {1000, 4000, 8000}) {
    pnp::MixtureParams mp;
    mp.per_class = n / 10;
    mp.seed = 7;
    const auto ds = pnp::split_gcd(pnp::generate_mixture(mp), 0.5, 0.5, 7);
    const Matrix unl = pnp::l2_normalize_rows(ds.unlabelled_x);
    const Matrix full = pnp::vstack(pnp::l2_normalize_rows(ds.labelled_x), unl);
    const auto t = pnp::bench_clustering(full, unl, {}, pnp::kMinTimingRepeats);
    all = all && t.unlabelled_ms < t.full_ms;
    detail += fmt(" N=%zu (%zu:%zu) full %.1f ms, unlabelled %.1f ms;", full.rows(),
                  ds.num_labelled(), ds.num_unlabelled(), t.full_ms, t.unlabelled_ms);
  }
  return {all, fmt("median of %zu runs:%s", pnp::kMinTimingRepeats, detail.c_str())};
}

// ---- 8. schedules

Outcome schedules() {
  const double w0 = pnp::omega_schedule(0, 200, 0.7, 0.99);
  const double wh = pnp::omega_schedule(100, 200, 0.7, 0.99);
  const double wt = pnp::omega_schedule(200, 200, 0.7, 0.99);
  const double l0 = pnp::lr_schedule(0, 1000, 0.1), lt = pnp::lr_schedule(1000, 1000, 0.1);
  const double t0 = pnp::tau_t_schedule(0, 30, 0.07, 0.04), tt = pnp::tau_t_schedule(30, 30, 0.07, 0.04);
  const bool ok = std::abs(w0 - 0.69) <= 1e-12 && std::abs(wh - 0.84) <= 1e-12 &&
                  std::abs(wt - 0.99) <= 1e-12 && l0 == 0.1 && std::abs(lt) <= 1e-12 &&
                  t0 == 0.07 && tt == 0.04;
  return {ok, fmt("omega %.15g/%.15g/%.15g, lr %.3g -> %.3g, tau_t %.3g -> %.3g", w0, wh, wt, l0,
                  lt, t0, tt)};
}

// ---- 9. teacher isolation

Outcome teacher_isolation() {
  const auto ds = fixture::mixture_dataset(10, 32, 100, 9);
  pnp::TrainConfig cfg;
  cfg.train_last_layer_only = false;
  auto s = pnp::init_state(ds, cfg);
  pnp::train_epoch(s, ds, cfg, 0);  // teacher and student now differ
  fixture::prepare_buffers(s, ds, cfg, 1);
  for (double& v : s.teacher_buffer.slots.values()) v *= 0.9;
  const auto batches = pnp::make_batches(ds, cfg, 1);

  std::set<std::string> student_ids;
  for (auto& [id, p] : fixture::student_parameters(s)) student_ids.insert(id);

  std::size_t steps = 0, foreign = 0, outside = 0, frozen_moved = 0;
  for (const auto& batch : batches) {
    std::vector<Matrix> before;
    for (const Matrix* m : fixture::teacher_parameters(s)) before.push_back(*m);
    pnp::GradientTape tape;
    const double omega = 0.5 + 0.4 * static_cast<double>(steps % 3) / 2.0;
    pnp::train_step(s, batch, cfg, {0.05, omega, 0.05}, tape);
    for (const auto& id : tape.ids()) foreign += !student_ids.count(id);
    const auto after = fixture::teacher_parameters(s);
    std::vector<const Matrix*> student{};
    for (const auto& l : s.encoder.layers()) {
      student.push_back(&l.weight);
      student.push_back(&l.bias);
    }
    student.push_back(&s.buffer.slots);
    for (std::size_t m = 0; m < after.size(); ++m)
      for (std::size_t k = 0; k < after[m]->size(); ++k) {
        const double a = before[m].values()[k], b = student[m]->values()[k], t = after[m]->values()[k];
        outside += t < std::min(a, b) || t > std::max(a, b);
      }
    ++steps;
  }
  // With omega = 1 the teacher must not move at all, whatever the gradients.
  for (const auto& batch : batches) {
    std::vector<Matrix> before;
    for (const Matrix* m : fixture::teacher_parameters(s)) before.push_back(*m);
    pnp::GradientTape tape;
    pnp::train_step(s, batch, cfg, {0.05, 1.0, 0.05}, tape);
    const auto after = fixture::teacher_parameters(s);
    for (std::size_t m = 0; m < after.size(); ++m) frozen_moved += !(*after[m] == before[m]);
  }
  return {foreign == 0 && outside == 0 && frozen_moved == 0,
          fmt("%zu steps: %zu teacher adjoints on the tape, %zu EMA values outside the hull, "
              "%zu teacher matrices moved at omega=1",
              steps, foreign, outside, frozen_moved)};
}

// ---- 10. determinism

Outcome determinism() {
  const auto ds = fixture::mixture_dataset(10, 32, 100, 110);
  pnp::TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 3;
  cfg.shuffle_seed = 4;
  auto run = [&] {
    std::string stream;
    auto s = pnp::init_state(ds, cfg);
    pnp::train(s, ds, cfg, [&](const pnp::ProberState&, const pnp::EpochMetrics& m) {
      stream += pnp::epoch_record(m, {false}) + "\n";
    });
    std::ostringstream ckpt;
    pnp::write_checkpoint(ckpt, s);
    return std::make_pair(stream, ckpt.str());
  };
  const auto a = run();
  const auto b = run();
  return {a.first == b.first && a.second == b.second,
          fmt("metrics streams %s (%zu bytes), final checkpoints %s", a.first == b.first ? "identical" : "differ",
              a.first.size(), a.second == b.second ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradients},
      {2, "infomap oracle", infomap_oracle},
      {3, "hungarian oracle", hungarian_oracle},
      {4, "ACC metric", accuracy_oracle},
      {5, "end-to-end recovery", end_to_end},
      {6, "potential-prototype trend", potential_prototypes},
      {7, "clustering efficiency", clustering_time},
      {8, "schedules", schedules},
      {9, "teacher isolation", teacher_isolation},
      {10, "determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %2d %-26s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
