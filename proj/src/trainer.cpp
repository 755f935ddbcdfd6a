#include "rode/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <string>

#include "rode/error.hpp"

namespace rode {

void validate(const TrainConfig& c) {
  if (c.epochs < 0) throw Error("config: epochs must be >= 0");
  if (c.batch_size < 1) throw Error("config: batch size must be >= 1");
  if (!(c.lr >= 0.0)) throw Error("config: learning rate must be >= 0");
  if (!(c.lr_decay_factor > 0.0)) throw Error("config: decay factor must be > 0");
  if (c.lr_decay_period < 1) throw Error("config: decay period must be >= 1");
  if (c.warmup_epochs < 0) throw Error("config: warm-up epochs must be >= 0");
  if (c.seed_a == c.seed_b) throw Error("config: models A and B need distinct seeds");
  if (c.embed_dim < 1) throw Error("config: embedding dim must be >= 1");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw Error("config: lambda must lie in [0, 1]");
  if (!(c.eta >= 0.0 && c.eta <= 1.0)) throw Error("config: eta must lie in [0, 1]");
  if (!(c.tau > 0.0)) throw Error("config: tau must be > 0");
  if (!(c.dbscan.eps > 0.0) || c.dbscan.min_pts < 1) throw Error("config: invalid DBSCAN settings");
  validate(c.ral);
  if (c.fixed_gamma && !(*c.fixed_gamma > 0.0 && *c.fixed_gamma <= 1.0))
    throw Error("config: fixed gamma must lie in (0, 1]");
  if (!(c.label_noise >= 0.0 && c.label_noise <= 1.0))
    throw Error("config: label noise must lie in [0, 1]");
  if (!(c.feature_jitter >= 0.0)) throw Error("config: feature jitter must be >= 0");
  if (!(c.init_spread >= 0.0) || !std::isfinite(c.init_spread))
    throw Error("config: init spread must be finite and >= 0");
}

double learning_rate(const TrainConfig& config, int epoch) {
  const int drops = epoch / config.lr_decay_period;
  return config.lr * std::pow(config.lr_decay_factor, -double(drops));
}

ModelState init_model(ModelId id, std::size_t input_dim, const TrainConfig& config) {
  ModelState m;
  m.id = id;
  const std::uint64_t seed = id == ModelId::A ? config.seed_a : config.seed_b;
  // Both modality branches start from the same weights; the two models differ.
  Encoder shared = init_encoder(input_dim, config.hidden_dim, config.embed_dim, config.init_seed);
  const Encoder own = init_encoder(input_dim, config.hidden_dim, config.embed_dim, seed);
  for (std::size_t k = 0; k < shared.params.size(); ++k)
    shared.params[k] += config.init_spread * own.params[k];
  m.encoders = {shared, shared};
  return m;
}

namespace {

const char* model_name(ModelId z) { return z == ModelId::A ? "A" : "B"; }

struct SampleRef {
  Modality modality;
  std::size_t local;  // row within that modality's feature matrix
};

struct DataView {
  std::array<Matrix, 2> x;
  std::vector<SampleRef> refs;  // dataset order
};

DataView make_view(const Dataset& dataset) {
  validate(dataset);
  DataView v;
  for (Modality m : kModalities) v.x[index_of(m)] = dataset.features(m);
  std::array<std::size_t, 2> next{0, 0};
  for (const auto& s : dataset.samples) v.refs.push_back({s.modality, next[index_of(s.modality)]++});
  return v;
}

struct Clustered {
  std::array<Matrix, 2> features;
  std::array<ClusterAssignment, 2> assignment;
  std::array<Matrix, 2> centers;
};

Clustered cluster_model(const ModelState& model, const DataView& view, const DbscanConfig& cfg) {
  Clustered c;
  for (Modality m : kModalities) {
    const std::size_t mi = index_of(m);
    c.features[mi] = encode_rows(model.encoders[mi], view.x[mi]);
    c.assignment[mi] = dbscan(c.features[mi], cfg);
    if (c.assignment[mi].cluster_count == 0)
      throw Error(std::string("model ") + model_name(model.id) + ": clustering of modality " +
                  std::string(to_string(m)) + " produced no clusters (all points are noise)");
    c.centers[mi] = cluster_centers(c.features[mi], c.assignment[mi]);
  }
  return c;
}

BankSet refresh_banks(const ModelState& model, const Clustered& c, const TrainConfig& config) {
  BankSet banks;
  for (std::size_t mi = 0; mi < 2; ++mi) {
    std::optional<MemoryBank> previous;
    if (model.banks) previous = (*model.banks)[mi];
    banks[mi] = refresh_memory(previous, c.centers[mi], config.eta, config.tau);
  }
  return banks;
}

std::vector<int> wrap_map(std::size_t from, std::size_t to) {
  std::vector<int> map(from);
  for (std::size_t k = 0; k < from; ++k) map[k] = static_cast<int>(k % to);
  return map;
}

// Moves the `rate` fraction of labelled samples with the smallest margin in
// the labelling model's own feature space to their runner-up cluster. Real
// clustering errors concentrate on such ambiguous samples and agree with the
// features of the model that made them; uniformly random flips would not.
std::vector<bool> inject_label_noise(std::vector<int>& labels, const Matrix& features,
                                     const Matrix& centers, double rate) {
  std::vector<bool> flipped(labels.size(), false);
  if (rate <= 0.0 || centers.rows() < 2) return flipped;
  struct Candidate {
    double margin;
    std::size_t index;
    int runner_up;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) continue;
    const double own = dot(features.row(i), centers.row(static_cast<std::size_t>(labels[i])));
    int best = kNoise;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.rows(); ++c) {
      if (static_cast<int>(c) == labels[i]) continue;
      const double sim = dot(features.row(i), centers.row(c));
      if (sim > best_sim) {
        best_sim = sim;
        best = static_cast<int>(c);
      }
    }
    candidates.push_back({own - best_sim, i, best});
  }
  const auto count = std::min(candidates.size(), static_cast<std::size_t>(std::llround(rate * double(labels.size()))));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count),
                    candidates.end(), [](const Candidate& x, const Candidate& y) {
                      return x.margin != y.margin ? x.margin < y.margin : x.index < y.index;
                    });
  for (std::size_t k = 0; k < count; ++k) {
    labels[candidates[k].index] = candidates[k].runner_up;
    flipped[candidates[k].index] = true;
  }
  return flipped;
}

std::mt19937_64 shuffle_rng(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

// Training targets of one consumer model, per modality, in its own bank spaces.
struct Targets {
  std::array<std::vector<int>, 2> intra;
  std::array<std::vector<int>, 2> inter;
  std::array<std::vector<double>, 2> gamma;
  // The consumer's own cluster labels; they key its memory-bank updates.
  std::array<std::vector<int>, 2> bank;
};

struct StepResult {
  double loss = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  std::size_t clamped = 0;
};

StepResult gradient_step(ModelState& model, const DataView& view, std::span<const std::size_t> batch,
                         const Targets& targets, const Objective& objective, double lr,
                         double jitter, std::mt19937_64& jitter_rng) {
  std::vector<std::vector<double>> inputs;
  inputs.reserve(batch.size());
  std::vector<BatchItem> items;
  items.reserve(batch.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t idx : batch) {
    const SampleRef& ref = view.refs[idx];
    const std::size_t mi = index_of(ref.modality);
    const auto row = view.x[mi].row(ref.local);
    inputs.emplace_back(row.begin(), row.end());
    if (jitter > 0.0)
      for (double& v : inputs.back()) v += jitter * noise(jitter_rng);
  }
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const SampleRef& ref = view.refs[batch[k]];
    const std::size_t mi = index_of(ref.modality);
    items.push_back({inputs[k], ref.modality, targets.intra[mi][ref.local],
                     targets.inter[mi][ref.local], targets.gamma[mi][ref.local]});
  }

  BankSet& banks = *model.banks;
  const LossGradient lg = loss_gradient(items, model.encoders, banks, objective);

  // Batch class means from the pre-step features, keyed by the model's own labels.
  std::array<Matrix, 2> sums;
  std::array<std::vector<std::size_t>, 2> counts;
  for (std::size_t mi = 0; mi < 2; ++mi) {
    sums[mi] = Matrix(banks[mi].size(), banks[mi].dim());
    counts[mi].assign(banks[mi].size(), 0);
  }
  for (std::size_t k = 0; k < items.size(); ++k) {
    const BatchItem& item = items[k];
    const std::size_t mi = index_of(item.modality);
    const int label = targets.bank[mi][view.refs[batch[k]].local];
    if (label == kNoise) continue;
    const auto v = encoder_forward(model.encoders[mi], item.feature);
    auto s = sums[mi].row(static_cast<std::size_t>(label));
    for (std::size_t d = 0; d < v.size(); ++d) s[d] += v[d];
    ++counts[mi][static_cast<std::size_t>(label)];
  }

  for (std::size_t mi = 0; mi < 2; ++mi) {
    auto& p = model.encoders[mi].params;
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * lg.grad[mi][k];
    if (!all_finite(p))
      throw Error(std::string("model ") + model_name(model.id) + ": parameters became non-finite");
  }

  for (std::size_t mi = 0; mi < 2; ++mi) {
    const std::size_t k = counts[mi].size();
    auto present = std::make_unique<bool[]>(k);
    bool any = false;
    for (std::size_t j = 0; j < k; ++j) {
      present[j] = counts[mi][j] > 0;
      any = any || present[j];
      if (present[j])
        for (double& v : sums[mi].row(j)) v /= double(counts[mi][j]);
    }
    if (!any) continue;
    banks[mi].update(sums[mi], std::span<const bool>(present.get(), k));
    banks[mi].normalize();
  }
  return {lg.report.total, lg.report.intra_term, lg.report.inter_term, lg.report.clamped};
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<double> diagnostic_losses(const ModelState& model, const DataView& view, Modality m,
                                      const Targets& t, double lambda) {
  const std::size_t mi = index_of(m);
  const Matrix& x = view.x[mi];
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (t.intra[mi][i] == kNoise || t.inter[mi][i] == kNoise) continue;
    const BatchItem item{x.row(i), m, t.intra[mi][i], t.inter[mi][i], 1.0};
    const auto probs = item_probabilities(item, model.encoders, *model.banks);
    out[i] = diagnostic_loss(probs.intra, probs.inter, lambda);
  }
  return out;
}

void assign_gammas(Targets& t, const ModelState& model, const DataView& view,
                   const TrainConfig& config, ModelEpochLog* log) {
  for (Modality m : kModalities) {
    const std::size_t mi = index_of(m);
    const auto losses = diagnostic_losses(model, view, m, t, config.lambda);
    std::vector<std::size_t> active;
    std::vector<double> active_losses;
    for (std::size_t i = 0; i < losses.size(); ++i)
      if (t.intra[mi][i] != kNoise && t.inter[mi][i] != kNoise) {
        active.push_back(i);
        active_losses.push_back(losses[i]);
      }
    t.gamma[mi].assign(losses.size(), 1.0);
    ModalityLog* ml = log ? &log->modality[mi] : nullptr;
    if (config.fixed_gamma) {
      for (std::size_t i : active) t.gamma[mi][i] = *config.fixed_gamma;
    } else {
      const AdaptiveGammas ag = adaptive_gammas(active_losses, config.ral);
      for (std::size_t k = 0; k < active.size(); ++k) t.gamma[mi][active[k]] = ag.gammas[k];
      if (ml) {
        ml->gmm_degenerate = ag.degenerate;
        ml->gmm = ag.gmm;
      }
    }
    if (ml) {
      ml->diagnostic_loss = losses;
      ml->gammas = t.gamma[mi];
    }
  }
}

}  // namespace

ModelState warm_up(const ModelState& model, const Dataset& dataset, const TrainConfig& config,
                   int epochs, WarmupLog* log) {
  validate(config);
  if (epochs < 1) throw Error("warm_up: epochs must be >= 1");
  const DataView view = make_view(dataset);
  ModelState current = model;
  const std::uint64_t seed = model.id == ModelId::A ? config.seed_a : config.seed_b;
  for (int e = 0; e < epochs; ++e) {
    const Clustered c = cluster_model(current, view, config.dbscan);
    current.banks = refresh_banks(current, c, config);
    const Matching cross = match_clusters((*current.banks)[0].centers(), (*current.banks)[1].centers());
    Targets t;
    for (Modality m : kModalities) {
      const std::size_t mi = index_of(m);
      t.intra[mi] = c.assignment[mi].labels;
      t.bank[mi] = t.intra[mi];
      t.inter[mi] = relabel(t.intra[mi], cross, m == Modality::Visible ? Direction::PToQ : Direction::QToP);
      t.gamma[mi].assign(t.intra[mi].size(), 1.0);
    }
    if (log)
      log->epoch_clusters.push_back(c.assignment[0].cluster_count + c.assignment[1].cluster_count);
    auto rng = shuffle_rng(seed, 0x7761726du, static_cast<std::uint64_t>(e));
    const auto order = shuffled_order(view.refs.size(), rng);
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(bs, order.size() - start));
      const StepResult r = gradient_step(current, view, batch, t, warmup_objective(), config.lr,
                                         config.feature_jitter, rng);
      if (log) log->batch_losses.push_back(r.loss);
    }
  }
  return current;
}

TrainingState train_epoch(const TrainingState& state, const Dataset& dataset,
                          const TrainConfig& config, int epoch, EpochLog* log) {
  validate(config);
  const DataView view = make_view(dataset);
  const bool dual = !config.ablation.single_model;
  const std::vector<ModelId> models =
      dual ? std::vector<ModelId>{ModelId::A, ModelId::B} : std::vector<ModelId>{ModelId::A};

  TrainingState next = state;
  EpochLog local_log;
  EpochLog& elog = log ? *log : local_log;
  elog = EpochLog{};
  elog.epoch = epoch;
  elog.lr = learning_rate(config, epoch);

  // (i)-(iii): features, clustering, memory banks.
  std::array<Clustered, 2> clustered;
  for (ModelId z : models) {
    ModelState& m = next.model(z);
    clustered[index_of(z)] = cluster_model(m, view, config.dbscan);
    m.banks = refresh_banks(m, clustered[index_of(z)], config);
  }

  // (iv): cross-modal matching within each model, then cross-model per modality.
  std::array<std::array<std::vector<int>, 2>, 2> modal_map;  // [model][source modality]
  for (ModelId z : models) {
    const std::size_t zi = index_of(z);
    const BankSet& banks = *next.model(z).banks;
    const Matching cross = match_clusters(banks[0].centers(), banks[1].centers());
    elog.cross_modal[zi] = cross;
    if (config.ablation.ccm_cross_modal) {
      modal_map[zi][0] = label_map(cross, Direction::PToQ);
      modal_map[zi][1] = label_map(cross, Direction::QToP);
    } else {
      modal_map[zi][0] = wrap_map(banks[0].size(), banks[1].size());
      modal_map[zi][1] = wrap_map(banks[1].size(), banks[0].size());
    }
  }
  std::array<std::array<std::vector<int>, 2>, 2> model_map;  // [modality][source model]
  if (dual) {
    for (Modality m : kModalities) {
      const std::size_t mi = index_of(m);
      const MemoryBank& bank_a = (*next.a.banks)[mi];
      const MemoryBank& bank_b = (*next.b.banks)[mi];
      const Matching across = match_clusters(bank_a.centers(), bank_b.centers());
      elog.cross_model[mi] = across;
      if (config.ablation.ccm_cross_model) {
        model_map[mi][0] = label_map(across, Direction::PToQ);
        model_map[mi][1] = label_map(across, Direction::QToP);
      } else {
        model_map[mi][0] = wrap_map(bank_a.size(), bank_b.size());
        model_map[mi][1] = wrap_map(bank_b.size(), bank_a.size());
      }
    }
  }

  // Own labels, optionally corrupted for diagnostics.
  std::array<std::array<std::vector<int>, 2>, 2> own;
  std::array<std::array<std::vector<bool>, 2>, 2> flipped;
  for (ModelId z : models) {
    const std::size_t zi = index_of(z);
    for (Modality m : kModalities) {
      const std::size_t mi = index_of(m);
      const ClusterAssignment& a = clustered[zi].assignment[mi];
      own[zi][mi] = a.labels;
      flipped[zi][mi] =
          inject_label_noise(own[zi][mi], clustered[zi].features[mi],
                             (*next.model(z).banks)[mi].centers(), config.label_noise);
      ModalityLog& ml = elog.models[zi].modality[mi];
      ml.clusters = a.cluster_count;
      ml.noise_points = a.noise_count();
      ml.own_labels = a.labels;
      ml.flipped = flipped[zi][mi];
    }
  }

  // (v): starred labels. The consumer trains on the provider's labels.
  std::array<Targets, 2> targets;
  for (ModelId consumer : models) {
    const ModelId provider = dual ? peer(consumer) : consumer;
    const std::size_t ci = index_of(consumer), pi = index_of(provider);
    for (Modality m : kModalities) {
      const std::size_t mi = index_of(m), qi = index_of(other(m));
      const std::vector<int>& labels = own[pi][mi];
      std::vector<int> intra = labels;
      std::vector<int> inter = relabel(labels, modal_map[pi][mi]);
      if (dual) {
        intra = relabel(intra, model_map[mi][pi]);
        inter = relabel(inter, model_map[qi][pi]);
      }
      targets[ci].bank[mi] = clustered[ci].assignment[mi].labels;
      targets[ci].intra[mi] = std::move(intra);
      targets[ci].inter[mi] = std::move(inter);
      ModalityLog& ml = elog.models[ci].modality[mi];
      ml.intra_targets = targets[ci].intra[mi];
      ml.inter_targets = targets[ci].inter[mi];
      ml.target_flipped = flipped[pi][mi];
    }
  }

  // (vi): per-sample exponents for each (model, modality).
  for (ModelId z : models) {
    const std::size_t zi = index_of(z);
    assign_gammas(targets[zi], next.model(z), view, config, &elog.models[zi]);
  }

  // (vii): alternating updates, A then B on every batch.
  const Objective objective =
      robust_objective(config.lambda, config.ablation.ral_intra, config.ablation.ral_inter);
  auto rng = shuffle_rng(config.shuffle_seed, 0x65706f63u, static_cast<std::uint64_t>(epoch));
  const auto order = shuffled_order(view.refs.size(), rng);
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::span<const std::size_t> batch(order.data() + start,
                                             std::min(bs, order.size() - start));
    for (ModelId z : models) {
      const std::size_t zi = index_of(z);
      const StepResult r = gradient_step(next.model(z), view, batch, targets[zi], objective,
                                         elog.lr, config.feature_jitter, rng);
      ModelEpochLog& ml = elog.models[zi];
      ml.trained = true;
      ml.batch_losses.push_back(r.loss);
      ml.intra_term += r.intra;
      ml.inter_term += r.inter;
      ml.clamped += r.clamped;
      ++next.step;
    }
  }
  for (auto& ml : elog.models)
    if (!ml.batch_losses.empty())
      ml.mean_batch_loss =
          std::accumulate(ml.batch_losses.begin(), ml.batch_losses.end(), 0.0) /
          double(ml.batch_losses.size());
  return next;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  validate(config);
  validate(dataset);
  TrainResult result;
  result.state.a = init_model(ModelId::A, dataset.dim, config);
  result.state.b = init_model(ModelId::B, dataset.dim, config);
  if (config.warmup_epochs > 0) {
    result.state.a = warm_up(result.state.a, dataset, config, config.warmup_epochs,
                             &result.log.warmup[0]);
    if (!config.ablation.single_model)
      result.state.b = warm_up(result.state.b, dataset, config, config.warmup_epochs,
                               &result.log.warmup[1]);
  }
  for (int e = 0; e < config.epochs; ++e) {
    EpochLog log;
    result.state = train_epoch(result.state, dataset, config, e, &log);
    result.log.epochs.push_back(std::move(log));
  }
  return result;
}

}  // namespace rode
