#include "rode/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "rode/error.hpp"

namespace rode {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// JSON has no NaN; missing values are written as null.
json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double number_or_nan(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

// ---------------------------------------------------------------------------
// Benchmarks

BenchmarkData make_benchmark(const BenchmarkSpec& spec) {
  if (spec.test_identities < 1) throw Error("benchmark: test identities must be >= 1");
  SynthSpec all = spec.synth;
  all.identities = spec.synth.identities + spec.test_identities;
  const Dataset data = generate_synthetic(all);
  BenchmarkData out;
  out.train = select_identities(data, 0, spec.synth.identities);
  out.test = select_identities(data, spec.synth.identities, all.identities);
  return out;
}

BenchmarkSpec sanity_benchmark(std::uint64_t seed) {
  BenchmarkSpec b;
  b.synth.identities = 20;
  b.synth.samples_per_modality = 20;
  b.synth.dim = 32;
  b.synth.center_spread = 1.0;
  b.synth.noise_sigma = 0.2;
  b.synth.modality_offset = 2.0;
  b.synth.outlier_fraction = 0.0;
  b.synth.seed = seed;
  b.test_identities = 20;
  return b;
}

TrainConfig sanity_config() {
  TrainConfig c;
  c.epochs = 20;
  c.batch_size = 32;
  c.lr = 1e-3;
  c.lr_decay_period = 25;
  c.warmup_epochs = 2;
  c.embed_dim = 16;
  c.dbscan = {0.1, 4};
  return c;
}

BenchmarkSpec standard_benchmark(std::uint64_t seed) {
  BenchmarkSpec b = sanity_benchmark(seed);
  b.synth.identities = 40;
  b.synth.noise_sigma = 0.4;
  b.synth.modality_offset = 4.0;
  return b;
}

TrainConfig standard_config() {
  TrainConfig c = sanity_config();
  c.label_noise = 0.3;
  return c;
}

// ---------------------------------------------------------------------------
// Plans

void validate(const ExperimentPlan& plan) {
  std::set<std::string> names;
  for (const auto& run : plan.runs) {
    const std::string key = run.name + "#" + std::to_string(run.seed);
    if (!names.insert(key).second) throw Error("plan: duplicate run " + key);
    if (!(run.config.label_noise >= 0.0 && run.config.label_noise <= 1.0))
      throw Error("plan: run " + key + " has a noise rate outside [0, 1]");
  }
}

RunResult run_single(const PlanRun& run) {
  RunResult r;
  r.name = run.name;
  r.seed = run.seed;
  r.benchmark = run.benchmark;
  r.config = run.config;
  r.loss_auc = kNaN;
  try {
    const BenchmarkData data = make_benchmark(run.benchmark);
    TrainResult trained = train(data.train, run.config);
    r.log = std::move(trained.log);
    if (run.config.ablation.single_model) {
      r.metrics.model_a = evaluate(trained.state, data.test, ModelId::A);
      r.metrics.joint = r.metrics.model_a;
    } else {
      r.metrics.joint = evaluate(trained.state, data.test);
      r.metrics.model_a = evaluate(trained.state, data.test, ModelId::A);
      r.metrics.model_b = evaluate(trained.state, data.test, ModelId::B);
    }
    tag_target_noise(r.log, data.train);
    if (!r.log.epochs.empty()) r.loss_auc = epoch_loss_auc(r.log.epochs.back());
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

std::vector<RunResult> run_plan(const ExperimentPlan& plan) {
  validate(plan);
  if (!plan.output_dir.empty()) std::filesystem::create_directories(plan.output_dir);
  std::vector<RunResult> results;
  for (const auto& run : plan.runs) {
    results.push_back(run_single(run));
    if (!plan.output_dir.empty()) {
      std::string file = run.name + "_seed" + std::to_string(run.seed) + ".json";
      for (char& ch : file)
        if (ch == '/' || ch == ' ' || ch == '(' || ch == ')' || ch == '+' || ch == '=') ch = '_';
      write_run_document(results.back(), plan.output_dir / file);
    }
  }
  return results;
}

namespace {

PlanRun seeded(const std::string& name, const BenchmarkSpec& benchmark, const TrainConfig& config,
               std::uint64_t seed) {
  PlanRun run{name, seed, benchmark, config};
  run.benchmark.synth.seed = seed;
  run.config.seed_a = 2 * seed + 1;
  run.config.seed_b = 2 * seed + 2;
  run.config.shuffle_seed = seed;
  run.config.init_seed = 1000 + seed;
  return run;
}

// Table rows summarize both query directions by their mean.
ResultRow row_from(const RunResult& r, const std::string& name, const EvaluationReport& rep) {
  const RetrievalMetrics& a = rep.infrared_to_visible;
  const RetrievalMetrics& b = rep.visible_to_infrared;
  ResultRow row;
  row.name = name;
  row.seed = r.seed;
  row.ok = r.ok;
  row.error = r.error;
  row.rank1 = 0.5 * (a.rank1 + b.rank1);
  row.map = 0.5 * (a.map + b.map);
  row.minp = 0.5 * (a.minp + b.minp);
  row.loss_auc = r.loss_auc;
  return row;
}

}  // namespace

std::optional<ResultRow> ResultTable::mean(const std::string& name) const {
  ResultRow acc;
  acc.name = name;
  std::size_t n = 0, n_auc = 0;
  for (const auto& row : rows) {
    if (row.name != name || !row.ok) continue;
    acc.rank1 += row.rank1;
    acc.map += row.map;
    acc.minp += row.minp;
    if (std::isfinite(row.loss_auc)) {
      acc.loss_auc += row.loss_auc;
      ++n_auc;
    }
    ++n;
  }
  if (n == 0) return std::nullopt;
  acc.rank1 /= double(n);
  acc.map /= double(n);
  acc.minp /= double(n);
  acc.loss_auc = n_auc ? acc.loss_auc / double(n_auc) : kNaN;
  return acc;
}

std::vector<std::string> ResultTable::names() const {
  std::vector<std::string> out;
  for (const auto& row : rows)
    if (std::find(out.begin(), out.end(), row.name) == out.end()) out.push_back(row.name);
  return out;
}

ExperimentPlan make_ablation_plan(const BenchmarkSpec& benchmark, const TrainConfig& config,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::filesystem::path& output_dir) {
  ExperimentPlan plan;
  plan.output_dir = output_dir;
  for (std::uint64_t seed : seeds) {
    plan.runs.push_back(seeded(variant::kFull, benchmark, config, seed));

    PlanRun r = seeded(variant::kNoRalIntra, benchmark, config, seed);
    r.config.ablation.ral_intra = false;
    plan.runs.push_back(r);

    r = seeded(variant::kNoRalInter, benchmark, config, seed);
    r.config.ablation.ral_inter = false;
    plan.runs.push_back(r);

    r = seeded(variant::kNoCcmCrossModel, benchmark, config, seed);
    r.config.ablation.ccm_cross_model = false;
    plan.runs.push_back(r);

    r = seeded(variant::kNoCcmCrossModal, benchmark, config, seed);
    r.config.ablation.ccm_cross_modal = false;
    plan.runs.push_back(r);

    r = seeded(variant::kSingleA, benchmark, config, seed);
    r.config.ablation.single_model = true;
    plan.runs.push_back(r);

    // Model B alone: the single-model trainer always drives slot A, so hand
    // it B's seed.
    r = seeded(variant::kSingleB, benchmark, config, seed);
    r.config.ablation.single_model = true;
    std::swap(r.config.seed_a, r.config.seed_b);
    plan.runs.push_back(r);
  }
  return plan;
}

ResultTable run_ablation_suite(const ExperimentPlan& plan) {
  const auto results = run_plan(plan);
  ResultTable table;
  for (const auto& r : results) {
    table.rows.push_back(row_from(r, r.name, r.metrics.joint));
    if (r.name == variant::kFull) {
      table.rows.push_back(row_from(r, variant::kDualTestA, r.metrics.model_a));
      table.rows.push_back(row_from(r, variant::kDualTestB, r.metrics.model_b));
    }
  }
  return table;
}

std::string gamma_row_name(std::optional<double> gamma) {
  if (!gamma) return "adaptive";
  std::ostringstream os;
  os << "gamma=" << std::fixed << std::setprecision(2) << *gamma;
  return os.str();
}

ExperimentPlan make_gamma_sweep_plan(const BenchmarkSpec& benchmark, const TrainConfig& config,
                                     const std::vector<double>& gammas,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::filesystem::path& output_dir) {
  for (double g : gammas)
    if (!(g > 0.0 && g <= 1.0)) throw Error("gamma sweep: values must lie in (0, 1]");
  ExperimentPlan plan;
  plan.output_dir = output_dir;
  for (std::uint64_t seed : seeds) {
    for (double g : gammas) {
      PlanRun r = seeded(gamma_row_name(g), benchmark, config, seed);
      r.config.fixed_gamma = g;
      plan.runs.push_back(r);
    }
    PlanRun r = seeded(gamma_row_name(std::nullopt), benchmark, config, seed);
    r.config.fixed_gamma.reset();
    plan.runs.push_back(r);
  }
  return plan;
}

ResultTable run_gamma_sweep(const ExperimentPlan& plan) {
  ResultTable table;
  for (const auto& r : run_plan(plan)) table.rows.push_back(row_from(r, r.name, r.metrics.joint));
  return table;
}

// ---------------------------------------------------------------------------
// Loss separation

double loss_auc(std::span<const double> losses, const std::vector<bool>& noisy) {
  if (losses.size() != noisy.size()) throw Error("loss_auc: tag count does not match losses");
  std::vector<std::pair<double, bool>> v;
  v.reserve(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) v.emplace_back(losses[i], noisy[i]);
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Mann-Whitney U with midranks.
  double rank_sum_noisy = 0.0;
  std::size_t n_noisy = 0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) ++j;
    const double midrank = 0.5 * double(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (v[k].second) {
        rank_sum_noisy += midrank;
        ++n_noisy;
      }
    i = j;
  }
  const std::size_t n_clean = v.size() - n_noisy;
  if (n_noisy == 0 || n_clean == 0) return kNaN;
  const double u = rank_sum_noisy - double(n_noisy) * double(n_noisy + 1) / 2.0;
  return u / (double(n_noisy) * double(n_clean));
}

namespace {

// Diagnostic losses and tags of the samples that carried a training target.
void tagged_losses(const ModalityLog& ml, std::vector<double>& losses, std::vector<bool>& noisy) {
  for (std::size_t i = 0; i < ml.diagnostic_loss.size(); ++i) {
    if (i >= ml.intra_targets.size() || ml.intra_targets[i] == kNoise) continue;
    const auto& tags = ml.target_noisy.empty() ? ml.target_flipped : ml.target_noisy;
    if (i >= tags.size()) continue;
    losses.push_back(ml.diagnostic_loss[i]);
    noisy.push_back(tags[i]);
  }
}

bool has_tags(const RunLog& log) {
  for (const auto& e : log.epochs)
    for (const auto& m : e.models)
      for (const auto& ml : m.modality)
        for (const auto* tags : {&ml.target_flipped, &ml.target_noisy})
          if (std::find(tags->begin(), tags->end(), true) != tags->end()) return true;
  return false;
}

}  // namespace

double epoch_loss_auc(const EpochLog& epoch) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& m : epoch.models) {
    if (!m.trained) continue;
    for (const auto& ml : m.modality) {
      std::vector<double> losses;
      std::vector<bool> noisy;
      tagged_losses(ml, losses, noisy);
      const double auc = loss_auc(losses, noisy);
      if (std::isfinite(auc)) {
        total += auc;
        ++n;
      }
    }
  }
  return n ? total / double(n) : kNaN;
}

LossSeparation export_loss_distributions(const RunLog& log, const std::filesystem::path& dir,
                                         int bins) {
  if (bins < 1) throw Error("export: bins must be >= 1");
  if (!has_tags(log)) throw Error("export: run log has no clean/noisy tags (was label noise injected?)");
  std::filesystem::create_directories(dir);
  LossSeparation out;
  std::ofstream auc_file(dir / "loss_auc.csv");
  auc_file << "epoch,auc\n";
  for (const auto& e : log.epochs) {
    std::vector<double> losses;
    std::vector<bool> noisy;
    for (const auto& m : e.models)
      if (m.trained)
        for (const auto& ml : m.modality) tagged_losses(ml, losses, noisy);
    const double auc = epoch_loss_auc(e);
    out.auc.push_back(auc);
    auc_file << e.epoch << ',' << (std::isfinite(auc) ? std::to_string(auc) : "nan") << '\n';

    double lo = 0.0, hi = 1.0;
    if (!losses.empty()) {
      lo = *std::min_element(losses.begin(), losses.end());
      hi = *std::max_element(losses.begin(), losses.end());
      if (hi <= lo) hi = lo + 1.0;
    }
    std::vector<std::size_t> clean(static_cast<std::size_t>(bins), 0), bad(clean);
    for (std::size_t i = 0; i < losses.size(); ++i) {
      auto b = static_cast<std::size_t>((losses[i] - lo) / (hi - lo) * bins);
      b = std::min(b, static_cast<std::size_t>(bins - 1));
      (noisy[i] ? bad : clean)[b]++;
    }
    std::ostringstream name;
    name << "loss_hist_epoch_" << std::setw(3) << std::setfill('0') << e.epoch << ".csv";
    std::ofstream hist(dir / name.str());
    hist << "bin_lo,bin_hi,clean,noisy\n" << std::setprecision(10);
    for (int b = 0; b < bins; ++b) {
      const double a = lo + (hi - lo) * b / bins;
      const double z = lo + (hi - lo) * (b + 1) / bins;
      hist << a << ',' << z << ',' << clean[static_cast<std::size_t>(b)] << ','
           << bad[static_cast<std::size_t>(b)] << '\n';
    }
    if (!hist) throw Error("export: failed writing " + (dir / name.str()).string());
  }
  if (!auc_file) throw Error("export: failed writing loss_auc.csv");
  return out;
}

// ---------------------------------------------------------------------------
// Mismatch rates

namespace {

// Majority identity of each cluster (smallest identity wins ties); -1 for
// clusters without members.
std::vector<int> majority_identities(std::span<const int> labels, std::span<const int> ids,
                                     int clusters) {
  std::vector<std::map<int, int>> votes(static_cast<std::size_t>(std::max(clusters, 0)));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0 && labels[i] < clusters) votes[static_cast<std::size_t>(labels[i])][ids[i]]++;
  std::vector<int> out(votes.size(), -1);
  for (std::size_t k = 0; k < votes.size(); ++k) {
    int best = -1, best_count = 0;
    for (const auto& [id, count] : votes[k])
      if (count > best_count) {
        best = id;
        best_count = count;
      }
    out[k] = best;
  }
  return out;
}

double pair_mismatch(const Matching& m, const std::vector<int>& major_p,
                     const std::vector<int>& major_q) {
  if (m.pairs.empty()) return kNaN;
  std::size_t bad = 0;
  for (const auto& pair : m.pairs) {
    const int a = pair.p < major_p.size() ? major_p[pair.p] : -1;
    const int b = pair.q < major_q.size() ? major_q[pair.q] : -2;
    if (a != b) ++bad;
  }
  return double(bad) / double(m.pairs.size());
}

}  // namespace

void tag_target_noise(RunLog& log, const Dataset& train) {
  const std::array<std::vector<int>, 2> ids = {train.identities(Modality::Visible),
                                               train.identities(Modality::Infrared)};
  for (auto& e : log.epochs) {
    for (auto& model : e.models) {
      if (!model.trained) continue;
      std::array<std::vector<int>, 2> major;
      for (std::size_t m = 0; m < 2; ++m) {
        const ModalityLog& ml = model.modality[m];
        if (ml.own_labels.size() != ids[m].size())
          throw Error("noise tags: run log does not belong to this dataset");
        major[m] = majority_identities(ml.own_labels, ids[m], ml.clusters);
      }
      for (std::size_t m = 0; m < 2; ++m) {
        ModalityLog& ml = model.modality[m];
        const std::size_t n = ml.intra_targets.size();
        if (ml.inter_targets.size() != n || ml.target_flipped.size() != n || n != ids[m].size())
          throw Error("noise tags: inconsistent target vectors");
        auto wrong = [&](int target, const std::vector<int>& major_ids, int id) {
          return target != kNoise &&
                 (target < 0 || static_cast<std::size_t>(target) >= major_ids.size() ||
                  major_ids[static_cast<std::size_t>(target)] != id);
        };
        ml.target_noisy.assign(n, false);
        for (std::size_t i = 0; i < n; ++i)
          ml.target_noisy[i] = ml.target_flipped[i] || wrong(ml.intra_targets[i], major[m], ids[m][i]) ||
                               wrong(ml.inter_targets[i], major[1 - m], ids[m][i]);
      }
    }
  }
}

MismatchSeries mismatch_rates(const RunLog& log, const Dataset& train) {
  const std::array<std::vector<int>, 2> ids = {train.identities(Modality::Visible),
                                               train.identities(Modality::Infrared)};
  MismatchSeries out;
  bool any_report = false;
  for (const auto& e : log.epochs) {
    std::array<std::array<std::vector<int>, 2>, 2> major;  // [model][modality]
    for (std::size_t z = 0; z < 2; ++z) {
      if (!e.models[z].trained) continue;
      for (std::size_t m = 0; m < 2; ++m) {
        const ModalityLog& ml = e.models[z].modality[m];
        if (ml.own_labels.size() != ids[m].size())
          throw Error("mismatch: run log does not belong to this dataset");
        major[z][m] = majority_identities(ml.own_labels, ids[m], ml.clusters);
      }
    }
    double modal = 0.0;
    std::size_t n_modal = 0;
    for (std::size_t z = 0; z < 2; ++z) {
      if (!e.cross_modal[z]) continue;
      any_report = true;
      const double r = pair_mismatch(*e.cross_modal[z], major[z][0], major[z][1]);
      if (std::isfinite(r)) {
        modal += r;
        ++n_modal;
      }
    }
    out.cross_modal.push_back(n_modal ? modal / double(n_modal) : kNaN);
    double model = 0.0;
    std::size_t n_model = 0;
    for (std::size_t m = 0; m < 2; ++m) {
      if (!e.cross_model[m]) continue;
      const double r = pair_mismatch(*e.cross_model[m], major[0][m], major[1][m]);
      if (std::isfinite(r)) {
        model += r;
        ++n_model;
      }
    }
    out.cross_model.push_back(n_model ? model / double(n_model) : kNaN);
  }
  if (!any_report) throw Error("mismatch: run log has no matching reports");
  return out;
}

MismatchSeries export_mismatch_rates(const RunLog& log, const Dataset& train,
                                     const std::filesystem::path& dir) {
  const MismatchSeries s = mismatch_rates(log, train);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "mismatch_rates.csv");
  out << "epoch,cross_modal,cross_model\n" << std::setprecision(10);
  for (std::size_t e = 0; e < s.cross_modal.size(); ++e) {
    out << log.epochs[e].epoch << ',';
    if (std::isfinite(s.cross_modal[e])) out << s.cross_modal[e]; else out << "nan";
    out << ',';
    if (std::isfinite(s.cross_model[e])) out << s.cross_model[e]; else out << "nan";
    out << '\n';
  }
  if (!out) throw Error("export: failed writing mismatch_rates.csv");
  return s;
}

double theil_sen_slope(std::span<const double> series) {
  std::vector<double> slopes;
  for (std::size_t i = 0; i < series.size(); ++i)
    for (std::size_t j = i + 1; j < series.size(); ++j)
      if (std::isfinite(series[i]) && std::isfinite(series[j]))
        slopes.push_back((series[j] - series[i]) / double(j - i));
  if (slopes.empty()) return kNaN;
  std::sort(slopes.begin(), slopes.end());
  const std::size_t n = slopes.size();
  return n % 2 ? slopes[n / 2] : 0.5 * (slopes[n / 2 - 1] + slopes[n / 2]);
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const SynthSpec& s) {
  return {{"identities", s.identities},
          {"samples_per_modality", s.samples_per_modality},
          {"dim", s.dim},
          {"center_spread", s.center_spread},
          {"noise_sigma", s.noise_sigma},
          {"modality_offset", s.modality_offset},
          {"outlier_fraction", s.outlier_fraction},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  s.identities = j.at("identities").get<int>();
  s.samples_per_modality = j.at("samples_per_modality").get<int>();
  s.dim = j.at("dim").get<int>();
  s.center_spread = j.at("center_spread").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.modality_offset = j.at("modality_offset").get<double>();
  s.outlier_fraction = j.at("outlier_fraction").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

json to_json(const TrainConfig& c) {
  json j = {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"lr_decay_factor", c.lr_decay_factor},
            {"lr_decay_period", c.lr_decay_period},
            {"warmup_epochs", c.warmup_epochs},
            {"seed_a", c.seed_a},
            {"seed_b", c.seed_b},
            {"shuffle_seed", c.shuffle_seed},
            {"init_seed", c.init_seed},
            {"init_spread", c.init_spread},
            {"embed_dim", c.embed_dim},
            {"hidden_dim", c.hidden_dim},
            {"lambda", c.lambda},
            {"eta", c.eta},
            {"tau", c.tau},
            {"mu", c.ral.mu},
            {"gamma_floor", c.ral.gamma_floor},
            {"gmm_max_iter", c.ral.max_iter},
            {"gmm_tol", c.ral.tol},
            {"eps", c.dbscan.eps},
            {"min_pts", c.dbscan.min_pts},
            {"ral_intra", c.ablation.ral_intra},
            {"ral_inter", c.ablation.ral_inter},
            {"ccm_cross_modal", c.ablation.ccm_cross_modal},
            {"ccm_cross_model", c.ablation.ccm_cross_model},
            {"single_model", c.ablation.single_model},
            {"label_noise", c.label_noise},
            {"feature_jitter", c.feature_jitter}};
  j["fixed_gamma"] = c.fixed_gamma ? json(*c.fixed_gamma) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.lr_decay_factor = j.at("lr_decay_factor").get<double>();
  c.lr_decay_period = j.at("lr_decay_period").get<int>();
  c.warmup_epochs = j.at("warmup_epochs").get<int>();
  c.seed_a = j.at("seed_a").get<std::uint64_t>();
  c.seed_b = j.at("seed_b").get<std::uint64_t>();
  c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  c.init_spread = j.at("init_spread").get<double>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.lambda = j.at("lambda").get<double>();
  c.eta = j.at("eta").get<double>();
  c.tau = j.at("tau").get<double>();
  c.ral.mu = j.at("mu").get<double>();
  c.ral.gamma_floor = j.at("gamma_floor").get<double>();
  c.ral.max_iter = j.at("gmm_max_iter").get<int>();
  c.ral.tol = j.at("gmm_tol").get<double>();
  c.dbscan.eps = j.at("eps").get<double>();
  c.dbscan.min_pts = j.at("min_pts").get<int>();
  c.ablation.ral_intra = j.at("ral_intra").get<bool>();
  c.ablation.ral_inter = j.at("ral_inter").get<bool>();
  c.ablation.ccm_cross_modal = j.at("ccm_cross_modal").get<bool>();
  c.ablation.ccm_cross_model = j.at("ccm_cross_model").get<bool>();
  c.ablation.single_model = j.at("single_model").get<bool>();
  c.label_noise = j.at("label_noise").get<double>();
  c.feature_jitter = j.at("feature_jitter").get<double>();
  if (!j.at("fixed_gamma").is_null()) c.fixed_gamma = j.at("fixed_gamma").get<double>();
  return c;
}

json to_json(const Matching& m) {
  json pairs = json::array();
  for (const auto& p : m.pairs) pairs.push_back({p.p, p.q, p.round, p.cost});
  return {{"size_p", m.size_p}, {"size_q", m.size_q}, {"rounds", m.rounds}, {"pairs", pairs}};
}

Matching matching_from_json(const json& j) {
  Matching m;
  m.size_p = j.at("size_p").get<std::size_t>();
  m.size_q = j.at("size_q").get<std::size_t>();
  m.rounds = j.at("rounds").get<int>();
  for (const auto& p : j.at("pairs"))
    m.pairs.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(), p.at(2).get<int>(),
                       p.at(3).get<double>()});
  return m;
}

namespace {

json to_json(const GmmParams& g) {
  return {{"means", g.means}, {"variances", g.variances}, {"weights", g.weights}};
}

GmmParams gmm_from_json(const json& j) {
  GmmParams g;
  g.means = j.at("means").get<std::array<double, 2>>();
  g.variances = j.at("variances").get<std::array<double, 2>>();
  g.weights = j.at("weights").get<std::array<double, 2>>();
  return g;
}

json to_json(const ModalityLog& ml) {
  return {{"clusters", ml.clusters},
          {"noise_points", ml.noise_points},
          {"own_labels", ml.own_labels},
          {"flipped", ml.flipped},
          {"intra_targets", ml.intra_targets},
          {"inter_targets", ml.inter_targets},
          {"target_flipped", ml.target_flipped},
          {"target_noisy", ml.target_noisy},
          {"diagnostic_loss", ml.diagnostic_loss},
          {"gammas", ml.gammas},
          {"gmm_degenerate", ml.gmm_degenerate},
          {"gmm", to_json(ml.gmm)}};
}

ModalityLog modality_log_from_json(const json& j) {
  ModalityLog ml;
  ml.clusters = j.at("clusters").get<int>();
  ml.noise_points = j.at("noise_points").get<std::size_t>();
  ml.own_labels = j.at("own_labels").get<std::vector<int>>();
  ml.flipped = j.at("flipped").get<std::vector<bool>>();
  ml.intra_targets = j.at("intra_targets").get<std::vector<int>>();
  ml.inter_targets = j.at("inter_targets").get<std::vector<int>>();
  ml.target_flipped = j.at("target_flipped").get<std::vector<bool>>();
  ml.target_noisy = j.value("target_noisy", std::vector<bool>{});
  ml.diagnostic_loss = j.at("diagnostic_loss").get<std::vector<double>>();
  ml.gammas = j.at("gammas").get<std::vector<double>>();
  ml.gmm_degenerate = j.at("gmm_degenerate").get<bool>();
  ml.gmm = gmm_from_json(j.at("gmm"));
  return ml;
}

json to_json(const RetrievalMetrics& m) {
  return {{"rank1", m.rank1}, {"rank10", m.rank10}, {"rank20", m.rank20}, {"map", m.map},
          {"minp", m.minp},   {"queries", m.queries}, {"skipped", m.skipped}};
}

RetrievalMetrics retrieval_from_json(const json& j) {
  RetrievalMetrics m;
  m.rank1 = j.at("rank1").get<double>();
  m.rank10 = j.at("rank10").get<double>();
  m.rank20 = j.at("rank20").get<double>();
  m.map = j.at("map").get<double>();
  m.minp = j.at("minp").get<double>();
  m.queries = j.at("queries").get<std::size_t>();
  m.skipped = j.at("skipped").get<std::size_t>();
  return m;
}

EvaluationReport report_from_json(const json& j) {
  return {retrieval_from_json(j.at("infrared_to_visible")),
          retrieval_from_json(j.at("visible_to_infrared"))};
}

}  // namespace

json to_json(const EvaluationReport& r) {
  return {{"infrared_to_visible", to_json(r.infrared_to_visible)},
          {"visible_to_infrared", to_json(r.visible_to_infrared)}};
}

json to_json(const RunLog& log) {
  json warm = json::array();
  for (const auto& w : log.warmup)
    warm.push_back({{"batch_losses", w.batch_losses}, {"epoch_clusters", w.epoch_clusters}});
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    json models = json::array();
    for (const auto& m : e.models)
      models.push_back({{"trained", m.trained},
                        {"mean_batch_loss", m.mean_batch_loss},
                        {"intra_term", m.intra_term},
                        {"inter_term", m.inter_term},
                        {"clamped", m.clamped},
                        {"batch_losses", m.batch_losses},
                        {"modality", {to_json(m.modality[0]), to_json(m.modality[1])}}});
    json modal = json::array(), model = json::array();
    for (const auto& m : e.cross_modal) modal.push_back(m ? to_json(*m) : json(nullptr));
    for (const auto& m : e.cross_model) model.push_back(m ? to_json(*m) : json(nullptr));
    epochs.push_back({{"epoch", e.epoch},
                      {"lr", e.lr},
                      {"models", models},
                      {"cross_modal", modal},
                      {"cross_model", model}});
  }
  return {{"warmup", warm}, {"epochs", epochs}};
}

RunLog run_log_from_json(const json& j) {
  RunLog log;
  const json& warm = j.at("warmup");
  for (std::size_t z = 0; z < 2 && z < warm.size(); ++z) {
    log.warmup[z].batch_losses = warm[z].at("batch_losses").get<std::vector<double>>();
    log.warmup[z].epoch_clusters = warm[z].at("epoch_clusters").get<std::vector<int>>();
  }
  for (const auto& je : j.at("epochs")) {
    EpochLog e;
    e.epoch = je.at("epoch").get<int>();
    e.lr = je.at("lr").get<double>();
    for (std::size_t z = 0; z < 2; ++z) {
      const json& jm = je.at("models").at(z);
      ModelEpochLog& m = e.models[z];
      m.trained = jm.at("trained").get<bool>();
      m.mean_batch_loss = jm.at("mean_batch_loss").get<double>();
      m.intra_term = jm.at("intra_term").get<double>();
      m.inter_term = jm.at("inter_term").get<double>();
      m.clamped = jm.at("clamped").get<std::size_t>();
      m.batch_losses = jm.at("batch_losses").get<std::vector<double>>();
      for (std::size_t k = 0; k < 2; ++k)
        m.modality[k] = modality_log_from_json(jm.at("modality").at(k));
    }
    for (std::size_t k = 0; k < 2; ++k) {
      const json& a = je.at("cross_modal").at(k);
      if (!a.is_null()) e.cross_modal[k] = matching_from_json(a);
      const json& b = je.at("cross_model").at(k);
      if (!b.is_null()) e.cross_model[k] = matching_from_json(b);
    }
    log.epochs.push_back(std::move(e));
  }
  return log;
}

void write_run_document(const RunResult& run, const std::filesystem::path& path) {
  json metrics = {{"joint", to_json(run.metrics.joint)},
                  {"model_a", to_json(run.metrics.model_a)},
                  {"model_b", to_json(run.metrics.model_b)}};
  const json doc = {{"format", "rode-run"},
                    {"version", 1},
                    {"name", run.name},
                    {"seed", run.seed},
                    {"ok", run.ok},
                    {"error", run.error},
                    {"benchmark",
                     {{"synth", to_json(run.benchmark.synth)},
                      {"test_identities", run.benchmark.test_identities}}},
                    {"config", to_json(run.config)},
                    {"metrics", metrics},
                    {"loss_auc", number_or_null(run.loss_auc)},
                    {"log", to_json(run.log)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump() << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

RunResult read_run_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open run document " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw Error("run document " + path.string() + " is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "rode-run") throw Error("not a run document: " + path.string());
  try {
    RunResult r;
    r.name = doc.at("name").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.ok = doc.at("ok").get<bool>();
    r.error = doc.at("error").get<std::string>();
    r.benchmark.synth = synth_spec_from_json(doc.at("benchmark").at("synth"));
    r.benchmark.test_identities = doc.at("benchmark").at("test_identities").get<int>();
    r.config = train_config_from_json(doc.at("config"));
    r.metrics.joint = report_from_json(doc.at("metrics").at("joint"));
    r.metrics.model_a = report_from_json(doc.at("metrics").at("model_a"));
    r.metrics.model_b = report_from_json(doc.at("metrics").at("model_b"));
    r.loss_auc = number_or_nan(doc.at("loss_auc"));
    r.log = run_log_from_json(doc.at("log"));
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error("run document " + path.string() + " is malformed: " + e.what());
  }
}

void write_table_csv(const ResultTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "name,seed,ok,rank1,map,minp,loss_auc,error\n" << std::setprecision(12);
  for (const auto& r : table.rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.name << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',' << r.rank1 << ',' << r.map << ','
        << r.minp << ',';
    if (std::isfinite(r.loss_auc)) out << r.loss_auc; else out << "nan";
    out << ',' << err << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

ResultTable read_table_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open table " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("name,seed,ok,", 0) != 0)
    throw Error("table " + path.string() + " has an unexpected header");
  ResultTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() == 7) f.emplace_back();
    if (f.size() != 8)
      throw Error("table " + path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
    try {
      ResultRow r;
      r.name = f[0];
      r.seed = std::stoull(f[1]);
      r.ok = f[2] == "1";
      r.rank1 = std::stod(f[3]);
      r.map = std::stod(f[4]);
      r.minp = std::stod(f[5]);
      r.loss_auc = f[6] == "nan" ? kNaN : std::stod(f[6]);
      r.error = f[7];
      table.rows.push_back(r);
    } catch (const std::exception&) {
      throw Error("table " + path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return table;
}

void write_metrics(const EvaluationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(report).dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace rode
