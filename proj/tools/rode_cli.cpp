// Command-line front end: dataset generation, training, evaluation, and the
// ablation / gamma-sweep / export studies.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rode/error.hpp"
#include "rode/harness.hpp"

namespace fs = std::filesystem;
using namespace rode;

namespace {

void add_synth_options(CLI::App* app, SynthSpec& s) {
  app->add_option("--identities", s.identities, "Number of identities")->capture_default_str();
  app->add_option("--samples-per-modality", s.samples_per_modality,
                  "Samples per identity and modality")->capture_default_str();
  app->add_option("--dim", s.dim, "Feature dimension")->capture_default_str();
  app->add_option("--center-spread", s.center_spread, "Std of identity centers")->capture_default_str();
  app->add_option("--noise-sigma", s.noise_sigma, "Per-sample Gaussian noise")->capture_default_str();
  app->add_option("--modality-offset", s.modality_offset,
                  "Norm of the infrared offset")->capture_default_str();
  app->add_option("--outlier-fraction", s.outlier_fraction,
                  "Fraction of samples replaced by outliers")->capture_default_str();
  app->add_option("--seed", s.seed, "Generator seed")->capture_default_str();
}

struct TrainOptions {
  TrainConfig config;
  double fixed_gamma = 0.0;
  CLI::Option* fixed_gamma_opt = nullptr;
  bool no_ral_intra = false, no_ral_inter = false;
  bool no_ccm_cross_modal = false, no_ccm_cross_model = false;

  TrainConfig resolve() const {
    TrainConfig c = config;
    if (fixed_gamma_opt && fixed_gamma_opt->count() > 0) c.fixed_gamma = fixed_gamma;
    c.ablation.ral_intra = c.ablation.ral_intra && !no_ral_intra;
    c.ablation.ral_inter = c.ablation.ral_inter && !no_ral_inter;
    c.ablation.ccm_cross_modal = c.ablation.ccm_cross_modal && !no_ccm_cross_modal;
    c.ablation.ccm_cross_model = c.ablation.ccm_cross_model && !no_ccm_cross_model;
    return c;
  }
};

void add_train_options(CLI::App* app, TrainOptions& o) {
  TrainConfig& c = o.config;
  app->add_option("--epochs", c.epochs, "Co-training epochs")->capture_default_str();
  app->add_option("--batch-size", c.batch_size)->capture_default_str();
  app->add_option("--lr", c.lr, "Initial learning rate")->capture_default_str();
  app->add_option("--lr-decay-factor", c.lr_decay_factor)->capture_default_str();
  app->add_option("--lr-decay-period", c.lr_decay_period, "Epochs per decay step")->capture_default_str();
  app->add_option("--warmup-epochs", c.warmup_epochs)->capture_default_str();
  app->add_option("--seed-a", c.seed_a, "Initialization seed of model A")->capture_default_str();
  app->add_option("--seed-b", c.seed_b, "Initialization seed of model B")->capture_default_str();
  app->add_option("--shuffle-seed", c.shuffle_seed)->capture_default_str();
  app->add_option("--init-seed", c.init_seed, "Seed of the shared base weights")->capture_default_str();
  app->add_option("--init-spread", c.init_spread,
                  "Scale of the model-specific weight perturbation")->capture_default_str();
  app->add_option("--embed-dim", c.embed_dim)->capture_default_str();
  app->add_option("--hidden-dim", c.hidden_dim, "0 for an affine projector")->capture_default_str();
  app->add_option("--lambda", c.lambda, "Intra/inter trade-off")->capture_default_str();
  app->add_option("--eta", c.eta, "Memory momentum")->capture_default_str();
  app->add_option("--tau", c.tau, "Softmax temperature")->capture_default_str();
  app->add_option("--mu", c.ral.mu, "Exponent scale")->capture_default_str();
  app->add_option("--gamma-floor", c.ral.gamma_floor)->capture_default_str();
  app->add_option("--gmm-max-iter", c.ral.max_iter)->capture_default_str();
  app->add_option("--gmm-tol", c.ral.tol)->capture_default_str();
  app->add_option("--eps", c.dbscan.eps, "DBSCAN cosine-distance radius")->capture_default_str();
  app->add_option("--min-pts", c.dbscan.min_pts)->capture_default_str();
  app->add_flag("--no-ral-intra", o.no_ral_intra, "Drop the intra-modal term");
  app->add_flag("--no-ral-inter", o.no_ral_inter, "Drop the inter-modal term");
  app->add_flag("--no-ccm-cross-modal", o.no_ccm_cross_modal, "Skip cross-modal matching");
  app->add_flag("--no-ccm-cross-model", o.no_ccm_cross_model, "Skip cross-model matching");
  app->add_flag("--single-model", c.ablation.single_model, "Train model A alone");
  o.fixed_gamma_opt = app->add_option("--fixed-gamma", o.fixed_gamma, "Use one exponent for all samples");
  app->add_option("--label-noise", c.label_noise, "Injected pseudo-label noise rate")->capture_default_str();
  app->add_option("--feature-jitter", c.feature_jitter)->capture_default_str();
}

std::vector<std::uint64_t> seed_range(int count) {
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < count; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  return seeds;
}

// The config file holds `key = value` lines whose keys are long option names
// of the chosen subcommand. They are spliced in ahead of the real arguments so
// that explicit flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> out;
  std::string config_path;
  std::size_t config_at = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      config_at = i;
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      config_at = i;
      break;
    }
  }
  if (config_path.empty()) return args;
  if (!fs::exists(config_path)) throw Error("config file not found: " + config_path);
  std::vector<CLI::ConfigItem> items = CLI::ConfigINI().from_file(config_path);
  std::vector<std::string> from_file;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    std::string value;
    for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
    from_file.push_back("--" + item.name + "=" + value);
  }
  const std::size_t skip = args[config_at] == "--config" ? 2 : 1;
  // Subcommand name first, then file values, then the remaining arguments.
  out.insert(out.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(config_at));
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(config_at + skip), args.end());
  return out;
}

void print_report(const std::string& label, const EvaluationReport& r) {
  auto row = [](const char* dir, const RetrievalMetrics& m) {
    std::printf("  %-6s R1 %6.2f  R10 %6.2f  R20 %6.2f  mAP %6.2f  mINP %6.2f  (%zu queries)\n", dir,
                100 * m.rank1, 100 * m.rank10, 100 * m.rank20, 100 * m.map, 100 * m.minp, m.queries);
  };
  std::printf("%s\n", label.c_str());
  row("I->V", r.infrared_to_visible);
  row("V->I", r.visible_to_infrared);
}

void print_table(const ResultTable& table) {
  std::printf("%-22s %8s %8s %8s %8s\n", "variant", "Rank-1", "mAP", "mINP", "AUC");
  for (const auto& name : table.names()) {
    const auto m = table.mean(name);
    if (!m) {
      std::printf("%-22s   failed on every seed\n", name.c_str());
      continue;
    }
    std::printf("%-22s %8.2f %8.2f %8.2f %8.3f\n", name.c_str(), 100 * m->rank1, 100 * m->map,
                100 * m->minp, m->loss_auc);
  }
  for (const auto& r : table.rows)
    if (!r.ok) std::printf("  run %s (seed %llu) failed: %s\n", r.name.c_str(),
                           static_cast<unsigned long long>(r.seed), r.error.c_str());
}

void write_matchings(const RunLog& log, const fs::path& path) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : log.epochs) {
    nlohmann::json modal = nlohmann::json::array(), model = nlohmann::json::array();
    for (const auto& m : e.cross_modal) modal.push_back(m ? to_json(*m) : nlohmann::json(nullptr));
    for (const auto& m : e.cross_model) model.push_back(m ? to_json(*m) : nlohmann::json(nullptr));
    out.push_back({{"epoch", e.epoch}, {"cross_modal", modal}, {"cross_model", model}});
  }
  std::ofstream f(path);
  f << out.dump(1) << '\n';
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("RoDE: robust dual-model co-training for unsupervised visible-infrared re-identification");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value file; explicit flags take precedence");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic two-modality dataset");
  SynthSpec synth;
  std::string gen_out, gen_test_out;
  int gen_test_ids = 0;
  add_config(gen);
  add_synth_options(gen, synth);
  gen->add_option("--out", gen_out, "Dataset file (JSON lines)")->required();
  gen->add_option("--test-identities", gen_test_ids,
                  "Extra identities written to --test-out as a held-out split");
  gen->add_option("--test-out", gen_test_out, "Held-out dataset file");

  // train
  auto* tr = app.add_subcommand("train", "Warm up and co-train both models on a dataset");
  TrainOptions train_opts;
  std::string tr_dataset, tr_test, tr_out = "run";
  add_config(tr);
  add_train_options(tr, train_opts);
  tr->add_option("--dataset", tr_dataset, "Training dataset (JSON lines)")->required();
  tr->add_option("--test-dataset", tr_test, "Held-out dataset evaluated after training");
  tr->add_option("--out", tr_out, "Output directory")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_dataset, ev_out, ev_single;
  add_config(ev);
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--dataset", ev_dataset, "Evaluation dataset")->required();
  ev->add_option("--single", ev_single, "Evaluate model A or B alone")->check(CLI::IsMember({"A", "B"}));
  ev->add_option("--out", ev_out, "Metrics file (JSON)");

  // ablate / sweep-gamma share the benchmark options
  BenchmarkSpec bench = standard_benchmark(0);
  TrainOptions study_opts;
  study_opts.config = standard_config();
  int seeds = 3;
  std::string study_out = "study";
  auto add_study = [&](CLI::App* sub) {
    add_config(sub);
    add_synth_options(sub, bench.synth);
    sub->add_option("--test-identities", bench.test_identities)->capture_default_str();
    add_train_options(sub, study_opts);
    sub->add_option("--seeds", seeds, "Seeds 0..n-1")->capture_default_str();
    sub->add_option("--out", study_out, "Output directory")->capture_default_str();
  };
  auto* ab = app.add_subcommand("ablate", "Full method and every ablation variant on the synthetic benchmark");
  add_study(ab);
  auto* sw = app.add_subcommand("sweep-gamma", "Fixed-exponent sweep against the adaptive exponents");
  add_study(sw);
  std::vector<double> gammas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  sw->add_option("--gammas", gammas, "Fixed exponents in (0, 1]")->delimiter(',')->expected(1, -1);

  // export
  auto* ex = app.add_subcommand("export", "Loss histograms, mismatch rates and matching reports of a run");
  std::string ex_run, ex_dataset, ex_out = "export";
  int bins = 20;
  add_config(ex);
  ex->add_option("--run", ex_run, "Run document")->required();
  ex->add_option("--dataset", ex_dataset,
                 "Training dataset of the run (default: regenerate its benchmark)");
  ex->add_option("--out", ex_out)->capture_default_str();
  ex->add_option("--bins", bins)->capture_default_str();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen) {
      if (gen_test_ids > 0) {
        if (gen_test_out.empty()) throw Error("--test-identities needs --test-out");
        const BenchmarkData data = make_benchmark({synth, gen_test_ids});
        save_dataset(data.train, gen_out);
        save_dataset(data.test, gen_test_out);
        std::printf("wrote %zu training samples to %s and %zu held-out samples to %s\n",
                    data.train.size(), gen_out.c_str(), data.test.size(), gen_test_out.c_str());
      } else {
        const Dataset data = generate_synthetic(synth);
        save_dataset(data, gen_out);
        std::printf("wrote %zu samples to %s\n", data.size(), gen_out.c_str());
      }
    } else if (*tr) {
      const TrainConfig config = train_opts.resolve();
      const Dataset data = load_dataset(tr_dataset);
      fs::create_directories(tr_out);
      RunResult run;
      run.name = "train";
      run.config = config;
      run.loss_auc = std::numeric_limits<double>::quiet_NaN();
      TrainResult result = train(data, config);
      run.log = std::move(result.log);
      run.ok = true;
      tag_target_noise(run.log, data);
      for (const auto& e : run.log.epochs) {
        std::printf("epoch %3d  lr %.3g", e.epoch, e.lr);
        for (std::size_t z = 0; z < 2; ++z)
          if (e.models[z].trained)
            std::printf("  %s: loss %.4f K %d/%d", z == 0 ? "A" : "B", e.models[z].mean_batch_loss,
                        e.models[z].modality[0].clusters, e.models[z].modality[1].clusters);
        std::printf("\n");
      }
      if (!run.log.epochs.empty()) run.loss_auc = epoch_loss_auc(run.log.epochs.back());
      save_checkpoint(result.state, fs::path(tr_out) / "checkpoint.json");
      if (!tr_test.empty()) {
        const Dataset test = load_dataset(tr_test);
        const auto single = config.ablation.single_model ? std::optional<ModelId>(ModelId::A) : std::nullopt;
        run.metrics.joint = evaluate(result.state, test, single);
        write_metrics(run.metrics.joint, fs::path(tr_out) / "metrics.json");
        print_report("held-out retrieval", run.metrics.joint);
      }
      write_run_document(run, fs::path(tr_out) / "run.json");
      std::printf("wrote %s/{checkpoint.json,run.json}\n", tr_out.c_str());
    } else if (*ev) {
      const TrainingState state = load_checkpoint(ev_ckpt);
      const Dataset data = load_dataset(ev_dataset);
      std::optional<ModelId> single;
      if (!ev_single.empty()) single = ev_single == "A" ? ModelId::A : ModelId::B;
      const EvaluationReport report = evaluate(state, data, single);
      print_report(ev_single.empty() ? "joint (A+B)" : "model " + ev_single, report);
      if (!ev_out.empty()) write_metrics(report, ev_out);
    } else if (*ab || *sw) {
      const TrainConfig config = study_opts.resolve();
      fs::create_directories(study_out);
      const ExperimentPlan plan =
          *ab ? make_ablation_plan(bench, config, seed_range(seeds), fs::path(study_out) / "runs")
              : make_gamma_sweep_plan(bench, config, gammas, seed_range(seeds),
                                      fs::path(study_out) / "runs");
      const ResultTable table = *ab ? run_ablation_suite(plan) : run_gamma_sweep(plan);
      const fs::path csv = fs::path(study_out) / (*ab ? "ablation.csv" : "gamma_sweep.csv");
      write_table_csv(table, csv);
      print_table(table);
      std::printf("wrote %s\n", csv.string().c_str());
    } else if (*ex) {
      RunResult run = read_run_document(ex_run);
      const Dataset train_set = ex_dataset.empty() ? make_benchmark(run.benchmark).train
                                                   : load_dataset(ex_dataset);
      tag_target_noise(run.log, train_set);
      fs::create_directories(ex_out);
      write_matchings(run.log, fs::path(ex_out) / "matchings.json");
      const MismatchSeries s = export_mismatch_rates(run.log, train_set, ex_out);
      std::printf("mismatch trend (Theil-Sen slope per epoch): cross-modal %.4f, cross-model %.4f\n",
                  theil_sen_slope(s.cross_modal), theil_sen_slope(s.cross_model));
      try {
        const LossSeparation sep = export_loss_distributions(run.log, ex_out, bins);
        if (!sep.auc.empty()) std::printf("final-epoch clean/noisy loss AUC %.4f\n", sep.auc.back());
      } catch (const Error& e) {
        std::printf("loss histograms skipped: %s\n", e.what());
      }
      std::printf("wrote exports to %s\n", ex_out.c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
