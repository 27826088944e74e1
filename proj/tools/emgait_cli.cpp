// emgait command-line driver.
//
//   emgait synth       --out-dir D [--synth-config f.json] [--seed N]
//   emgait preprocess  (--data-dir D | --synthetic) --out-dir O
//   emgait features    --out-dir O
//   emgait pca         --out-dir O
//   emgait train       --model rf --input features [--config f.json] --out-dir O
//   emgait evaluate    --trials 50 --models nb,dt,rf,lda,dcnn --inputs features,pca1,... --out-dir O
//   emgait report      --out-dir O
//
// Commands after preprocess reuse O/windows.emga when no data source is given.
// Exit codes: 0 success, 2 validation failure, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "emgait/binary_io.hpp"
#include "emgait/dsp.hpp"
#include "emgait/error.hpp"
#include "emgait/experiment.hpp"
#include "emgait/pca.hpp"

namespace fs = std::filesystem;
using namespace emgait;
using nlohmann::json;

namespace {

struct Options {
  std::uint64_t seed = 0;
  int trials = 50;
  double test_fraction = 0.1;
  std::string models;
  std::string inputs;
  std::string out_dir = "out";
  std::string data_dir;
  std::string exclude_subjects;
  bool exclude_injured = false;
  bool synthetic = false;
  std::string synth_config;
  double stance_fraction = 0.60;
  double qc_cv_threshold = 0.20;
  std::string band = "20:300";
  int order = 4;
  double target_rate = 500.0;
  bool anti_alias = false;
  std::string label_mode = "center";
  std::string zc_mode = "count";
  std::string config;
  std::string model = "rf";
  std::string input = "features";
  int search_iter = -1;
  int max_epochs = -1;
  int patience = -1;
  bool honest = false;
  bool no_tune = false;
  bool dump_filter = false;
};

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::io_error, "cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, path + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw Error(Errc::io_error, "cannot open " + p.string() + " for writing");
  f << text;
}

experiment::PreprocessConfig preprocess_config(const Options& o) {
  experiment::PreprocessConfig c;
  const auto colon = o.band.find(':');
  if (colon == std::string::npos) throw Error(Errc::invalid_band, "--band expects LOW:HIGH");
  try {
    c.band_low_hz = std::stod(o.band.substr(0, colon));
    c.band_high_hz = std::stod(o.band.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(Errc::invalid_band, "--band expects numeric LOW:HIGH");
  }
  c.filter_order = o.order;
  c.target_rate_hz = o.target_rate;
  c.anti_alias = o.anti_alias;
  c.stance_fraction = o.stance_fraction;
  c.qc.cv_threshold = o.qc_cv_threshold;
  json j = experiment::to_json(c);
  j["label_mode"] = o.label_mode;
  j["zc_mode"] = o.zc_mode;
  return experiment::preprocess_config_from_json(j);
}

std::vector<Recording> load_recordings(const Options& o) {
  std::vector<Recording> recs;
  if (o.synthetic) {
    SyntheticConfig sc;
    if (!o.synth_config.empty()) sc = synthetic_config_from_json(read_json_file(o.synth_config));
    recs = generate_synthetic(sc, o.seed);
  } else if (!o.data_dir.empty()) {
    recs = load_dataset(o.data_dir);
  } else {
    throw Error(Errc::invalid_config, "no data source: pass --data-dir or --synthetic");
  }
  if (!o.exclude_subjects.empty()) {
    std::set<std::string> ids;
    std::stringstream ss(o.exclude_subjects);
    std::string id;
    while (std::getline(ss, id, ',')) {
      if (!id.empty()) ids.insert(id);
    }
    recs = exclude_subjects(std::move(recs), ids);
  }
  if (o.exclude_injured) recs = exclude_injured(std::move(recs));
  return recs;
}

bool has_source(const Options& o) { return o.synthetic || !o.data_dir.empty(); }

experiment::Dataset obtain_dataset(const Options& o) {
  const fs::path stored = fs::path(o.out_dir) / "windows.emga";
  const auto pc = preprocess_config(o);
  if (!has_source(o) && fs::exists(stored)) {
    return experiment::dataset_from_windows(io::read_window_tensor(stored), pc.zc_mode);
  }
  return experiment::preprocess(load_recordings(o), pc);
}

experiment::ModelsSpec models_spec(const Options& o) {
  experiment::ModelsSpec s;
  if (!o.config.empty()) s = experiment::models_spec_from_json(read_json_file(o.config));
  if (!o.models.empty()) experiment::set_models(s, o.models);
  if (!o.inputs.empty()) experiment::set_inputs(s, o.inputs);
  if (o.search_iter > 0) s.search.n_iter = o.search_iter;
  if (o.max_epochs > 0) s.dcnn_config.max_epochs = o.max_epochs;
  if (o.patience > 0) s.dcnn_config.patience = o.patience;
  if (o.honest) s.dcnn_config.selection = nn::Selection::val_accuracy;
  if (o.no_tune) s.tune = false;
  experiment::validate(s);
  return s;
}

void print_summary(const experiment::ExperimentReport& r) {
  std::printf("%-6s %-9s %8s %8s %8s %8s %8s %12s\n", "model", "input", "mean", "std", "min", "max", "ratio",
              "latency_ms");
  for (const auto& a : r.aggregates) {
    std::printf("%-6s %-9s %8.4f %8.4f %8.4f %8.4f %8.4f %12.4f\n", a.model.c_str(), a.input_kind.c_str(), a.mean_acc,
                a.std_acc, a.min_acc, a.max_acc, a.mean_ratio, a.mean_latency_ms);
  }
}

int cmd_synth(const Options& o) {
  SyntheticConfig sc;
  if (!o.synth_config.empty()) sc = synthetic_config_from_json(read_json_file(o.synth_config));
  const auto recs = generate_synthetic(sc, o.seed);
  write_dataset(recs, o.out_dir);
  std::printf("wrote %zu recordings to %s\n", recs.size(), o.out_dir.c_str());
  return 0;
}

int cmd_preprocess(const Options& o) {
  const auto pc = preprocess_config(o);
  const auto recs = load_recordings(o);
  const auto data = experiment::preprocess(recs, pc);
  fs::create_directories(o.out_dir);
  const fs::path out(o.out_dir);
  io::write_window_tensor(out / "windows.emga", data.windows);
  io::write_feature_matrix(out / "features.emga", data.features);
  json meta = {{"config", experiment::to_json(pc)}, {"stats", experiment::to_json(data.stats)}};
  write_text(out / "preprocess.json", meta.dump(2) + "\n");
  if (o.dump_filter && !recs.empty()) {
    const double fs_hz = recs.front().sample_rate_hz;
    const auto band = dsp::design_butterworth_bandpass(pc.filter_order, pc.band_low_hz, pc.band_high_hz, fs_hz);
    write_text(out / "filter.json", band.to_json() + "\n");
  }
  std::printf("windows %zu (stance %zu, swing %zu) from %zu/%zu recordings; rejected subjects %zu\n",
              data.stats.windows, data.stats.stance_windows, data.stats.swing_windows, data.stats.recordings_kept,
              data.stats.recordings_in, data.stats.subjects_rejected.size());
  return 0;
}

int cmd_features(const Options& o) {
  const auto data = obtain_dataset(o);
  fs::create_directories(o.out_dir);
  io::write_feature_matrix(fs::path(o.out_dir) / "features.emga", data.features);
  std::printf("features %zu x %zu\n", data.features.X.rows(), data.features.X.cols());
  return 0;
}

int cmd_pca(const Options& o) {
  const auto data = obtain_dataset(o);
  const auto scaled = features::apply_scaler(features::fit_scaler(data.features.X), data.features.X);
  const auto model = pca::fit_pca(scaled);
  fs::create_directories(o.out_dir);
  write_text(fs::path(o.out_dir) / "pca.json", pca::to_json(model) + "\n");
  std::printf("explained variance ratio:");
  for (std::size_t i = 0; i < std::min<std::size_t>(5, model.explained_variance_ratio.size()); ++i) {
    std::printf(" %.4f", model.explained_variance_ratio[i]);
  }
  std::printf("\n");
  return 0;
}

int cmd_train(const Options& o) {
  const auto data = obtain_dataset(o);
  experiment::ModelsSpec spec;
  spec.tune = false;
  spec.latency_repeats = 3;
  if (o.model == "dcnn") {
    spec.classical.clear();
    spec.dcnn = true;
    if (!o.config.empty()) spec.dcnn_config = nn::config_from_json(read_json_file(o.config));
    if (o.max_epochs > 0) spec.dcnn_config.max_epochs = o.max_epochs;
    if (o.patience > 0) spec.dcnn_config.patience = o.patience;
    if (o.honest) spec.dcnn_config.selection = nn::Selection::val_accuracy;
  } else {
    spec.dcnn = false;
    spec.classical = {ml::parse_model_kind(o.model)};
    spec.inputs = {experiment::parse_input_kind(o.input)};
    if (!o.config.empty()) {
      spec.search = ml::search_space_from_json(read_json_file(o.config));
      spec.tune = true;
    }
  }
  const nn::Blob blob = spec.dcnn ? nn::save_initial_weights(spec.dcnn_config) : nn::Blob{};
  const auto tr = experiment::run_trial(data, spec, 0, derive_seed(o.seed, 0), o.test_fraction, blob);
  for (const auto& m : tr.models) {
    std::printf("%s/%s test %.4f train %.4f hyperparams %s\n", m.model.c_str(), m.input_kind.c_str(),
                m.test_accuracy, m.train_accuracy, m.hyperparams.dump().c_str());
  }
  if (spec.dcnn) {
    fs::create_directories(o.out_dir);
    nn::write_blob(blob, (fs::path(o.out_dir) / "dcnn_initial.emgn").string());
  }
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto spec = models_spec(o);
  const auto data = obtain_dataset(o);
  const auto report = experiment::run_experiment(data, spec, o.trials, o.seed, o.test_fraction);
  experiment::emit_report(report, o.out_dir);
  print_summary(report);
  return 0;
}

int cmd_report(const Options& o) {
  const fs::path p = fs::path(o.out_dir) / "report.json";
  const auto report = experiment::report_from_json(read_json_file(p.string()));
  write_text(fs::path(o.out_dir) / "trials.csv", experiment::trials_csv(report));
  write_text(fs::path(o.out_dir) / "summary.csv", experiment::aggregates_csv(report));
  print_summary(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMG gait-phase detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  app.add_option("--seed", o.seed, "Base seed");
  app.add_option("--trials", o.trials, "Number of trials")->check(CLI::PositiveNumber);
  app.add_option("--test-fraction", o.test_fraction, "Fraction of subjects held out per trial");
  app.add_option("--models", o.models, "Comma list of nb,dt,rf,lda,dcnn (default: all)");
  app.add_option("--inputs", o.inputs, "Comma list of features,pca1,pca2,pca3,pca5 (default: all)");
  app.add_option("--out-dir", o.out_dir, "Output directory");
  app.add_option("--data-dir", o.data_dir, "Dataset directory holding manifest.json");
  app.add_option("--exclude-subjects", o.exclude_subjects, "Comma list of subject ids to drop");
  app.add_flag("--exclude-injured", o.exclude_injured, "Drop subjects with an injury history");
  app.add_flag("--synthetic", o.synthetic, "Generate a synthetic dataset instead of reading one");
  app.add_option("--synth-config", o.synth_config, "Synthetic generator JSON");
  app.add_option("--stance-fraction", o.stance_fraction, "Stance share of the gait cycle");
  app.add_option("--qc-cv-threshold", o.qc_cv_threshold, "Cycle-duration variability limit");
  app.add_option("--band", o.band, "Band-pass edges LOW:HIGH in Hz");
  app.add_option("--order", o.order, "Butterworth order");
  app.add_option("--target-rate", o.target_rate, "Rate after decimation in Hz");
  app.add_flag("--anti-alias", o.anti_alias, "Low-pass before decimation");
  app.add_option("--label-mode", o.label_mode, "Window label: center or majority");
  app.add_option("--zc-mode", o.zc_mode, "Zero-crossing feature: count or literal");
  app.add_option("--config", o.config, "Model/experiment JSON");
  app.add_option("--search-iter", o.search_iter, "Random-search draws per model");
  app.add_option("--max-epochs", o.max_epochs, "DCNN epoch cap");
  app.add_option("--patience", o.patience, "DCNN early-stopping patience");
  app.add_flag("--honest", o.honest, "Select DCNN epoch by validation accuracy");
  app.add_flag("--no-tune", o.no_tune, "Use default classical hyperparameters");
  app.add_flag("--dump-filter", o.dump_filter, "Write the filter design to filter.json");

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  auto* pre = app.add_subcommand("preprocess", "Build the window tensor");
  auto* feat = app.add_subcommand("features", "Compute the feature matrix");
  auto* pca_cmd = app.add_subcommand("pca", "Fit PCA on scaled features");
  auto* train = app.add_subcommand("train", "Fit one model on one subject-wise split");
  train->add_option("--model", o.model, "nb, dt, rf, lda or dcnn");
  train->add_option("--input", o.input, "features or pcaK");
  auto* eval = app.add_subcommand("evaluate", "Run the multi-trial experiment");
  auto* report = app.add_subcommand("report", "Re-render tables from report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (pre->parsed()) return cmd_preprocess(o);
    if (feat->parsed()) return cmd_features(o);
    if (pca_cmd->parsed()) return cmd_pca(o);
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_evaluate(o);
    if (report->parsed()) return cmd_report(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == Errc::io_error ? 1 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
