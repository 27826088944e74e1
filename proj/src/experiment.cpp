#include "emgait/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "emgait/dsp.hpp"
#include "emgait/error.hpp"
#include "emgait/pca.hpp"
#include "emgait/rng.hpp"
#include "emgait/simd/kernels.hpp"

namespace emgait::experiment {

using nlohmann::json;

// ---- preprocessing ----

void validate(const PreprocessConfig& c) {
  if (c.filter_order < 2 || c.filter_order % 2 != 0) {
    throw Error(Errc::invalid_config, "filter order must be a positive even number");
  }
  if (!(c.band_low_hz > 0.0 && c.band_low_hz < c.band_high_hz)) {
    throw Error(Errc::invalid_band, "band edges must satisfy 0 < low < high");
  }
  if (!(c.target_rate_hz > 0.0)) throw Error(Errc::invalid_config, "target rate must be > 0");
  if (c.anti_alias && !(c.anti_alias_hz > 0.0 && c.anti_alias_hz < c.target_rate_hz / 2.0)) {
    throw Error(Errc::invalid_band, "anti-alias cutoff must lie below the target Nyquist frequency");
  }
  if (!(c.stance_fraction > 0.0 && c.stance_fraction < 1.0)) {
    throw Error(Errc::invalid_config, "stance fraction must lie in (0, 1)");
  }
  if (!(c.qc.cv_threshold > 0.0)) throw Error(Errc::invalid_config, "QC threshold must be > 0");
}

json to_json(const PreprocessConfig& c) {
  return {{"filter_order", c.filter_order},
          {"band_low_hz", c.band_low_hz},
          {"band_high_hz", c.band_high_hz},
          {"target_rate_hz", c.target_rate_hz},
          {"anti_alias", c.anti_alias},
          {"anti_alias_hz", c.anti_alias_hz},
          {"stance_fraction", c.stance_fraction},
          {"qc_cv_threshold", c.qc.cv_threshold},
          {"qc_check_first_pair", c.qc.check_first_pair},
          {"label_mode", c.label_mode == features::WindowLabelMode::center ? "center" : "majority"},
          {"zc_mode", c.zc_mode == features::ZcMode::count ? "count" : "literal"}};
}

PreprocessConfig preprocess_config_from_json(const json& j) {
  PreprocessConfig c;
  try {
    c.filter_order = j.value("filter_order", c.filter_order);
    c.band_low_hz = j.value("band_low_hz", c.band_low_hz);
    c.band_high_hz = j.value("band_high_hz", c.band_high_hz);
    c.target_rate_hz = j.value("target_rate_hz", c.target_rate_hz);
    c.anti_alias = j.value("anti_alias", c.anti_alias);
    c.anti_alias_hz = j.value("anti_alias_hz", c.anti_alias_hz);
    c.stance_fraction = j.value("stance_fraction", c.stance_fraction);
    c.qc.cv_threshold = j.value("qc_cv_threshold", c.qc.cv_threshold);
    c.qc.check_first_pair = j.value("qc_check_first_pair", c.qc.check_first_pair);
    const std::string lm = j.value("label_mode", std::string("center"));
    if (lm != "center" && lm != "majority") throw Error(Errc::invalid_config, "label_mode must be center or majority");
    c.label_mode = lm == "center" ? features::WindowLabelMode::center : features::WindowLabelMode::majority;
    const std::string zm = j.value("zc_mode", std::string("count"));
    if (zm != "count" && zm != "literal") throw Error(Errc::invalid_config, "zc_mode must be count or literal");
    c.zc_mode = zm == "count" ? features::ZcMode::count : features::ZcMode::literal;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string("preprocess config: ") + e.what());
  }
  validate(c);
  return c;
}

json to_json(const PreprocessStats& s) {
  return {{"recordings_in", s.recordings_in},     {"recordings_kept", s.recordings_kept},
          {"subjects_kept", s.subjects_kept},     {"subjects_rejected", s.subjects_rejected},
          {"cycles_kept", s.cycles_kept},         {"windows", s.windows},
          {"stance_windows", s.stance_windows},   {"swing_windows", s.swing_windows}};
}

namespace {

int decimation_factor(double fs, double target) {
  const double ratio = fs / target;
  const double r = std::round(ratio);
  if (r < 1.0 || std::fabs(ratio - r) > 1e-9 * ratio) {
    throw Error(Errc::invalid_factor, "sample rate is not an integer multiple of the target rate");
  }
  return static_cast<int>(r);
}

void count_classes(const features::WindowTensor& w, PreprocessStats& s) {
  s.windows = w.size();
  s.stance_windows = static_cast<std::size_t>(
      std::count(w.labels.begin(), w.labels.end(), labeling::PhaseLabel::stance));
  s.swing_windows = s.windows - s.stance_windows;
}

}  // namespace

Dataset preprocess(const std::vector<Recording>& recordings, const PreprocessConfig& cfg) {
  validate(cfg);
  Dataset out;
  out.stats.recordings_in = recordings.size();

  std::vector<std::vector<labeling::GaitCycle>> kept(recordings.size());
  std::set<std::string> rejected, seen;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    const Recording& rec = recordings[i];
    seen.insert(rec.subject_id);
    try {
      const auto cycles = labeling::detect_cycles(rec.heel_strikes_s);
      const auto qc = labeling::qc_filter(cycles, cfg.qc);
      if (qc.subject_rejected || qc.kept.empty()) {
        rejected.insert(rec.subject_id);
      } else {
        kept[i] = qc.kept;
      }
    } catch (const Error& e) {
      if (e.code() != Errc::too_few_events) throw;
      rejected.insert(rec.subject_id);
    }
  }

  std::map<double, std::pair<dsp::BiquadCascade, std::optional<dsp::BiquadCascade>>> filters;
  std::set<std::string> kept_subjects;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    const Recording& rec = recordings[i];
    if (rejected.contains(rec.subject_id)) continue;
    const double fs = rec.sample_rate_hz;
    const int factor = decimation_factor(fs, cfg.target_rate_hz);
    auto it = filters.find(fs);
    if (it == filters.end()) {
      auto band = dsp::design_butterworth_bandpass(cfg.filter_order, cfg.band_low_hz, cfg.band_high_hz, fs);
      std::optional<dsp::BiquadCascade> aa;
      if (cfg.anti_alias) aa = dsp::design_butterworth_lowpass(cfg.filter_order, cfg.anti_alias_hz, fs);
      it = filters.emplace(fs, std::make_pair(std::move(band), std::move(aa))).first;
    }
    std::array<std::vector<double>, kNumChannels> sig;
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      auto y = dsp::filtfilt(it->second.first, rec.channels[c]);
      if (it->second.second) y = dsp::filtfilt(*it->second.second, y);
      sig[c] = dsp::standardize(dsp::decimate(y, factor)).samples;
    }
    const auto labels = labeling::label_samples(rec, kept[i], cfg.stance_fraction, cfg.target_rate_hz);
    auto windows = features::make_windows(sig, labels, rec.subject_id, features::kWindowLen, features::kStride,
                                          cfg.label_mode);
    windows.group_thresholds[0] = features::compute_thresholds(sig, labels.valid_mask);
    out.windows.append(windows);
    out.stats.recordings_kept += 1;
    out.stats.cycles_kept += kept[i].size();
    kept_subjects.insert(rec.subject_id);
  }
  out.stats.subjects_kept.assign(kept_subjects.begin(), kept_subjects.end());
  out.stats.subjects_rejected.assign(rejected.begin(), rejected.end());
  count_classes(out.windows, out.stats);
  out.features = features::extract_features(out.windows, cfg.zc_mode);
  return out;
}

Dataset dataset_from_windows(features::WindowTensor windows, features::ZcMode mode) {
  Dataset out;
  out.windows = std::move(windows);
  std::set<std::string> subjects(out.windows.subject_ids.begin(), out.windows.subject_ids.end());
  out.stats.subjects_kept.assign(subjects.begin(), subjects.end());
  out.stats.recordings_in = out.stats.recordings_kept = out.windows.group_thresholds.size();
  count_classes(out.windows, out.stats);
  out.features = features::extract_features(out.windows, mode);
  return out;
}

// ---- split ----

SubjectSplit subject_split(const std::vector<std::string>& subjects, double test_fraction, std::uint64_t seed) {
  std::set<std::string> unique(subjects.begin(), subjects.end());
  if (unique.size() < 2) throw Error(Errc::too_few_subjects, "a subject-wise split needs at least 2 subjects");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(Errc::invalid_config, "test fraction must lie in (0, 1)");
  }
  std::vector<std::string> order(unique.begin(), unique.end());
  Rng rng(derive_seed(seed, stream::split));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = order.size();
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  SubjectSplit s;
  s.seed = seed;
  s.test_subjects.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train_subjects.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(s.test_subjects.begin(), s.test_subjects.end());
  std::sort(s.train_subjects.begin(), s.train_subjects.end());
  return s;
}

std::string input_kind_name(InputKind k) {
  switch (k) {
    case InputKind::features: return "features";
    case InputKind::pca1: return "pca1";
    case InputKind::pca2: return "pca2";
    case InputKind::pca3: return "pca3";
    case InputKind::pca5: return "pca5";
    case InputKind::raw: return "raw";
  }
  return "?";
}

InputKind parse_input_kind(const std::string& s) {
  for (auto k : {InputKind::features, InputKind::pca1, InputKind::pca2, InputKind::pca3, InputKind::pca5,
                 InputKind::raw}) {
    if (input_kind_name(k) == s) return k;
  }
  throw Error(Errc::invalid_config, "unknown input kind '" + s + "'");
}

std::size_t pca_components(InputKind k) noexcept {
  switch (k) {
    case InputKind::pca1: return 1;
    case InputKind::pca2: return 2;
    case InputKind::pca3: return 3;
    case InputKind::pca5: return 5;
    default: return 0;
  }
}

// ---- models spec ----

void validate(const ModelsSpec& s) {
  if (s.classical.empty() && !s.dcnn) throw Error(Errc::invalid_config, "no models requested");
  if (!s.classical.empty() && s.inputs.empty()) throw Error(Errc::invalid_config, "no classical inputs requested");
  for (auto k : s.inputs) {
    if (k == InputKind::raw) throw Error(Errc::invalid_config, "classical models take features or pcaK inputs");
  }
  if (s.latency_repeats < 3) throw Error(Errc::invalid_config, "latency_repeats must be >= 3");
  if (s.dcnn) nn::validate(s.dcnn_config);
}

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void set_models(ModelsSpec& spec, const std::string& csv) {
  spec.classical.clear();
  spec.dcnn = false;
  for (const auto& m : split_csv(csv)) {
    if (m == "dcnn") {
      spec.dcnn = true;
    } else {
      spec.classical.push_back(ml::parse_model_kind(m));
    }
  }
  if (spec.classical.empty() && !spec.dcnn) throw Error(Errc::invalid_config, "empty model list");
}

void set_inputs(ModelsSpec& spec, const std::string& csv) {
  spec.inputs.clear();
  for (const auto& m : split_csv(csv)) spec.inputs.push_back(parse_input_kind(m));
}

json to_json(const ModelsSpec& s) {
  json models = json::array();
  for (auto k : s.classical) models.push_back(ml::model_kind_name(k));
  if (s.dcnn) models.push_back("dcnn");
  json inputs = json::array();
  for (auto k : s.inputs) inputs.push_back(input_kind_name(k));
  return {{"models", models},
          {"inputs", inputs},
          {"tune", s.tune},
          {"search", ml::search_space_to_json(s.search)},
          {"dcnn", nn::to_json(s.dcnn_config)},
          {"latency_repeats", s.latency_repeats}};
}

ModelsSpec models_spec_from_json(const json& j) {
  ModelsSpec s;
  try {
    if (j.contains("models")) {
      std::string csv;
      for (const auto& m : j["models"]) csv += m.get<std::string>() + ",";
      set_models(s, csv);
    }
    if (j.contains("inputs")) {
      std::string csv;
      for (const auto& m : j["inputs"]) csv += m.get<std::string>() + ",";
      set_inputs(s, csv);
    }
    s.tune = j.value("tune", s.tune);
    if (j.contains("search")) s.search = ml::search_space_from_json(j["search"]);
    if (j.contains("dcnn")) s.dcnn_config = nn::config_from_json(j["dcnn"]);
    s.latency_repeats = j.value("latency_repeats", s.latency_repeats);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string("models spec: ") + e.what());
  }
  validate(s);
  return s;
}

// ---- trial ----

std::string split_digest(const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
  std::vector<std::uint64_t> buf;
  buf.reserve(train_rows.size() + test_rows.size() + 2);
  buf.push_back(train_rows.size());
  buf.insert(buf.end(), train_rows.begin(), train_rows.end());
  buf.push_back(test_rows.size());
  buf.insert(buf.end(), test_rows.begin(), test_rows.end());
  return hex_digest(fnv1a64(buf.data(), buf.size() * sizeof(std::uint64_t)));
}

namespace {

ml::Labels to_labels(const std::vector<labeling::PhaseLabel>& labels, const std::vector<std::size_t>& rows) {
  ml::Labels y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(static_cast<int>(labels[r]));
  return y;
}

std::vector<std::size_t> rows_of(const std::vector<std::string>& subject_ids, const std::set<std::string>& subjects) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    if (subjects.contains(subject_ids[i])) rows.push_back(i);
  }
  return rows;
}

ml::Hyperparams default_hyperparams(ml::ModelKind k) {
  switch (k) {
    case ml::ModelKind::nb: return ml::GnbParams{};
    case ml::ModelKind::dt: return ml::DtParams{};
    case ml::ModelKind::rf: return ml::RfParams{};
    case ml::ModelKind::lda: return ml::LdaParams{};
  }
  return ml::GnbParams{};
}

}  // namespace

TrialResult run_trial(const Dataset& data, const ModelsSpec& spec, int trial_index, std::uint64_t trial_seed,
                      double test_fraction, const nn::Blob& initial_weights) {
  validate(spec);
  const auto& ids = data.windows.subject_ids;
  std::vector<std::string> subjects(ids.begin(), ids.end());
  TrialResult tr;
  tr.trial_index = trial_index;
  tr.trial_seed = trial_seed;
  tr.split = subject_split(subjects, test_fraction, trial_seed);
  const std::set<std::string> train_set(tr.split.train_subjects.begin(), tr.split.train_subjects.end());
  const std::set<std::string> test_set(tr.split.test_subjects.begin(), tr.split.test_subjects.end());
  const auto train_rows = rows_of(ids, train_set);
  const auto test_rows = rows_of(ids, test_set);
  if (train_rows.empty() || test_rows.empty()) throw Error(Errc::empty_split, "split produced an empty side");
  tr.n_train = train_rows.size();
  tr.n_test = test_rows.size();
  tr.split_digest = split_digest(train_rows, test_rows);

  const ml::Labels y_tr = to_labels(data.windows.labels, train_rows);
  const ml::Labels y_te = to_labels(data.windows.labels, test_rows);

  if (!spec.classical.empty()) {
    const Matrix X_tr_raw = data.features.X.select_rows(train_rows);
    const Matrix X_te_raw = data.features.X.select_rows(test_rows);
    const auto scaler = features::fit_scaler(X_tr_raw);
    const Matrix X_tr_f = features::apply_scaler(scaler, X_tr_raw);
    const Matrix X_te_f = features::apply_scaler(scaler, X_te_raw);
    std::size_t k_max = 0;
    for (auto k : spec.inputs) k_max = std::max(k_max, pca_components(k));
    pca::PcaModel pca_model;
    if (k_max > 0) pca_model = pca::fit_pca(X_tr_f, std::min(k_max, X_tr_f.cols()));
    std::vector<std::string> subj_tr;
    for (std::size_t r : train_rows) subj_tr.push_back(ids[r]);

    for (std::size_t ii = 0; ii < spec.inputs.size(); ++ii) {
      const InputKind input = spec.inputs[ii];
      const std::size_t k = pca_components(input);
      const Matrix X_tr = k ? pca::transform(pca_model, X_tr_f, k) : X_tr_f;
      const Matrix X_te = k ? pca::transform(pca_model, X_te_f, k) : X_te_f;
      for (std::size_t mi = 0; mi < spec.classical.size(); ++mi) {
        const ml::ModelKind kind = spec.classical[mi];
        ModelResult mr;
        mr.model = ml::model_kind_name(kind);
        mr.input_kind = input_kind_name(input);
        const std::uint64_t cell_seed = derive_seed(trial_seed, 100 + ii * 16 + mi);
        ml::Hyperparams h = default_hyperparams(kind);
        if (spec.tune) {
          const auto sr = ml::random_search(kind, spec.search, X_tr, y_tr, subj_tr, cell_seed, labeling::kNumPhases);
          h = sr.best;
          mr.search_score = sr.best_score;
        }
        const ml::Model model = ml::train(h, X_tr, y_tr, derive_seed(cell_seed, stream::fit), labeling::kNumPhases);
        mr.hyperparams = ml::hyperparams_to_json(h);
        mr.train_accuracy = ml::accuracy(ml::predict(model, X_tr), y_tr);
        mr.test_accuracy = ml::accuracy(ml::predict(model, X_te), y_te);
        const auto lat = ml::measure_predict_latency(model, X_te, spec.latency_repeats);
        mr.predict_latency_ms = lat.mean_ms;
        mr.latency_per_window_ms = lat.mean_ms / static_cast<double>(X_te.rows());
        mr.split_digest = split_digest(train_rows, test_rows);
        tr.models.push_back(std::move(mr));
      }
    }
  }

  if (spec.dcnn) {
    tr.dcnn_blob_hash = nn::blob_hash(initial_weights);
    nn::DcnnModel init = nn::restore(initial_weights);
    const nn::DcnnConfig& run_cfg = spec.dcnn_config;
    if (nn::layout_for(run_cfg).total != init.layout.total) {
      throw Error(Errc::shape_mismatch, "initial weights do not match the DCNN architecture");
    }
    init.config = run_cfg;
    init.layout = nn::layout_for(run_cfg);

    // Validation subjects come out of the training side only.
    const SubjectSplit inner = subject_split(tr.split.train_subjects, run_cfg.val_fraction,
                                             derive_seed(trial_seed, stream::val_split));
    const std::set<std::string> fit_set(inner.train_subjects.begin(), inner.train_subjects.end());
    const std::set<std::string> val_set(inner.test_subjects.begin(), inner.test_subjects.end());
    const auto fit_rows = rows_of(ids, fit_set);
    const auto val_rows = rows_of(ids, val_set);
    const auto w_fit = data.windows.select(fit_rows);
    const auto w_val = data.windows.select(val_rows);
    const auto w_test = data.windows.select(test_rows);
    const auto trained = nn::train_dcnn(init, w_fit, w_val, w_test, derive_seed(trial_seed, stream::dcnn));

    std::vector<std::size_t> seen_train(fit_rows);
    seen_train.insert(seen_train.end(), val_rows.begin(), val_rows.end());
    std::sort(seen_train.begin(), seen_train.end());

    ModelResult mr;
    mr.model = "dcnn";
    mr.input_kind = input_kind_name(InputKind::raw);
    mr.hyperparams = nn::to_json(run_cfg);
    mr.test_accuracy = nn::evaluate_dcnn(trained.model, w_test).accuracy;
    mr.train_accuracy = nn::evaluate_dcnn(trained.model, data.windows.select(seen_train)).accuracy;
    const auto lat = ml::measure_latency([&] { (void)nn::predict_dcnn(trained.model, w_test); }, spec.latency_repeats);
    mr.predict_latency_ms = lat.mean_ms;
    mr.latency_per_window_ms = lat.mean_ms / static_cast<double>(w_test.size());
    mr.split_digest = split_digest(seen_train, test_rows);
    const auto& h = trained.history;
    mr.training = {{"best_epoch", h.best_epoch},
                   {"best_val_epoch", h.best_val_epoch},
                   {"stopped_epoch", h.stopped_epoch},
                   {"epochs_run", h.epochs.size()},
                   {"selection", h.selection == nn::Selection::test_accuracy ? "test_accuracy" : "val_accuracy"},
                   {"val_subjects", inner.test_subjects},
                   {"final_val_loss", h.epochs.empty() ? 0.0 : h.epochs.back().val_loss}};
    tr.models.push_back(std::move(mr));
  }
  return tr;
}

// ---- aggregation ----

const Aggregate* ExperimentReport::find(const std::string& model, const std::string& input_kind) const {
  for (const auto& a : aggregates) {
    if (a.model == model && a.input_kind == input_kind) return &a;
  }
  return nullptr;
}

std::vector<Aggregate> aggregate(const std::vector<TrialResult>& trials) {
  std::vector<Aggregate> out;
  std::vector<std::vector<const ModelResult*>> members;
  for (const auto& t : trials) {
    for (const auto& m : t.models) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const Aggregate& a) { return a.model == m.model && a.input_kind == m.input_kind; });
      if (it == out.end()) {
        out.push_back({m.model, m.input_kind});
        members.emplace_back();
        it = out.end() - 1;
      }
      members[static_cast<std::size_t>(it - out.begin())].push_back(&m);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    Aggregate& a = out[i];
    const auto& ms = members[i];
    const double n = static_cast<double>(ms.size());
    a.n = static_cast<int>(ms.size());
    a.min_acc = 1.0;
    a.max_acc = 0.0;
    for (const auto* m : ms) {
      a.mean_acc += m->test_accuracy;
      a.mean_train_acc += m->train_accuracy;
      a.mean_ratio += m->ratio();
      a.mean_latency_ms += m->predict_latency_ms;
      a.mean_latency_per_window_ms += m->latency_per_window_ms;
      a.min_acc = std::min(a.min_acc, m->test_accuracy);
      a.max_acc = std::max(a.max_acc, m->test_accuracy);
    }
    a.mean_acc /= n;
    a.mean_train_acc /= n;
    a.mean_ratio /= n;
    a.mean_latency_ms /= n;
    a.mean_latency_per_window_ms /= n;
    double ss = 0.0;
    for (const auto* m : ms) ss += (m->test_accuracy - a.mean_acc) * (m->test_accuracy - a.mean_acc);
    a.std_acc = std::sqrt(ss / n);
  }
  return out;
}

json environment_metadata() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
#if defined(__clang__)
  const std::string compiler = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  const std::string compiler = std::string("gcc ") + __VERSION__;
#else
  const std::string compiler = "unknown";
#endif
  return {{"compiler", compiler},
          {"simd_backend", std::string(simd::backend_name(simd::active_backend()))},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"generated_utc", stamp}};
}

ExperimentReport run_experiment(const Dataset& data, const ModelsSpec& spec, int n_trials, std::uint64_t base_seed,
                                double test_fraction) {
  if (n_trials < 1) throw Error(Errc::invalid_config, "n_trials must be >= 1");
  validate(spec);
  ExperimentReport r;
  r.n_trials = n_trials;
  r.base_seed = base_seed;
  r.test_fraction = test_fraction;
  r.config = to_json(spec);
  r.preprocessing = to_json(data.stats);
  r.environment = environment_metadata();
  nn::Blob blob;
  if (spec.dcnn) blob = nn::save_initial_weights(spec.dcnn_config);
  for (int t = 0; t < n_trials; ++t) {
    r.trials.push_back(
        run_trial(data, spec, t, derive_seed(base_seed, static_cast<std::uint64_t>(t)), test_fraction, blob));
  }
  r.aggregates = aggregate(r.trials);
  return r;
}

// ---- serialization ----

namespace {

json model_result_json(const ModelResult& m) {
  return {{"model", m.model},
          {"input_kind", m.input_kind},
          {"test_accuracy", m.test_accuracy},
          {"train_accuracy", m.train_accuracy},
          {"ratio", m.ratio()},
          {"predict_latency_ms", m.predict_latency_ms},
          {"latency_per_window_ms", m.latency_per_window_ms},
          {"hyperparams", m.hyperparams},
          {"search_score", m.search_score},
          {"split_digest", m.split_digest},
          {"training", m.training}};
}

json aggregate_json(const Aggregate& a) {
  return {{"model", a.model},
          {"input_kind", a.input_kind},
          {"n", a.n},
          {"mean_acc", a.mean_acc},
          {"std_acc", a.std_acc},
          {"min_acc", a.min_acc},
          {"max_acc", a.max_acc},
          {"mean_train_acc", a.mean_train_acc},
          {"mean_ratio", a.mean_ratio},
          {"mean_latency_ms", a.mean_latency_ms},
          {"mean_latency_per_window_ms", a.mean_latency_per_window_ms}};
}

}  // namespace

json to_json(const ExperimentReport& r) {
  json trials = json::array();
  for (const auto& t : r.trials) {
    json models = json::array();
    for (const auto& m : t.models) models.push_back(model_result_json(m));
    trials.push_back({{"trial_index", t.trial_index},
                      {"trial_seed", t.trial_seed},
                      {"train_subjects", t.split.train_subjects},
                      {"test_subjects", t.split.test_subjects},
                      {"split_seed", t.split.seed},
                      {"n_train", t.n_train},
                      {"n_test", t.n_test},
                      {"split_digest", t.split_digest},
                      {"dcnn_blob_hash", t.dcnn_blob_hash},
                      {"models", models}});
  }
  json aggs = json::array();
  for (const auto& a : r.aggregates) aggs.push_back(aggregate_json(a));
  return {{"schema_version", r.schema_version},
          {"n_trials", r.n_trials},
          {"base_seed", r.base_seed},
          {"test_fraction", r.test_fraction},
          {"config", r.config},
          {"preprocessing", r.preprocessing},
          {"environment", r.environment},
          {"trials", trials},
          {"aggregates", aggs}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != 1) throw Error(Errc::malformed_file, "unsupported report schema_version");
    r.n_trials = j.at("n_trials").get<int>();
    r.base_seed = j.at("base_seed").get<std::uint64_t>();
    r.test_fraction = j.at("test_fraction").get<double>();
    r.config = j.at("config");
    r.preprocessing = j.at("preprocessing");
    r.environment = j.at("environment");
    for (const auto& tj : j.at("trials")) {
      TrialResult t;
      t.trial_index = tj.at("trial_index").get<int>();
      t.trial_seed = tj.at("trial_seed").get<std::uint64_t>();
      t.split.train_subjects = tj.at("train_subjects").get<std::vector<std::string>>();
      t.split.test_subjects = tj.at("test_subjects").get<std::vector<std::string>>();
      t.split.seed = tj.at("split_seed").get<std::uint64_t>();
      t.n_train = tj.at("n_train").get<std::size_t>();
      t.n_test = tj.at("n_test").get<std::size_t>();
      t.split_digest = tj.at("split_digest").get<std::string>();
      t.dcnn_blob_hash = tj.at("dcnn_blob_hash").get<std::string>();
      for (const auto& mj : tj.at("models")) {
        ModelResult m;
        m.model = mj.at("model").get<std::string>();
        m.input_kind = mj.at("input_kind").get<std::string>();
        m.test_accuracy = mj.at("test_accuracy").get<double>();
        m.train_accuracy = mj.at("train_accuracy").get<double>();
        m.predict_latency_ms = mj.at("predict_latency_ms").get<double>();
        m.latency_per_window_ms = mj.at("latency_per_window_ms").get<double>();
        m.hyperparams = mj.at("hyperparams");
        m.search_score = mj.at("search_score").get<double>();
        m.split_digest = mj.at("split_digest").get<std::string>();
        m.training = mj.at("training");
        t.models.push_back(std::move(m));
      }
      r.trials.push_back(std::move(t));
    }
    for (const auto& aj : j.at("aggregates")) {
      Aggregate a;
      a.model = aj.at("model").get<std::string>();
      a.input_kind = aj.at("input_kind").get<std::string>();
      a.n = aj.at("n").get<int>();
      a.mean_acc = aj.at("mean_acc").get<double>();
      a.std_acc = aj.at("std_acc").get<double>();
      a.min_acc = aj.at("min_acc").get<double>();
      a.max_acc = aj.at("max_acc").get<double>();
      a.mean_train_acc = aj.at("mean_train_acc").get<double>();
      a.mean_ratio = aj.at("mean_ratio").get<double>();
      a.mean_latency_ms = aj.at("mean_latency_ms").get<double>();
      a.mean_latency_per_window_ms = aj.at("mean_latency_per_window_ms").get<double>();
      r.aggregates.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_file, std::string("report JSON: ") + e.what());
  }
  return r;
}

json deterministic_view(const ExperimentReport& r) {
  json j = to_json(r);
  j.erase("environment");
  for (auto& t : j["trials"]) {
    for (auto& m : t["models"]) {
      m.erase("predict_latency_ms");
      m.erase("latency_per_window_ms");
    }
  }
  for (auto& a : j["aggregates"]) {
    a.erase("mean_latency_ms");
    a.erase("mean_latency_per_window_ms");
  }
  return j;
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string trials_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "trial,model,input_kind,test_acc,train_acc,ratio,predict_latency_ms,latency_per_window_ms,n_train,n_test,"
        "test_subjects\n";
  for (const auto& t : r.trials) {
    std::string subjects;
    for (const auto& s : t.split.test_subjects) subjects += (subjects.empty() ? "" : ";") + s;
    for (const auto& m : t.models) {
      os << t.trial_index << ',' << m.model << ',' << m.input_kind << ',' << num(m.test_accuracy) << ','
         << num(m.train_accuracy) << ',' << num(m.ratio()) << ',' << num(m.predict_latency_ms) << ','
         << num(m.latency_per_window_ms) << ',' << t.n_train << ',' << t.n_test << ',' << subjects << '\n';
    }
  }
  return os.str();
}

std::string aggregates_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "model,input_kind,n,mean_acc,std_acc,min_acc,max_acc,mean_train_acc,mean_ratio,mean_latency_ms,"
        "mean_latency_per_window_ms\n";
  for (const auto& a : r.aggregates) {
    os << a.model << ',' << a.input_kind << ',' << a.n << ',' << num(a.mean_acc) << ',' << num(a.std_acc) << ','
       << num(a.min_acc) << ',' << num(a.max_acc) << ',' << num(a.mean_train_acc) << ',' << num(a.mean_ratio) << ','
       << num(a.mean_latency_ms) << ',' << num(a.mean_latency_per_window_ms) << '\n';
  }
  return os.str();
}

void emit_report(const ExperimentReport& r, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p);
    if (!f) throw Error(Errc::io_error, "cannot open " + p.string() + " for writing");
    f << text;
    if (!f) throw Error(Errc::io_error, "write failed: " + p.string());
  };
  write(out_dir / "report.json", to_json(r).dump(2) + "\n");
  write(out_dir / "trials.csv", trials_csv(r));
  write(out_dir / "summary.csv", aggregates_csv(r));
}

}  // namespace emgait::experiment
