#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "emgait/error.hpp"
#include "emgait/experiment.hpp"

using namespace emgait;
using namespace emgait::experiment;

namespace {

const Dataset& small_dataset() {
  static const Dataset d = [] {
    SyntheticConfig sc;
    sc.n_subjects = 5;
    sc.cycles_per_subject = 6;
    return preprocess(generate_synthetic(sc, 3), PreprocessConfig{});
  }();
  return d;
}

ModelsSpec fast_spec() {
  ModelsSpec s;
  s.classical = {ml::ModelKind::nb, ml::ModelKind::lda};
  s.inputs = {InputKind::features, InputKind::pca2};
  s.dcnn = false;
  s.search.n_iter = 2;
  return s;
}

std::vector<std::string> subjects(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("S" + std::to_string(100 + i));
  return out;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("subject split sizes and determinism") {
  const auto ten = subject_split(subjects(10), 0.1, 4);
  CHECK(ten.test_subjects.size() == 1);
  CHECK(ten.train_subjects.size() == 9);
  const auto big = subject_split(subjects(59), 0.1, 4);
  CHECK(big.test_subjects.size() == 6);
  CHECK(big.train_subjects.size() == 53);
  CHECK(subject_split(subjects(59), 0.1, 4) == big);
  CHECK(std::is_sorted(big.test_subjects.begin(), big.test_subjects.end()));
  std::set<std::string> all(big.train_subjects.begin(), big.train_subjects.end());
  for (const auto& s : big.test_subjects) CHECK(all.insert(s).second);
  CHECK(all.size() == 59);
  std::set<std::vector<std::string>> distinct;
  for (std::uint64_t seed = 0; seed < 20; ++seed) distinct.insert(subject_split(subjects(59), 0.1, seed).test_subjects);
  CHECK(distinct.size() > 15);
  const auto two = subject_split(subjects(2), 0.9, 1);
  CHECK(two.test_subjects.size() == 1);
  CHECK_THROWS_AS(subject_split(subjects(1), 0.1, 1), Error);
}

TEST_CASE("input kinds") {
  CHECK(parse_input_kind("pca3") == InputKind::pca3);
  CHECK(input_kind_name(InputKind::features) == "features");
  CHECK(pca_components(InputKind::pca5) == 5);
  CHECK(pca_components(InputKind::features) == 0);
  CHECK_THROWS_AS(parse_input_kind("pca4"), Error);
  ModelsSpec s;
  set_models(s, "rf,dcnn");
  CHECK(s.classical == std::vector<ml::ModelKind>{ml::ModelKind::rf});
  CHECK(s.dcnn);
  set_models(s, "nb");
  CHECK(!s.dcnn);
  set_inputs(s, "features,pca1");
  CHECK(s.inputs.size() == 2);
  CHECK_THROWS_AS(set_models(s, "svm"), Error);
}

TEST_CASE("preprocessing summary") {
  const auto& d = small_dataset();
  CHECK(d.stats.recordings_in == 10);
  CHECK(d.stats.subjects_kept.size() == 5);
  CHECK(d.windows.size() == d.features.size());
  CHECK(d.stats.windows == d.windows.size());
  CHECK(d.stats.stance_windows + d.stats.swing_windows == d.windows.size());
  CHECK(d.stats.stance_windows > d.stats.swing_windows);
  PreprocessConfig bad;
  bad.target_rate_hz = 700.0;
  CHECK_THROWS_AS(preprocess(generate_synthetic(SyntheticConfig{}, 1), bad), Error);
  const auto back = preprocess_config_from_json(to_json(PreprocessConfig{}));
  CHECK(to_json(back) == to_json(PreprocessConfig{}));
}

TEST_CASE("trial protocol") {
  const auto& d = small_dataset();
  const auto spec = fast_spec();
  const auto t = run_trial(d, spec, 0, 42, 0.2, {});
  CHECK(t.models.size() == 4);
  CHECK(t.split.test_subjects.size() == 1);
  CHECK(t.n_train + t.n_test == d.windows.size());
  std::set<std::string> test(t.split.test_subjects.begin(), t.split.test_subjects.end());
  std::size_t n_test = 0;
  for (const auto& s : d.windows.subject_ids) n_test += test.count(s);
  CHECK(n_test == t.n_test);
  for (const auto& m : t.models) {
    CHECK(m.split_digest == t.split_digest);
    CHECK(m.test_accuracy >= 0.0);
    CHECK(m.test_accuracy <= 1.0);
    CHECK(m.ratio() == doctest::Approx(m.test_accuracy / m.train_accuracy));
    CHECK(m.predict_latency_ms >= 0.0);
  }
  const auto again = run_trial(d, spec, 0, 42, 0.2, {});
  for (std::size_t i = 0; i < t.models.size(); ++i) {
    CHECK(t.models[i].test_accuracy == again.models[i].test_accuracy);
    CHECK(t.models[i].hyperparams == again.models[i].hyperparams);
  }
  CHECK(t.split_digest == again.split_digest);
  const auto other = run_trial(d, spec, 1, 43, 0.2, {});
  CHECK(other.trial_index == 1);
}

TEST_CASE("split digest depends on row order and membership") {
  const std::vector<std::size_t> a{0, 1, 2}, b{3}, c{0, 1, 3}, e{2};
  CHECK(split_digest(a, b) == split_digest(a, b));
  CHECK(split_digest(a, b) != split_digest(c, e));
  CHECK(split_digest(a, b).size() == 16);
}

TEST_CASE("experiment with a short DCNN run, report round trip and CSV") {
  const auto& d = small_dataset();
  auto spec = fast_spec();
  spec.classical = {ml::ModelKind::nb};
  spec.inputs = {InputKind::features};
  spec.dcnn = true;
  spec.dcnn_config.max_epochs = 2;
  spec.dcnn_config.patience = 2;
  const auto r = run_experiment(d, spec, 2, 11, 0.2);
  CHECK(r.trials.size() == 2);
  CHECK(r.trials[0].trial_seed == derive_seed(11, 0));
  CHECK(r.trials[1].trial_seed == derive_seed(11, 1));
  CHECK(r.trials[0].models.size() == 2);
  CHECK(!r.trials[0].dcnn_blob_hash.empty());
  CHECK(r.trials[0].dcnn_blob_hash == r.trials[1].dcnn_blob_hash);
  const auto* nb = r.find("nb", "features");
  REQUIRE(nb != nullptr);
  CHECK(nb->n == 2);
  const double a0 = r.trials[0].models[0].test_accuracy, a1 = r.trials[1].models[0].test_accuracy;
  CHECK(nb->mean_acc == doctest::Approx((a0 + a1) / 2));
  CHECK(nb->std_acc == doctest::Approx(std::abs(a0 - a1) / 2));
  CHECK(nb->min_acc == std::min(a0, a1));
  CHECK(r.find("dcnn", "raw") != nullptr);

  const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(to_json(back) == to_json(r));
  CHECK(deterministic_view(back) == deterministic_view(r));

  const auto again = run_experiment(d, spec, 2, 11, 0.2);
  CHECK(deterministic_view(again) == deterministic_view(r));

  const auto trials = trials_csv(r);
  CHECK(count_lines(trials) == 1 + 2 * 2);
  CHECK(trials.substr(0, trials.find('\n')).find("ratio") != std::string::npos);
  CHECK(count_lines(aggregates_csv(r)) == 1 + 2);

  const auto dir = std::filesystem::temp_directory_path() / "emgait_report_test";
  std::filesystem::remove_all(dir);
  emit_report(r, dir);
  for (const char* f : {"report.json", "trials.csv", "summary.csv"}) CHECK(std::filesystem::exists(dir / f));
  std::ifstream in(dir / "report.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(deterministic_view(report_from_json(nlohmann::json::parse(ss.str()))) == deterministic_view(r));
  std::filesystem::remove_all(dir);
}

TEST_CASE("single trial aggregates") {
  const auto& d = small_dataset();
  const auto r = run_experiment(d, fast_spec(), 1, 5, 0.2);
  for (const auto& a : r.aggregates) {
    CHECK(a.n == 1);
    CHECK(a.std_acc == 0.0);
    CHECK(a.min_acc == a.max_acc);
  }
  CHECK(r.aggregates.size() == 4);
}

TEST_CASE("models spec JSON and validation") {
  auto s = fast_spec();
  s.latency_repeats = 5;
  const auto back = models_spec_from_json(to_json(s));
  CHECK(to_json(back) == to_json(s));
  s.latency_repeats = 2;
  CHECK_THROWS_AS(validate(s), Error);
}
