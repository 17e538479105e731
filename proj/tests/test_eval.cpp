#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "test_helpers.hpp"
#include "tsadv/eval.hpp"
#include "tsadv/report.hpp"

using namespace tsadv;
namespace ts = testing_support;

namespace {

Dataset balanced_dataset(int num_classes, int per_class, int t, std::uint64_t seed) {
  Dataset ds;
  ds.name = "balanced";
  ds.num_classes = num_classes;
  ds.series_length = t;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < num_classes; ++c)
    for (int i = 0; i < per_class; ++i) ds.samples.push_back({ts::random_input(rng, t), c});
  return ds;
}

struct Fixture {
  Dataset train, test;
  Classifier model;

  Fixture() {
    SynthSpec spec;
    spec.series_length = 32;
    spec.samples_per_class = 10;
    spec.noise_sigma = 0.1;
    spec.seed = 123;
    auto [tr, te] = generate_synthetic(spec);
    train = std::move(tr);
    test = std::move(te);

    ClassifierConfig cfg;
    cfg.num_blocks = 1;
    cfg.channels_per_block = {8};
    cfg.num_classes = 3;
    cfg.series_length = 32;
    cfg.init_seed = 3;
    TrainSchedule sched;
    sched.max_epochs = 25;
    sched.batch_size = 16;
    sched.seed = 4;
    model = fit(init_classifier(cfg), train, sched, 2).model;
  }
};

const Fixture& fx() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("accuracy of the constant model on a balanced dataset") {
  Classifier clf(ts::small_config(8, 0, 4));  // predicts class 0 always
  const auto ds = balanced_dataset(4, 5, 8, 1);
  CHECK(accuracy(clf, ds) == 25.0);
  REQUIRE_THROWS_AS(accuracy(clf, Dataset{}), std::invalid_argument);
}

TEST_CASE("accuracy complements error_ratio at zero perturbation") {
  const auto& f = fx();
  const std::vector<double> zero(32, 0.0);
  CHECK(accuracy(f.model, f.test) == 100.0 * (1.0 - error_ratio(f.model, f.test, zero)));
}

TEST_CASE("targeted_success_rate counting and validation") {
  std::vector<AdversarialResult> results;
  for (int i = 0; i < 20; ++i) {
    AdversarialResult r;
    r.target = 1;
    r.success = i < 5;
    results.push_back(r);
  }
  CHECK(targeted_success_rate(results, 3, 10) == 25.0);

  std::vector<AdversarialResult> all_good = results;
  for (auto& r : all_good) r.success = true;
  CHECK(targeted_success_rate(all_good, 3, 10) == 100.0);

  std::vector<AdversarialResult> none = results;
  for (auto& r : none) r.success = false;
  CHECK(targeted_success_rate(none, 3, 10) == 0.0);

  results.pop_back();
  REQUIRE_THROWS_WITH(targeted_success_rate(results, 3, 10), Catch::Matchers::ContainsSubstring("expected"));
}

TEST_CASE("epsilon_sweep structure") {
  const auto& f = fx();

  SECTION("grid of one zero equals the clean accuracy") {
    const auto points = epsilon_sweep(f.model, f.test, {0.0}, SweepMetric::accuracy);
    REQUIRE(points.size() == 1);
    CHECK(points[0].fgsm_value == accuracy(f.model, f.test));
    CHECK(points[0].bim_value == accuracy(f.model, f.test));
  }
  SECTION("one point per eps in grid order") {
    const std::vector<double> grid{0.0, 0.025, 0.05, 0.1};
    const auto points = epsilon_sweep(f.model, f.test, grid, SweepMetric::accuracy, 5, 2);
    REQUIRE(points.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(points[i].eps == grid[i]);
  }
  SECTION("targeted metric at eps 0 equals the trivial baseline") {
    const auto points = epsilon_sweep(f.model, f.test, {0.0}, SweepMetric::targeted_success);
    // baseline: the attack does nothing, success iff the clean prediction
    // already equals the target
    std::size_t hits = 0;
    for (const auto& s : f.test.samples) {
      const int pred = predict(f.model, s.values);
      for (int c = 0; c < 3; ++c)
        if (c != s.label && pred == c) ++hits;
    }
    const double baseline = 100.0 * static_cast<double>(hits) / static_cast<double>(2 * f.test.size());
    CHECK(points[0].fgsm_value == Catch::Approx(baseline));
    CHECK(points[0].bim_value == Catch::Approx(baseline));
  }
  SECTION("invalid grids") {
    REQUIRE_THROWS_AS(epsilon_sweep(f.model, f.test, {}, SweepMetric::accuracy), std::invalid_argument);
    REQUIRE_THROWS_AS(epsilon_sweep(f.model, f.test, {0.1, 0.05}, SweepMetric::accuracy), std::invalid_argument);
  }
}

TEST_CASE("defense_curve rows") {
  const auto& f = fx();
  const std::vector<double> grid{0.0, 0.05};
  const auto rows = defense_curve(f.model, f.model, f.test, grid, 5, 2);
  REQUIRE(rows.size() == grid.size() * 4);
  const double clean = accuracy(f.model, f.test);
  for (const auto& r : rows)
    if (r.eps == 0.0) CHECK(r.accuracy == clean);
  CHECK(rows[0].model == "original");
  CHECK(rows[0].method == "fgsm");
  CHECK(rows[1].method == "bim");
  CHECK(rows[2].model == "defended");
}

TEST_CASE("generalization_curve shape and identity point") {
  const auto& f = fx();
  UniversalConfig ucfg;
  ucfg.eps_max = 0.1;
  ucfg.r_fooling = 0.9;
  ucfg.epoch_fool = 3;
  ucfg.seed = 7;

  const std::vector<double> fractions{0.5, 1.0};
  const auto curve = generalization_curve(f.model, f.train, f.test, fractions, ucfg, 99, 2);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].fraction == 0.5);
  CHECK(curve[1].fraction == 1.0);

  const auto up = compute_universal(f.model, f.train, ucfg, 2);
  CHECK(curve[1].test_success == Catch::Approx(100.0 * error_ratio(f.model, f.test, up.u)));
}

TEST_CASE("emit_report for report rows") {
  ReportRow row;
  row.dataset = "synthetic";
  row.original_accuracy = 93.3;
  row.universal_attack_accuracy = 23.3;
  row.fgsm_attack_accuracy = 21.7;
  row.bim_attack_accuracy = 0.0;
  row.fgsm_targeted_success = 26.1;
  row.bim_targeted_success = 76.1;
  row.advtrained_fgsm_accuracy = 68.3;
  row.advtrained_bim_accuracy = 25.0;

  const auto dir = ts::temp_dir("report");

  SECTION("csv has a header and one line per row, one decimal digit") {
    const auto path = dir / "row.csv";
    emit_report(std::vector<ReportRow>{row}, ReportFormat::csv, path);
    const auto content = ts::read_file(path);
    const auto lines = std::count(content.begin(), content.end(), '\n');
    CHECK(lines == 2);
    CHECK(content.find("93.3") != std::string::npos);
    CHECK(content.find("93.30") == std::string::npos);
    CHECK(content.find("dataset,original_accuracy") == 0);
  }
  SECTION("csv round-trip is byte-identical") {
    const auto path = dir / "rt.csv";
    emit_report(std::vector<ReportRow>{row, row}, ReportFormat::csv, path);
    const auto first = ts::read_file(path);
    const auto parsed = parse_report_rows_csv(path);
    REQUIRE(parsed.size() == 2);
    emit_report(parsed, ReportFormat::csv, path);
    CHECK(ts::read_file(path) == first);
  }
  SECTION("json and markdown emit") {
    emit_report(std::vector<ReportRow>{row}, ReportFormat::json, dir / "row.json");
    emit_report(std::vector<ReportRow>{row}, ReportFormat::markdown, dir / "row.md");
    const auto json = ts::read_file(dir / "row.json");
    CHECK(json.find("\"original_accuracy\": 93.3") != std::string::npos);
    const auto md = ts::read_file(dir / "row.md");
    CHECK(md.find("| synthetic |") != std::string::npos);
  }
  SECTION("empty payload is rejected") {
    REQUIRE_THROWS_AS(emit_report(std::vector<ReportRow>{}, ReportFormat::csv, dir / "x.csv"),
                      std::invalid_argument);
  }
}

TEST_CASE("emit_report for sweeps round-trips") {
  std::vector<SweepPoint> points{{0.0, 95.0, 95.0, SweepMetric::accuracy},
                                 {0.0125, 80.5, 70.2, SweepMetric::accuracy}};
  const auto dir = ts::temp_dir("sweep_report");
  const auto path = dir / "sweep.csv";
  emit_report(points, ReportFormat::csv, path);
  const auto first = ts::read_file(path);
  CHECK(first.find("eps,fgsm_value,bim_value,metric") == 0);
  CHECK(first.find("0.0125") != std::string::npos);
  const auto parsed = parse_sweep_csv(path);
  REQUIRE(parsed.size() == 2);
  emit_report(parsed, ReportFormat::csv, path);
  CHECK(ts::read_file(path) == first);
}

TEST_CASE("table1_row populates every field within range") {
  const auto& f = fx();
  ClassifierConfig model_cfg;
  model_cfg.num_blocks = 1;
  model_cfg.channels_per_block = {8};
  model_cfg.num_classes = 3;
  model_cfg.series_length = 32;
  model_cfg.init_seed = 3;
  TrainSchedule base;
  base.max_epochs = 25;
  base.batch_size = 16;
  base.seed = 4;
  AttackConfig attack;
  attack.eps_max = 0.1;
  attack.steps = 5;
  attack.alpha = 0.05;
  DefenseConfig defense;
  defense.attack.eps_max = 0.1;
  defense.schedule.max_epochs = 5;
  UniversalConfig universal;
  universal.eps_max = 0.1;
  universal.epoch_fool = 3;

  const auto row = table1_row(f.train, f.test, model_cfg, base, attack, defense, universal, &f.model, 2);
  for (double v : {row.original_accuracy, row.universal_attack_accuracy, row.fgsm_attack_accuracy,
                   row.bim_attack_accuracy, row.fgsm_targeted_success, row.bim_targeted_success,
                   row.advtrained_fgsm_accuracy, row.advtrained_bim_accuracy}) {
    CHECK(v >= 0.0);
    CHECK(v <= 100.0);
  }
  CHECK(row.dataset == "synthetic");
}

TEST_CASE("table1_row with zero budgets collapses to the clean accuracy") {
  const auto& f = fx();
  ClassifierConfig model_cfg;
  model_cfg.num_blocks = 1;
  model_cfg.channels_per_block = {8};
  model_cfg.num_classes = 3;
  model_cfg.series_length = 32;
  TrainSchedule base;
  base.max_epochs = 0;
  AttackConfig attack;
  attack.eps_max = 0.0;
  attack.steps = 3;
  attack.alpha = 0.01;
  DefenseConfig defense;
  defense.attack.eps_max = 0.0;
  defense.schedule.max_epochs = 0;  // defended model == original
  UniversalConfig universal;
  universal.eps_max = 1e-9;  // fgsm at this eps fools nothing, so u stays 0
  universal.epoch_fool = 1;

  const auto row = table1_row(f.train, f.test, model_cfg, base, attack, defense, universal, &f.model, 2);
  CHECK(row.fgsm_attack_accuracy == row.original_accuracy);
  CHECK(row.bim_attack_accuracy == row.original_accuracy);
  CHECK(row.universal_attack_accuracy == row.original_accuracy);
  CHECK(row.advtrained_fgsm_accuracy == row.original_accuracy);
  CHECK(row.advtrained_bim_accuracy == row.original_accuracy);
}
