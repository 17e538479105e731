#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "test_helpers.hpp"
#include "tsadv/checkpoint.hpp"
#include "tsadv/train.hpp"

using namespace tsadv;
namespace ts = testing_support;

namespace {

Dataset tiny_task(int per_class = 20, int t = 32, std::uint64_t seed = 42) {
  SynthSpec spec;
  spec.series_length = t;
  spec.samples_per_class = per_class;
  spec.noise_sigma = 0.1;
  spec.seed = seed;
  return generate_synthetic(spec).first;
}

// All samples labeled 0 plus a huge class-0 bias: every probability is
// one-hot, gradients vanish, and the epoch loss is exactly 0 forever.
std::pair<Classifier, Dataset> stagnant_fixture() {
  Dataset ds;
  ds.name = "stagnant";
  ds.num_classes = 2;
  ds.series_length = 6;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 8; ++i) ds.samples.push_back({ts::random_input(rng, 6), 0});
  auto clf = ts::linear_model(6, 2, {0.0, 0.0}, {1000.0, 0.0});
  return {std::move(clf), std::move(ds)};
}

}  // namespace

TEST_CASE("fit with zero epochs returns the classifier unchanged") {
  const auto train_set = tiny_task(4, 16);
  const auto clf = init_classifier(ts::small_config(16, 1));
  TrainSchedule sched;
  sched.max_epochs = 0;
  const auto result = fit(clf, train_set, sched);
  CHECK(result.history.empty());
  CHECK(result.model.parameters() == clf.parameters());
}

TEST_CASE("plateau rule halves the learning rate exactly once on a stagnant loss") {
  auto [clf, ds] = stagnant_fixture();
  TrainSchedule sched;
  sched.max_epochs = 5;  // patience + 2
  sched.batch_size = 4;
  sched.initial_lr = 0.4;
  sched.min_lr = 0.01;
  sched.plateau_patience = 3;
  sched.lr_factor = 0.5;
  const auto result = fit(clf, ds, sched);
  REQUIRE(result.history.size() == 5);
  CHECK(result.history[0].lr == 0.4);
  CHECK(result.history[3].lr == 0.4);  // reduction decided at the end of this epoch
  CHECK(result.history[4].lr == 0.2);
  for (const auto& e : result.history) CHECK(e.mean_loss == 0.0);
}

TEST_CASE("learning rate never drops below min_lr") {
  auto [clf, ds] = stagnant_fixture();
  TrainSchedule sched;
  sched.max_epochs = 12;
  sched.batch_size = 8;
  sched.initial_lr = 0.4;
  sched.min_lr = 0.15;
  sched.plateau_patience = 2;
  const auto result = fit(clf, ds, sched);
  double prev = sched.initial_lr;
  for (const auto& e : result.history) {
    CHECK(e.lr <= prev);  // non-increasing
    CHECK(e.lr >= sched.min_lr);
    prev = e.lr;
  }
  CHECK(result.history.back().lr == 0.15);
}

TEST_CASE("fit is bit-reproducible") {
  const auto train_set = tiny_task(6, 16);
  const auto clf = init_classifier(ts::small_config(16, 1, 3, 7));
  TrainSchedule sched;
  sched.max_epochs = 3;
  sched.batch_size = 5;
  sched.seed = 99;
  const auto a = fit(clf, train_set, sched);
  const auto b = fit(clf, train_set, sched);
  REQUIRE(a.model.parameters() == b.model.parameters());
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].mean_loss == b.history[i].mean_loss);
}

TEST_CASE("fit result is identical across thread counts") {
  const auto train_set = tiny_task(5, 16);
  const auto clf = init_classifier(ts::small_config(16, 1, 3, 7));
  TrainSchedule sched;
  sched.max_epochs = 2;
  sched.batch_size = 4;
  const auto a = fit(clf, train_set, sched, 1);
  const auto b = fit(clf, train_set, sched, 3);
  REQUIRE(a.model.parameters() == b.model.parameters());
}

TEST_CASE("fit learns the small synthetic task") {
  const auto train_set = tiny_task(20, 32);
  ClassifierConfig cfg;
  cfg.num_blocks = 1;
  cfg.channels_per_block = {8};
  cfg.kernel_sizes = {8, 5, 3};
  cfg.num_classes = 3;
  cfg.series_length = 32;
  cfg.init_seed = 1;
  TrainSchedule sched;
  sched.max_epochs = 30;
  sched.batch_size = 16;
  sched.seed = 2;
  const auto result = fit(init_classifier(cfg), train_set, sched, 2);
  CHECK(result.history.back().mean_loss < result.history.front().mean_loss);

  std::size_t correct = 0;
  for (const auto& s : train_set.samples) correct += predict(result.model, s.values) == s.label ? 1 : 0;
  CHECK(static_cast<double>(correct) / static_cast<double>(train_set.size()) >= 0.8);
}

TEST_CASE("fit reports divergence with the epoch") {
  const auto train_set = tiny_task(4, 16);
  const auto clf = init_classifier(ts::small_config(16, 1));
  TrainSchedule sched;
  sched.max_epochs = 50;
  sched.optimizer = Optimizer::sgd;
  sched.initial_lr = 1e150;
  sched.min_lr = 1e150;
  REQUIRE_THROWS_WITH(fit(clf, train_set, sched), Catch::Matchers::ContainsSubstring("epoch"));
}

TEST_CASE("checkpoint round-trip is lossless") {
  std::mt19937_64 rng(51);
  const auto cfg = ts::small_config(12, 2, 3, 4);
  const auto clf = ts::random_model(rng, cfg);
  const auto dir = ts::temp_dir("ckpt");
  const auto path = dir / "model.json";
  save_checkpoint(clf, path);
  const auto loaded = load_checkpoint(path);

  REQUIRE(loaded.parameters() == clf.parameters());  // bit-exact
  const auto x = ts::random_input(rng, 12);
  const auto a = forward(clf, x);
  const auto b = forward(loaded, x);
  REQUIRE(a == b);  // 0 ULP
}

TEST_CASE("checkpoint error paths") {
  std::mt19937_64 rng(53);
  const auto clf = ts::random_model(rng, ts::small_config(10, 1, 3, 8));
  const auto dir = ts::temp_dir("ckpt_err");
  const auto path = dir / "model.json";
  save_checkpoint(clf, path);

  SECTION("truncated file") {
    auto content = ts::read_file(path);
    ts::write_file(dir / "trunc.json", content.substr(0, content.size() / 2));
    REQUIRE_THROWS_WITH(load_checkpoint(dir / "trunc.json"), Catch::Matchers::ContainsSubstring("corrupt"));
  }
  SECTION("edited channel count names the offending tensor") {
    auto content = ts::read_file(path);
    const auto pos = content.find("\"channels_per_block\": [2]");
    REQUIRE(pos != std::string::npos);
    content.replace(pos, std::string("\"channels_per_block\": [2]").size(), "\"channels_per_block\": [3]");
    ts::write_file(dir / "edited.json", content);
    REQUIRE_THROWS_WITH(load_checkpoint(dir / "edited.json"),
                        Catch::Matchers::ContainsSubstring("block0.conv0.weight"));
  }
  SECTION("unsupported format version") {
    auto content = ts::read_file(path);
    const auto pos = content.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    content.replace(pos, std::string("\"format_version\": 1").size(), "\"format_version\": 999");
    ts::write_file(dir / "ver.json", content);
    REQUIRE_THROWS_WITH(load_checkpoint(dir / "ver.json"),
                        Catch::Matchers::ContainsSubstring("format_version"));
  }
  SECTION("missing file") {
    REQUIRE_THROWS_WITH(load_checkpoint(dir / "absent.json"), Catch::Matchers::ContainsSubstring("cannot open"));
  }
}
