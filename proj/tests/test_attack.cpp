#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "test_helpers.hpp"
#include "tsadv/attack.hpp"

using namespace tsadv;
namespace ts = testing_support;

namespace {

LabeledSeries make_sample(std::vector<double> v, int label) { return {std::move(v), label}; }

}  // namespace

TEST_CASE("sign_vector") {
  CHECK(sign_vector({0.3, -0.2, 0.0}) == std::vector<double>{1.0, -1.0, 0.0});
  CHECK(sign_vector({0.0, 0.0}) == std::vector<double>{0.0, 0.0});

  std::mt19937_64 rng(3);
  auto v = ts::random_input(rng, 32);
  auto neg = v;
  for (auto& x : neg) x = -x;
  const auto s = sign_vector(v);
  const auto sn = sign_vector(neg);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(sn[i] == -s[i]);
}

TEST_CASE("clip_to_eps_ball") {
  const std::vector<double> origin{0.0, 0.0, 0.0};
  CHECK(clip_to_eps_ball({0.3, -0.2, 0.05}, origin, 0.1) == std::vector<double>{0.1, -0.1, 0.05});
  const std::vector<double> inside{0.05, -0.03, 0.0};
  CHECK(clip_to_eps_ball(inside, origin, 0.1) == inside);
  REQUIRE_THROWS_AS(clip_to_eps_ball({1.0}, origin, 0.1), std::invalid_argument);
}

TEST_CASE("fgsm with zero budget returns the input") {
  std::mt19937_64 rng(5);
  const auto clf = ts::random_model(rng, ts::small_config(12, 1, 3));
  const auto x = ts::random_input(rng, 12);
  const auto sample = make_sample(x, 0);
  const auto r = fgsm(clf, sample, 0.0, AttackMode::untargeted);
  CHECK(r.adversarial == x);
  CHECK(r.linf_norm == 0.0);
  CHECK(r.success == (r.pred_before != 0));
  CHECK(r.pred_after == r.pred_before);
}

TEST_CASE("fgsm on a zero-gradient model returns the input") {
  Classifier clf(ts::small_config(10, 1, 3));  // all-zero parameters
  std::mt19937_64 rng(7);
  const auto x = ts::random_input(rng, 10);
  const auto r = fgsm(clf, make_sample(x, 1), 0.1, AttackMode::untargeted);
  CHECK(r.adversarial == x);
}

TEST_CASE("fgsm step matches the finite-difference gradient sign") {
  // no-block binary model with known dense weights
  const auto clf = ts::linear_model(2, 2, {0.8, -0.5}, {0.1, -0.2});
  const std::vector<double> x{1.0, -1.0};
  const int y = 0;

  const auto numeric = ts::fd_gradient([&](const std::vector<double>& xx) { return loss(clf, xx, y); }, x, 1e-5);
  const auto s = sign_vector(numeric);
  for (double v : s) REQUIRE(v != 0.0);

  const auto r = fgsm(clf, make_sample(x, y), 0.1, AttackMode::untargeted);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(r.adversarial[i] == Catch::Approx(x[i] + 0.1 * s[i]).margin(1e-12));
}

TEST_CASE("targeted and untargeted fgsm steps are exact negatives at the same class") {
  std::mt19937_64 rng(11);
  const auto clf = ts::random_model(rng, ts::small_config(14, 1, 3));
  const auto x = ts::random_input(rng, 14);
  const int y = 2;
  const auto untargeted_step = sign_vector(grad_input(clf, x, y, AttackMode::untargeted));
  const auto targeted_step = sign_vector(grad_input(clf, x, y, AttackMode::targeted));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(targeted_step[i] == -untargeted_step[i]);
}

TEST_CASE("fgsm rejects a target equal to the true label") {
  std::mt19937_64 rng(13);
  const auto clf = ts::random_model(rng, ts::small_config(8, 0, 3));
  const auto sample = make_sample(ts::random_input(rng, 8), 1);
  REQUIRE_THROWS_AS(fgsm(clf, sample, 0.1, AttackMode::targeted, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(fgsm(clf, sample, 0.1, AttackMode::targeted), std::invalid_argument);
}

TEST_CASE("bim with one full-size step equals fgsm") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    const auto cfg = ts::small_config(12, rep % 3, 3, 60 + rep);
    const auto clf = ts::random_model(rng, cfg);
    const auto sample = make_sample(ts::random_input(rng, 12), rep % 3);
    const double eps = 0.02 + 0.03 * rep;

    AttackConfig ac;
    ac.method = AttackMethod::bim;
    ac.eps_max = eps;
    ac.steps = 1;
    ac.alpha = eps;
    const auto via_bim = bim(clf, sample, ac);
    const auto via_fgsm = fgsm(clf, sample, eps, AttackMode::untargeted);
    REQUIRE(via_bim.adversarial == via_fgsm.adversarial);
    CHECK(via_bim.pred_after == via_fgsm.pred_after);
  }
}

TEST_CASE("bim with zero budget returns the input regardless of steps") {
  std::mt19937_64 rng(19);
  const auto clf = ts::random_model(rng, ts::small_config(10, 1, 3));
  const auto x = ts::random_input(rng, 10);
  AttackConfig ac;
  ac.method = AttackMethod::bim;
  ac.eps_max = 0.0;
  ac.steps = 7;
  ac.alpha = 0.05;
  const auto r = bim(clf, make_sample(x, 0), ac);
  CHECK(r.adversarial == x);
}

TEST_CASE("bim saturates the ball when the gradient sign is constant") {
  // Linear model: the gradient sign is the same everywhere.
  const auto clf = ts::linear_model(8, 2, {1.0, -1.0}, {0.0, 0.0});
  std::mt19937_64 rng(23);
  const auto x = ts::random_input(rng, 8);
  const int y = 0;
  const double eps = 0.1;

  AttackConfig ac;
  ac.method = AttackMethod::bim;
  ac.eps_max = eps;
  ac.steps = 10;
  ac.alpha = eps / 2.0;
  const auto r = bim(clf, make_sample(x, y), ac);

  // oracle: unrolled loop with the finite-difference sign, clipping by hand
  const auto s = sign_vector(
      ts::fd_gradient([&](const std::vector<double>& xx) { return loss(clf, xx, y); }, x, 1e-5));
  std::vector<double> expected = x;
  for (int n = 0; n < ac.steps; ++n) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
      expected[i] += ac.alpha * s[i];
      expected[i] = std::min(x[i] + eps, std::max(expected[i], x[i] - eps));
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(r.adversarial[i] == Catch::Approx(expected[i]).margin(1e-12));
    CHECK(std::abs(r.adversarial[i] - x[i]) == Catch::Approx(eps).margin(1e-12));  // saturated after 2 steps
  }
}

TEST_CASE("attack_dataset counting and ordering") {
  SynthSpec spec;
  spec.series_length = 16;
  spec.samples_per_class = 4;  // M = 12
  spec.seed = 29;
  const auto ds = generate_synthetic(spec).first;
  std::mt19937_64 rng(31);
  const auto clf = ts::random_model(rng, ts::small_config(16, 1, 3));

  SECTION("untargeted: one result per sample") {
    AttackConfig ac;
    const auto results = attack_dataset(clf, ds, ac);
    REQUIRE(results.size() == ds.size());
    for (std::size_t i = 0; i < results.size(); ++i) CHECK(results[i].original.label == ds.samples[i].label);
  }
  SECTION("targeted: (K-1)*M results ordered by sample then target") {
    AttackConfig ac;
    ac.mode = AttackMode::targeted;
    const auto results = attack_dataset(clf, ds, ac);
    REQUIRE(results.size() == ds.size() * 2);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        if (c == ds.samples[i].label) continue;
        REQUIRE(results[idx].target.has_value());
        CHECK(*results[idx].target == c);
        ++idx;
      }
    }
  }
}

TEST_CASE("attack_dataset at zero budget reproduces the clean misclassification ratio") {
  SynthSpec spec;
  spec.series_length = 16;
  spec.samples_per_class = 10;
  spec.seed = 37;
  const auto ds = generate_synthetic(spec).first;
  std::mt19937_64 rng(41);
  const auto clf = ts::random_model(rng, ts::small_config(16, 1, 3));

  AttackConfig ac;
  ac.eps_max = 0.0;
  const auto results = attack_dataset(clf, ds, ac);
  std::size_t clean_wrong = 0;
  for (const auto& s : ds.samples) clean_wrong += predict(clf, s.values) != s.label ? 1 : 0;
  std::size_t successes = 0;
  for (const auto& r : results) successes += r.success ? 1 : 0;
  CHECK(successes == clean_wrong);
}

TEST_CASE("eps-ball containment holds for random attacks") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 25; ++rep) {
    const auto cfg = ts::small_config(12, rep % 3, 3, 300 + rep);
    const auto clf = ts::random_model(rng, cfg);
    const auto x = ts::random_input(rng, 12);
    const int y = rep % 3;
    const double eps = 0.2 * std::generate_canonical<double, 53>(rng);

    AttackConfig ac;
    ac.eps_max = eps;
    ac.steps = 1 + rep % 10;
    ac.alpha = eps > 0 ? eps / 2.0 : 0.01;
    ac.method = rep % 2 ? AttackMethod::bim : AttackMethod::fgsm;

    const auto r = ac.method == AttackMethod::bim ? bim(clf, make_sample(x, y), ac)
                                                  : fgsm(clf, make_sample(x, y), eps, AttackMode::untargeted);
    CHECK(r.linf_norm <= eps + 1e-9);

    if (ac.method == AttackMethod::fgsm) {
      const auto g = grad_input(clf, x, y);
      bool nowhere_zero = true;
      for (double v : g) nowhere_zero = nowhere_zero && v != 0.0;
      if (nowhere_zero)
        for (std::size_t i = 0; i < x.size(); ++i)
          CHECK(std::abs(r.adversarial[i] - x[i]) == Catch::Approx(eps).margin(1e-15));
    }
  }
}

TEST_CASE("attack_dataset is deterministic and thread-invariant") {
  SynthSpec spec;
  spec.series_length = 16;
  spec.samples_per_class = 5;
  spec.seed = 47;
  const auto ds = generate_synthetic(spec).first;
  std::mt19937_64 rng(53);
  const auto clf = ts::random_model(rng, ts::small_config(16, 1, 3));

  AttackConfig ac;
  ac.method = AttackMethod::bim;
  ac.steps = 5;
  ac.alpha = 0.02;
  const auto a = attack_dataset(clf, ds, ac, 1);
  const auto b = attack_dataset(clf, ds, ac, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].adversarial == b[i].adversarial);
    REQUIRE(a[i].pred_after == b[i].pred_after);
  }
}

TEST_CASE("alpha larger than eps warns but does not reject") {
  AttackConfig ac;
  ac.method = AttackMethod::bim;
  ac.eps_max = 0.05;
  ac.alpha = 0.2;
  CHECK(validate_attack_config(ac).has_value());

  std::mt19937_64 rng(59);
  const auto clf = ts::random_model(rng, ts::small_config(8, 0, 2));
  const auto r = bim(clf, make_sample(ts::random_input(rng, 8), 0), ac);
  CHECK(r.linf_norm <= ac.eps_max + 1e-9);
}

TEST_CASE("invalid attack configs are rejected") {
  AttackConfig ac;
  ac.eps_max = -0.1;
  REQUIRE_THROWS_AS(validate_attack_config(ac), std::invalid_argument);
  AttackConfig ac2;
  ac2.method = AttackMethod::bim;
  ac2.steps = 0;
  REQUIRE_THROWS_AS(validate_attack_config(ac2), std::invalid_argument);
}
