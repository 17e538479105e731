// tsadv command-line front end.
//
// Subcommands: synth, train, attack, universal, advtrain, report. Every run
// writes its resolved configuration to <out>/resolved_config.json; re-running
// with --config <that file> reproduces the outputs byte for byte (values come
// from the config file, explicit flags override).
//
// Exit codes: 0 success, 1 runtime/IO failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsadv/tsadv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void set_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
  std::vector<double> out;
  for (const auto tok : tsadv::split(csv, ',')) {
    double v = 0.0;
    if (!tsadv::parse_double(tok, v))
      throw std::invalid_argument(std::string(what) + ": bad number '" + std::string(tok) + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(std::string(what) + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  for (const auto tok : tsadv::split(csv, ',')) {
    long long v = 0;
    if (!tsadv::parse_int(tok, v))
      throw std::invalid_argument(std::string(what) + ": bad integer '" + std::string(tok) + "'");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw std::invalid_argument(std::string(what) + ": empty list");
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + tsadv::format_double(v[i]);
  return out;
}

tsadv::Dataset load_dataset(const std::string& path, bool normalize, tsadv::Split split) {
  auto ds = tsadv::load_ucr_file(path, tsadv::Delimiter::auto_detect, split);
  if (normalize) ds = tsadv::znormalize_dataset(std::move(ds));
  return ds;
}

tsadv::Delimiter parse_delimiter(const std::string& s) {
  if (s == "comma") return tsadv::Delimiter::comma;
  if (s == "tab") return tsadv::Delimiter::tab;
  throw std::invalid_argument("delimiter must be 'comma' or 'tab'");
}

void write_history_csv(const std::vector<tsadv::EpochStats>& history, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,loss,lr\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    out << i << ',' << tsadv::format_double(history[i].mean_loss) << ','
        << tsadv::format_double(history[i].lr) << '\n';
}

// `per_sample` is the number of consecutive results per dataset sample:
// 1 for untargeted runs, K-1 for targeted runs.
void write_results_csv(const std::vector<tsadv::AdversarialResult>& results, std::size_t per_sample,
                       const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sample_index,pred_before,pred_after,target,success,linf_norm\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    out << (i / per_sample) << ',' << r.pred_before << ',' << r.pred_after << ',';
    if (r.target) out << *r.target;
    out << ',' << (r.success ? 1 : 0) << ',' << tsadv::format_double(r.linf_norm) << '\n';
  }
}

void require_value(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string("missing required option ") + flag);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_echo(const json& echo, const fs::path& out_dir) {
  std::ofstream f(out_dir / "resolved_config.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write resolved_config.json in " + out_dir.string());
  f << echo.dump(2) << '\n';
}

// Pre-scan for --config so file values can seed the parameter structs before
// CLI11 applies explicit flags over them.
std::optional<json> prescan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc)
      path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0)
      path = arg.substr(9);
    else
      continue;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw std::invalid_argument("bad config file " + path + ": " + e.what());
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthParams {
  std::uint64_t seed = 0;
  int per_class = 100;
  int length = 64;
  double noise = 0.1;
  std::string delimiter = "comma";
  std::string out;
  std::string config_path;

  static constexpr const char* kName = "synth";

  void from_config(const json& j) {
    set_if(j, "seed", seed);
    set_if(j, "per-class", per_class);
    set_if(j, "length", length);
    set_if(j, "noise", noise);
    set_if(j, "delimiter", delimiter);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName}, {"seed", seed},           {"per-class", per_class},
            {"length", length},    {"noise", noise},         {"delimiter", delimiter},
            {"out", out}};
  }
};

void add_synth(CLI::App& app, SynthParams& p) {
  auto* cmd = app.add_subcommand("synth", "Generate the synthetic 3-class waveform dataset");
  cmd->add_option("--seed", p.seed, "RNG seed");
  cmd->add_option("--per-class", p.per_class, "samples per class per split")->check(CLI::PositiveNumber);
  cmd->add_option("--length", p.length, "series length T")->check(CLI::Range(8, 1 << 20));
  cmd->add_option("--noise", p.noise, "noise sigma")->check(CLI::NonNegativeNumber);
  cmd->add_option("--delimiter", p.delimiter, "output delimiter (comma|tab)");
  cmd->add_option("--out", p.out, "output directory");
  cmd->add_option("--config", p.config_path, "JSON config file (flags override)");
}

int run_synth(const SynthParams& p) {
  require_value(p.out, "--out");
  tsadv::SynthSpec spec;
  spec.series_length = p.length;
  spec.samples_per_class = p.per_class;
  spec.noise_sigma = p.noise;
  spec.seed = p.seed;
  const auto delim = parse_delimiter(p.delimiter);

  const auto [train, test] = tsadv::generate_synthetic(spec);
  const auto dir = prepare_out_dir(p.out);
  tsadv::save_ucr_file(train, dir / "train.txt", delim);
  tsadv::save_ucr_file(test, dir / "test.txt", delim);
  write_echo(p.echo(), dir);
  std::printf("wrote %zu train and %zu test samples to %s\n", train.size(), test.size(), dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainParams {
  std::string train_path;
  std::string out;
  int blocks = 3;
  std::string channels = "16,32,32";
  std::string kernels = "8,5,3";
  bool no_residual = false;
  std::uint64_t init_seed = 0;
  int epochs = 100;
  int batch = 16;
  double lr = 0.001;
  double min_lr = 0.0001;
  int patience = 50;
  double lr_factor = 0.5;
  std::string optimizer = "adam";
  std::uint64_t seed = 0;
  int threads = 1;
  bool no_normalize = false;
  std::string config_path;

  static constexpr const char* kName = "train";

  void from_config(const json& j) {
    set_if(j, "train", train_path);
    set_if(j, "out", out);
    set_if(j, "blocks", blocks);
    set_if(j, "channels", channels);
    set_if(j, "kernels", kernels);
    set_if(j, "no-residual", no_residual);
    set_if(j, "init-seed", init_seed);
    set_if(j, "epochs", epochs);
    set_if(j, "batch", batch);
    set_if(j, "lr", lr);
    set_if(j, "min-lr", min_lr);
    set_if(j, "patience", patience);
    set_if(j, "lr-factor", lr_factor);
    set_if(j, "optimizer", optimizer);
    set_if(j, "seed", seed);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
  }
  json echo() const {
    return {{"subcommand", kName},     {"train", train_path},
            {"out", out},              {"blocks", blocks},
            {"channels", channels},    {"kernels", kernels},
            {"no-residual", no_residual}, {"init-seed", init_seed},
            {"epochs", epochs},        {"batch", batch},
            {"lr", lr},                {"min-lr", min_lr},
            {"patience", patience},    {"lr-factor", lr_factor},
            {"optimizer", optimizer},  {"seed", seed},
            {"threads", threads},      {"no-normalize", no_normalize}};
  }
};

void add_train(CLI::App& app, TrainParams& p) {
  auto* cmd = app.add_subcommand("train", "Train a classifier on a UCR-format dataset");
  cmd->add_option("--train", p.train_path, "training data file");
  cmd->add_option("--out", p.out, "output directory");
  cmd->add_option("--blocks", p.blocks, "number of residual blocks")->check(CLI::NonNegativeNumber);
  cmd->add_option("--channels", p.channels, "channels per block, comma separated");
  cmd->add_option("--kernels", p.kernels, "the 3 kernel sizes, comma separated");
  cmd->add_flag("--no-residual", p.no_residual, "disable residual shortcuts");
  cmd->add_option("--init-seed", p.init_seed, "weight init seed");
  cmd->add_option("--epochs", p.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch", p.batch, "mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", p.lr, "initial learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--min-lr", p.min_lr, "learning rate floor")->check(CLI::PositiveNumber);
  cmd->add_option("--patience", p.patience, "plateau patience in epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--lr-factor", p.lr_factor, "plateau reduction factor");
  cmd->add_option("--optimizer", p.optimizer, "adam|sgd");
  cmd->add_option("--seed", p.seed, "shuffling seed");
  cmd->add_option("--threads", p.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-normalize", p.no_normalize, "skip z-normalization at load");
  cmd->add_option("--config", p.config_path, "JSON config file (flags override)");
}

tsadv::ClassifierConfig model_config_from(const TrainParams& p, const tsadv::Dataset& data) {
  tsadv::ClassifierConfig cfg;
  cfg.num_blocks = p.blocks;
  if (cfg.num_blocks > 0) cfg.channels_per_block = parse_int_list(p.channels, "--channels");
  else cfg.channels_per_block.clear();
  const auto ks = parse_int_list(p.kernels, "--kernels");
  if (ks.size() != 3) throw std::invalid_argument("--kernels needs exactly 3 sizes");
  cfg.kernel_sizes = {ks[0], ks[1], ks[2]};
  cfg.residual = !p.no_residual;
  cfg.num_classes = data.num_classes;
  cfg.series_length = data.series_length;
  cfg.init_seed = p.init_seed;
  return cfg;
}

tsadv::TrainSchedule schedule_from(const TrainParams& p) {
  tsadv::TrainSchedule s;
  s.max_epochs = p.epochs;
  s.batch_size = p.batch;
  s.initial_lr = p.lr;
  s.min_lr = p.min_lr;
  s.plateau_patience = p.patience;
  s.lr_factor = p.lr_factor;
  if (p.optimizer == "adam")
    s.optimizer = tsadv::Optimizer::adam;
  else if (p.optimizer == "sgd")
    s.optimizer = tsadv::Optimizer::sgd;
  else
    throw std::invalid_argument("--optimizer must be adam or sgd");
  s.seed = p.seed;
  return s;
}

int run_train(const TrainParams& p) {
  require_value(p.train_path, "--train");
  require_value(p.out, "--out");
  const auto data = load_dataset(p.train_path, !p.no_normalize, tsadv::Split::train);
  const auto cfg = model_config_from(p, data);
  const auto schedule = schedule_from(p);

  const auto result = tsadv::fit(tsadv::init_classifier(cfg), data, schedule, p.threads);
  const auto dir = prepare_out_dir(p.out);
  tsadv::save_checkpoint(result.model, dir / "model.json");
  write_history_csv(result.history, dir / "history.csv");
  write_echo(p.echo(), dir);
  if (!result.history.empty())
    std::printf("trained %d epochs, final loss %s\n", p.epochs,
                tsadv::format_double(result.history.back().mean_loss).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

struct AttackParams {
  std::string model;
  std::string data;
  std::string method = "fgsm";
  std::string mode = "untargeted";
  double eps = 0.1;
  int steps = 10;
  double alpha = -1.0;  // negative -> eps/2
  std::string delimiter = "comma";
  int threads = 1;
  bool no_normalize = false;
  std::string out;
  std::string config_path;

  static constexpr const char* kName = "attack";

  void from_config(const json& j) {
    set_if(j, "model", model);
    set_if(j, "data", data);
    set_if(j, "method", method);
    set_if(j, "mode", mode);
    set_if(j, "eps", eps);
    set_if(j, "steps", steps);
    set_if(j, "alpha", alpha);
    set_if(j, "delimiter", delimiter);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName}, {"model", model},     {"data", data},
            {"method", method},    {"mode", mode},       {"eps", eps},
            {"steps", steps},      {"alpha", alpha},     {"delimiter", delimiter},
            {"threads", threads},  {"no-normalize", no_normalize}, {"out", out}};
  }
};

void add_attack(CLI::App& app, AttackParams& p) {
  auto* cmd = app.add_subcommand("attack", "Run FGSM or BIM over a dataset");
  cmd->add_option("--model", p.model, "model checkpoint");
  cmd->add_option("--data", p.data, "dataset file");
  cmd->add_option("--method", p.method, "fgsm|bim");
  cmd->add_option("--mode", p.mode, "untargeted|targeted");
  cmd->add_option("--eps", p.eps, "L-infinity budget")->check(CLI::NonNegativeNumber);
  cmd->add_option("--steps", p.steps, "BIM iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", p.alpha, "BIM step size (default eps/2)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--delimiter", p.delimiter, "adversarial export delimiter (comma|tab)");
  cmd->add_option("--threads", p.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-normalize", p.no_normalize, "skip z-normalization at load");
  cmd->add_option("--out", p.out, "output directory");
  cmd->add_option("--config", p.config_path, "JSON config file (flags override)");
}

tsadv::AttackConfig attack_config_from(const std::string& method, const std::string& mode, double eps, int steps,
                                       double alpha) {
  tsadv::AttackConfig cfg;
  if (method == "fgsm")
    cfg.method = tsadv::AttackMethod::fgsm;
  else if (method == "bim")
    cfg.method = tsadv::AttackMethod::bim;
  else
    throw std::invalid_argument("--method must be fgsm or bim");
  if (mode == "untargeted")
    cfg.mode = tsadv::AttackMode::untargeted;
  else if (mode == "targeted")
    cfg.mode = tsadv::AttackMode::targeted;
  else
    throw std::invalid_argument("--mode must be untargeted or targeted");
  cfg.eps_max = eps;
  cfg.steps = steps;
  cfg.alpha = alpha;
  return cfg;
}

int run_attack(AttackParams p) {
  require_value(p.model, "--model");
  require_value(p.data, "--data");
  require_value(p.out, "--out");
  if (p.alpha < 0.0) p.alpha = p.eps > 0.0 ? p.eps / 2.0 : 0.01;
  const auto clf = tsadv::load_checkpoint(p.model);
  const auto data = load_dataset(p.data, !p.no_normalize, tsadv::Split::test);
  const auto cfg = attack_config_from(p.method, p.mode, p.eps, p.steps, p.alpha);

  const auto results = tsadv::attack_dataset(clf, data, cfg, p.threads);
  const std::size_t per_sample =
      cfg.mode == tsadv::AttackMode::targeted ? static_cast<std::size_t>(data.num_classes - 1) : 1;
  const auto dir = prepare_out_dir(p.out);
  write_results_csv(results, per_sample, dir / "results.csv");
  tsadv::save_ucr_file(tsadv::adversarial_dataset(data, results), dir / "adversarial.txt",
                       parse_delimiter(p.delimiter));
  write_echo(p.echo(), dir);

  std::size_t successes = 0;
  for (const auto& r : results) successes += r.success ? 1 : 0;
  std::printf("%zu/%zu attacks succeeded\n", successes, results.size());
  return 0;
}

// ---------------------------------------------------------------------------
// universal
// ---------------------------------------------------------------------------

struct UniversalParams {
  std::string model;
  std::string train_path;
  std::string test_path;
  double eps = 0.1;
  double r_fooling = 0.9;
  int epoch_fool = 10;
  std::uint64_t seed = 0;
  double fraction = 1.0;
  int threads = 1;
  bool no_normalize = false;
  std::string out;
  std::string config_path;

  static constexpr const char* kName = "universal";

  void from_config(const json& j) {
    set_if(j, "model", model);
    set_if(j, "train", train_path);
    set_if(j, "test", test_path);
    set_if(j, "eps", eps);
    set_if(j, "r-fooling", r_fooling);
    set_if(j, "epoch-fool", epoch_fool);
    set_if(j, "seed", seed);
    set_if(j, "fraction", fraction);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName},   {"model", model},         {"train", train_path},
            {"test", test_path},     {"eps", eps},             {"r-fooling", r_fooling},
            {"epoch-fool", epoch_fool}, {"seed", seed},        {"fraction", fraction},
            {"threads", threads},    {"no-normalize", no_normalize}, {"out", out}};
  }
};

void add_universal(CLI::App& app, UniversalParams& p) {
  auto* cmd = app.add_subcommand("universal", "Compute a universal adversarial perturbation");
  cmd->add_option("--model", p.model, "model checkpoint");
  cmd->add_option("--train", p.train_path, "training data (perturbation source)");
  cmd->add_option("--test", p.test_path, "test data (success evaluation)");
  cmd->add_option("--eps", p.eps, "L-infinity bound")->check(CLI::PositiveNumber);
  cmd->add_option("--r-fooling", p.r_fooling, "target fooling ratio");
  cmd->add_option("--epoch-fool", p.epoch_fool, "maximum passes")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", p.seed, "shuffle seed");
  cmd->add_option("--fraction", p.fraction, "training fraction used");
  cmd->add_option("--threads", p.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-normalize", p.no_normalize, "skip z-normalization at load");
  cmd->add_option("--out", p.out, "output directory");
  cmd->add_option("--config", p.config_path, "JSON config file (flags override)");
}

int run_universal(const UniversalParams& p) {
  require_value(p.model, "--model");
  require_value(p.train_path, "--train");
  require_value(p.test_path, "--test");
  require_value(p.out, "--out");
  const auto clf = tsadv::load_checkpoint(p.model);
  auto train = load_dataset(p.train_path, !p.no_normalize, tsadv::Split::train);
  const auto test = load_dataset(p.test_path, !p.no_normalize, tsadv::Split::test);
  if (p.fraction < 1.0) train = tsadv::subsample(train, p.fraction, p.seed);

  const auto up = tsadv::compute_universal(clf, train, p.eps, p.r_fooling, p.epoch_fool, p.seed, p.threads);
  const double train_success = 100.0 * up.train_fooling_ratio;
  const double test_success = 100.0 * tsadv::error_ratio(clf, test, up.u, p.threads);

  const auto dir = prepare_out_dir(p.out);
  tsadv::save_perturbation(up, dir / "perturbation.json");
  {
    std::ofstream f(dir / "success.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write success.csv");
    f << "split,success_rate\n";
    f << "train," << tsadv::format_pct(train_success) << '\n';
    f << "test," << tsadv::format_pct(test_success) << '\n';
  }
  write_echo(p.echo(), dir);
  std::printf("universal perturbation: train success %s%%, test success %s%%, epochs %d\n",
              tsadv::format_pct(train_success).c_str(), tsadv::format_pct(test_success).c_str(), up.epochs_used);
  return 0;
}

// ---------------------------------------------------------------------------
// advtrain
// ---------------------------------------------------------------------------

struct AdvTrainParams {
  std::string model;
  std::string train_path;
  double eps = 0.1;
  std::string method = "fgsm";
  int steps = 10;
  double alpha = -1.0;
  int adv_per_clean = 1;
  int epochs = 1500;
  int batch = 16;
  double lr = 0.0005;
  double min_lr = 0.0001;
  int patience = 50;
  double lr_factor = 0.5;
  std::uint64_t seed = 0;
  bool regenerate = false;
  bool export_adv = false;
  int threads = 1;
  bool no_normalize = false;
  std::string out;
  std::string config_path;

  static constexpr const char* kName = "advtrain";

  void from_config(const json& j) {
    set_if(j, "model", model);
    set_if(j, "train", train_path);
    set_if(j, "eps", eps);
    set_if(j, "method", method);
    set_if(j, "steps", steps);
    set_if(j, "alpha", alpha);
    set_if(j, "adv-per-clean", adv_per_clean);
    set_if(j, "epochs", epochs);
    set_if(j, "batch", batch);
    set_if(j, "lr", lr);
    set_if(j, "min-lr", min_lr);
    set_if(j, "patience", patience);
    set_if(j, "lr-factor", lr_factor);
    set_if(j, "seed", seed);
    set_if(j, "regenerate", regenerate);
    set_if(j, "export-adv", export_adv);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName},  {"model", model},       {"train", train_path},
            {"eps", eps},           {"method", method},     {"steps", steps},
            {"alpha", alpha},       {"adv-per-clean", adv_per_clean},
            {"epochs", epochs},     {"batch", batch},       {"lr", lr},
            {"min-lr", min_lr},     {"patience", patience}, {"lr-factor", lr_factor},
            {"seed", seed},         {"regenerate", regenerate}, {"export-adv", export_adv},
            {"threads", threads},   {"no-normalize", no_normalize}, {"out", out}};
  }
};

void add_advtrain(CLI::App& app, AdvTrainParams& p) {
  auto* cmd = app.add_subcommand("advtrain", "Adversarially train a model");
  cmd->add_option("--model", p.model, "starting model checkpoint");
  cmd->add_option("--train", p.train_path, "training data file");
  cmd->add_option("--eps", p.eps, "adversarial budget")->check(CLI::NonNegativeNumber);
  cmd->add_option("--method", p.method, "fgsm|bim");
  cmd->add_option("--steps", p.steps, "BIM iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", p.alpha, "BIM step size (default eps/2)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--adv-per-clean", p.adv_per_clean, "adversarial variants per clean sample")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", p.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch", p.batch, "clean samples per batch")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", p.lr, "initial learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--min-lr", p.min_lr, "learning rate floor")->check(CLI::PositiveNumber);
  cmd->add_option("--patience", p.patience, "plateau patience")->check(CLI::PositiveNumber);
  cmd->add_option("--lr-factor", p.lr_factor, "plateau reduction factor");
  cmd->add_option("--seed", p.seed, "shuffling seed");
  cmd->add_flag("--regenerate", p.regenerate, "regenerate adversarials per batch instead of precomputing");
  cmd->add_flag("--export-adv", p.export_adv, "export the precomputed adversarial set");
  cmd->add_option("--threads", p.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-normalize", p.no_normalize, "skip z-normalization at load");
  cmd->add_option("--out", p.out, "output directory");
  cmd->add_option("--config", p.config_path, "JSON config file (flags override)");
}

int run_advtrain(AdvTrainParams p) {
  require_value(p.model, "--model");
  require_value(p.train_path, "--train");
  require_value(p.out, "--out");
  if (p.alpha < 0.0) p.alpha = p.eps > 0.0 ? p.eps / 2.0 : 0.01;
  const auto clf = tsadv::load_checkpoint(p.model);
  const auto train = load_dataset(p.train_path, !p.no_normalize, tsadv::Split::train);

  tsadv::DefenseConfig cfg;
  cfg.attack = attack_config_from(p.method, "untargeted", p.eps, p.steps, p.alpha);
  cfg.adv_per_clean = p.adv_per_clean;
  cfg.schedule.max_epochs = p.epochs;
  cfg.schedule.batch_size = p.batch;
  cfg.schedule.initial_lr = p.lr;
  cfg.schedule.min_lr = p.min_lr;
  cfg.schedule.plateau_patience = p.patience;
  cfg.schedule.lr_factor = p.lr_factor;
  cfg.schedule.seed = p.seed;
  cfg.precompute = !p.regenerate;

  const auto dir = prepare_out_dir(p.out);
  tsadv::Dataset adv;
  if (cfg.precompute) {
    adv = tsadv::precompute_adversarials(clf, train, cfg, p.threads);
    if (p.export_adv) tsadv::save_ucr_file(adv, dir / "adversarial_set.txt");
  }
  const auto result = tsadv::adversarial_train(clf, train, adv, cfg, p.threads);
  tsadv::save_checkpoint(result.model, dir / "defended.json");
  write_history_csv(result.history, dir / "history.csv");
  write_echo(p.echo(), dir);
  std::printf("adversarial training finished (%d epochs)\n", p.epochs);
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportCommonParams {
  std::string format = "csv";
  int threads = 1;
  bool no_normalize = false;
  std::string out;
  std::string config_path;
};

const char* format_extension(const std::string& format) {
  if (format == "csv") return ".csv";
  if (format == "json") return ".json";
  return ".md";
}

struct ReportTable1Params : ReportCommonParams {
  std::string train_path;
  std::string test_path;
  std::string model;  // optional pretrained checkpoint
  int blocks = 3;
  std::string channels = "16,32,32";
  std::string kernels = "8,5,3";
  std::uint64_t init_seed = 0;
  int epochs = 100;
  int batch = 16;
  double lr = 0.001;
  std::uint64_t seed = 0;
  double eps = 0.1;
  int steps = 10;
  double alpha = -1.0;
  int defense_epochs = 1500;
  double r_fooling = 0.9;
  int epoch_fool = 10;
  std::uint64_t universal_seed = 0;

  static constexpr const char* kName = "report table1";

  void from_config(const json& j) {
    set_if(j, "train", train_path);
    set_if(j, "test", test_path);
    set_if(j, "model", model);
    set_if(j, "blocks", blocks);
    set_if(j, "channels", channels);
    set_if(j, "kernels", kernels);
    set_if(j, "init-seed", init_seed);
    set_if(j, "epochs", epochs);
    set_if(j, "batch", batch);
    set_if(j, "lr", lr);
    set_if(j, "seed", seed);
    set_if(j, "eps", eps);
    set_if(j, "steps", steps);
    set_if(j, "alpha", alpha);
    set_if(j, "defense-epochs", defense_epochs);
    set_if(j, "r-fooling", r_fooling);
    set_if(j, "epoch-fool", epoch_fool);
    set_if(j, "universal-seed", universal_seed);
    set_if(j, "format", format);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName},   {"train", train_path},  {"test", test_path},
            {"model", model},        {"blocks", blocks},     {"channels", channels},
            {"kernels", kernels},    {"init-seed", init_seed}, {"epochs", epochs},
            {"batch", batch},        {"lr", lr},             {"seed", seed},
            {"eps", eps},            {"steps", steps},       {"alpha", alpha},
            {"defense-epochs", defense_epochs}, {"r-fooling", r_fooling},
            {"epoch-fool", epoch_fool}, {"universal-seed", universal_seed},
            {"format", format},      {"threads", threads},   {"no-normalize", no_normalize},
            {"out", out}};
  }
};

struct ReportSweepParams : ReportCommonParams {
  std::string model;
  std::string data;
  std::string metric = "accuracy";
  std::string eps_grid = "0,0.0125,0.025,0.05,0.075,0.1,0.15,0.2";
  int steps = 10;

  static constexpr const char* kName = "report sweep";

  void from_config(const json& j) {
    set_if(j, "model", model);
    set_if(j, "data", data);
    set_if(j, "metric", metric);
    set_if(j, "eps-grid", eps_grid);
    set_if(j, "steps", steps);
    set_if(j, "format", format);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName}, {"model", model},   {"data", data},
            {"metric", metric},    {"eps-grid", eps_grid}, {"steps", steps},
            {"format", format},    {"threads", threads},   {"no-normalize", no_normalize},
            {"out", out}};
  }
};

struct ReportGeneralizationParams : ReportCommonParams {
  std::string model;
  std::string train_path;
  std::string test_path;
  std::string fractions = "0.05,0.1,0.25,0.5,1.0";
  double eps = 0.1;
  double r_fooling = 0.9;
  int epoch_fool = 10;
  std::uint64_t seed = 0;
  std::uint64_t subsample_seed = 0;

  static constexpr const char* kName = "report generalization";

  void from_config(const json& j) {
    set_if(j, "model", model);
    set_if(j, "train", train_path);
    set_if(j, "test", test_path);
    set_if(j, "fractions", fractions);
    set_if(j, "eps", eps);
    set_if(j, "r-fooling", r_fooling);
    set_if(j, "epoch-fool", epoch_fool);
    set_if(j, "seed", seed);
    set_if(j, "subsample-seed", subsample_seed);
    set_if(j, "format", format);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName},   {"model", model},       {"train", train_path},
            {"test", test_path},     {"fractions", fractions}, {"eps", eps},
            {"r-fooling", r_fooling}, {"epoch-fool", epoch_fool}, {"seed", seed},
            {"subsample-seed", subsample_seed}, {"format", format},
            {"threads", threads},    {"no-normalize", no_normalize}, {"out", out}};
  }
};

struct ReportDefenseParams : ReportCommonParams {
  std::string original;
  std::string defended;
  std::string data;
  std::string eps_grid = "0,0.0125,0.025,0.05,0.075,0.1,0.15,0.2";
  int steps = 10;

  static constexpr const char* kName = "report defense";

  void from_config(const json& j) {
    set_if(j, "original", original);
    set_if(j, "defended", defended);
    set_if(j, "data", data);
    set_if(j, "eps-grid", eps_grid);
    set_if(j, "steps", steps);
    set_if(j, "format", format);
    set_if(j, "threads", threads);
    set_if(j, "no-normalize", no_normalize);
    set_if(j, "out", out);
  }
  json echo() const {
    return {{"subcommand", kName}, {"original", original}, {"defended", defended},
            {"data", data},        {"eps-grid", eps_grid}, {"steps", steps},
            {"format", format},    {"threads", threads},   {"no-normalize", no_normalize},
            {"out", out}};
  }
};

void add_report_common(CLI::App* cmd, ReportCommonParams& p) {
  cmd->add_option("--format", p.format, "csv|json|markdown");
  cmd->add_option("--threads", p.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-normalize", p.no_normalize, "skip z-normalization at load");
  cmd->add_option("--out", p.out, "output directory");
  cmd->add_option("--config", p.config_path, "JSON config file (flags override)");
}

void add_report(CLI::App& app, ReportTable1Params& t1, ReportSweepParams& sw, ReportGeneralizationParams& gen,
                ReportDefenseParams& def) {
  auto* report = app.add_subcommand("report", "Experiment protocols and report files");
  report->require_subcommand(1);

  auto* table1 = report->add_subcommand("table1", "Full attack/defense summary row");
  table1->add_option("--train", t1.train_path, "training data");
  table1->add_option("--test", t1.test_path, "test data");
  table1->add_option("--model", t1.model, "pretrained checkpoint (skips base training)");
  table1->add_option("--blocks", t1.blocks, "number of residual blocks")->check(CLI::NonNegativeNumber);
  table1->add_option("--channels", t1.channels, "channels per block");
  table1->add_option("--kernels", t1.kernels, "kernel sizes");
  table1->add_option("--init-seed", t1.init_seed, "weight init seed");
  table1->add_option("--epochs", t1.epochs, "base training epochs")->check(CLI::NonNegativeNumber);
  table1->add_option("--batch", t1.batch, "batch size")->check(CLI::PositiveNumber);
  table1->add_option("--lr", t1.lr, "base learning rate")->check(CLI::PositiveNumber);
  table1->add_option("--seed", t1.seed, "training shuffle seed");
  table1->add_option("--eps", t1.eps, "attack budget")->check(CLI::NonNegativeNumber);
  table1->add_option("--steps", t1.steps, "BIM iterations")->check(CLI::PositiveNumber);
  table1->add_option("--alpha", t1.alpha, "BIM step size (default eps/2)")->check(CLI::NonNegativeNumber);
  table1->add_option("--defense-epochs", t1.defense_epochs, "adversarial training epochs")
      ->check(CLI::NonNegativeNumber);
  table1->add_option("--r-fooling", t1.r_fooling, "universal target fooling ratio");
  table1->add_option("--epoch-fool", t1.epoch_fool, "universal passes")->check(CLI::PositiveNumber);
  table1->add_option("--universal-seed", t1.universal_seed, "universal shuffle seed");
  add_report_common(table1, t1);

  auto* sweep = report->add_subcommand("sweep", "Accuracy or targeted-success epsilon sweep");
  sweep->add_option("--model", sw.model, "model checkpoint");
  sweep->add_option("--data", sw.data, "dataset file");
  sweep->add_option("--metric", sw.metric, "accuracy|targeted");
  sweep->add_option("--eps-grid", sw.eps_grid, "ascending eps values, comma separated");
  sweep->add_option("--steps", sw.steps, "BIM iterations")->check(CLI::PositiveNumber);
  add_report_common(sweep, sw);

  auto* gen_cmd = report->add_subcommand("generalization", "Universal success vs training fraction");
  gen_cmd->add_option("--model", gen.model, "model checkpoint");
  gen_cmd->add_option("--train", gen.train_path, "training data");
  gen_cmd->add_option("--test", gen.test_path, "test data");
  gen_cmd->add_option("--fractions", gen.fractions, "ascending fractions in (0,1]");
  gen_cmd->add_option("--eps", gen.eps, "L-infinity bound")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--r-fooling", gen.r_fooling, "target fooling ratio");
  gen_cmd->add_option("--epoch-fool", gen.epoch_fool, "maximum passes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "universal shuffle seed");
  gen_cmd->add_option("--subsample-seed", gen.subsample_seed, "subsampling seed");
  add_report_common(gen_cmd, gen);

  auto* def_cmd = report->add_subcommand("defense", "Original vs defended accuracy over eps");
  def_cmd->add_option("--original", def.original, "original model checkpoint");
  def_cmd->add_option("--defended", def.defended, "defended model checkpoint");
  def_cmd->add_option("--data", def.data, "dataset file");
  def_cmd->add_option("--eps-grid", def.eps_grid, "ascending eps values, comma separated");
  def_cmd->add_option("--steps", def.steps, "BIM iterations")->check(CLI::PositiveNumber);
  add_report_common(def_cmd, def);
}

int run_report_table1(ReportTable1Params p) {
  require_value(p.train_path, "--train");
  require_value(p.test_path, "--test");
  require_value(p.out, "--out");
  if (p.alpha < 0.0) p.alpha = p.eps > 0.0 ? p.eps / 2.0 : 0.01;
  const auto train = load_dataset(p.train_path, !p.no_normalize, tsadv::Split::train);
  const auto test = load_dataset(p.test_path, !p.no_normalize, tsadv::Split::test);

  tsadv::ClassifierConfig model_cfg;
  model_cfg.num_blocks = p.blocks;
  if (model_cfg.num_blocks > 0) model_cfg.channels_per_block = parse_int_list(p.channels, "--channels");
  else model_cfg.channels_per_block.clear();
  const auto ks = parse_int_list(p.kernels, "--kernels");
  if (ks.size() != 3) throw std::invalid_argument("--kernels needs exactly 3 sizes");
  model_cfg.kernel_sizes = {ks[0], ks[1], ks[2]};
  model_cfg.num_classes = train.num_classes;
  model_cfg.series_length = train.series_length;
  model_cfg.init_seed = p.init_seed;

  tsadv::TrainSchedule base;
  base.max_epochs = p.epochs;
  base.batch_size = p.batch;
  base.initial_lr = p.lr;
  base.seed = p.seed;

  tsadv::AttackConfig attack;
  attack.eps_max = p.eps;
  attack.steps = p.steps;
  attack.alpha = p.alpha;

  tsadv::DefenseConfig defense;
  defense.attack.eps_max = p.eps;
  defense.schedule.max_epochs = p.defense_epochs;
  defense.schedule.batch_size = p.batch;

  tsadv::UniversalConfig universal;
  universal.eps_max = p.eps > 0.0 ? p.eps : 1e-9;
  universal.r_fooling = p.r_fooling;
  universal.epoch_fool = p.epoch_fool;
  universal.seed = p.universal_seed;

  std::optional<tsadv::Classifier> pretrained;
  if (!p.model.empty()) pretrained = tsadv::load_checkpoint(p.model);

  const auto row = tsadv::table1_row(train, test, model_cfg, base, attack, defense, universal,
                                     pretrained ? &*pretrained : nullptr, p.threads);
  const auto dir = prepare_out_dir(p.out);
  tsadv::emit_report(std::vector<tsadv::ReportRow>{row}, tsadv::parse_report_format(p.format),
                     dir / (std::string("table1") + format_extension(p.format)));
  write_echo(p.echo(), dir);
  return 0;
}

int run_report_sweep(const ReportSweepParams& p) {
  require_value(p.model, "--model");
  require_value(p.data, "--data");
  require_value(p.out, "--out");
  const auto clf = tsadv::load_checkpoint(p.model);
  const auto data = load_dataset(p.data, !p.no_normalize, tsadv::Split::test);
  tsadv::SweepMetric metric;
  if (p.metric == "accuracy")
    metric = tsadv::SweepMetric::accuracy;
  else if (p.metric == "targeted" || p.metric == "targeted_success")
    metric = tsadv::SweepMetric::targeted_success;
  else
    throw std::invalid_argument("--metric must be accuracy or targeted");

  const auto grid = parse_double_list(p.eps_grid, "--eps-grid");
  const auto points = tsadv::epsilon_sweep(clf, data, grid, metric, p.steps, p.threads);
  const auto dir = prepare_out_dir(p.out);
  tsadv::emit_report(points, tsadv::parse_report_format(p.format),
                     dir / (std::string("sweep") + format_extension(p.format)));
  write_echo(p.echo(), dir);
  return 0;
}

int run_report_generalization(const ReportGeneralizationParams& p) {
  require_value(p.model, "--model");
  require_value(p.train_path, "--train");
  require_value(p.test_path, "--test");
  require_value(p.out, "--out");
  const auto clf = tsadv::load_checkpoint(p.model);
  const auto train = load_dataset(p.train_path, !p.no_normalize, tsadv::Split::train);
  const auto test = load_dataset(p.test_path, !p.no_normalize, tsadv::Split::test);

  tsadv::UniversalConfig ucfg;
  ucfg.eps_max = p.eps;
  ucfg.r_fooling = p.r_fooling;
  ucfg.epoch_fool = p.epoch_fool;
  ucfg.seed = p.seed;

  const auto fractions = parse_double_list(p.fractions, "--fractions");
  const auto curve = tsadv::generalization_curve(clf, train, test, fractions, ucfg, p.subsample_seed, p.threads);
  const auto dir = prepare_out_dir(p.out);
  tsadv::emit_report(curve, tsadv::parse_report_format(p.format),
                     dir / (std::string("generalization") + format_extension(p.format)));
  write_echo(p.echo(), dir);
  return 0;
}

int run_report_defense(const ReportDefenseParams& p) {
  require_value(p.original, "--original");
  require_value(p.defended, "--defended");
  require_value(p.data, "--data");
  require_value(p.out, "--out");
  const auto original = tsadv::load_checkpoint(p.original);
  const auto defended = tsadv::load_checkpoint(p.defended);
  const auto data = load_dataset(p.data, !p.no_normalize, tsadv::Split::test);
  const auto grid = parse_double_list(p.eps_grid, "--eps-grid");
  const auto rows = tsadv::defense_curve(original, defended, data, grid, p.steps, p.threads);
  const auto dir = prepare_out_dir(p.out);
  tsadv::emit_report(rows, tsadv::parse_report_format(p.format),
                     dir / (std::string("defense") + format_extension(p.format)));
  write_echo(p.echo(), dir);
  return 0;
}

void check_config_subcommand(const std::optional<json>& config, const char* invoked) {
  if (!config) return;
  if (config->contains("subcommand") && config->at("subcommand").get<std::string>() != invoked)
    throw std::invalid_argument("config file was written by '" +
                                config->at("subcommand").get<std::string>() + "', not '" + invoked + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks and defenses for 1D time-series classifiers"};
  app.require_subcommand(1);

  SynthParams synth_p;
  TrainParams train_p;
  AttackParams attack_p;
  UniversalParams universal_p;
  AdvTrainParams advtrain_p;
  ReportTable1Params table1_p;
  ReportSweepParams sweep_p;
  ReportGeneralizationParams gen_p;
  ReportDefenseParams defense_p;

  std::optional<json> config;
  try {
    config = prescan_config(argc, argv);
    if (config) {
      synth_p.from_config(*config);
      train_p.from_config(*config);
      attack_p.from_config(*config);
      universal_p.from_config(*config);
      advtrain_p.from_config(*config);
      table1_p.from_config(*config);
      sweep_p.from_config(*config);
      gen_p.from_config(*config);
      defense_p.from_config(*config);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  add_synth(app, synth_p);
  add_train(app, train_p);
  add_attack(app, attack_p);
  add_universal(app, universal_p);
  add_advtrain(app, advtrain_p);
  add_report(app, table1_p, sweep_p, gen_p, defense_p);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("synth")) {
      check_config_subcommand(config, SynthParams::kName);
      return run_synth(synth_p);
    }
    if (app.got_subcommand("train")) {
      check_config_subcommand(config, TrainParams::kName);
      return run_train(train_p);
    }
    if (app.got_subcommand("attack")) {
      check_config_subcommand(config, AttackParams::kName);
      return run_attack(attack_p);
    }
    if (app.got_subcommand("universal")) {
      check_config_subcommand(config, UniversalParams::kName);
      return run_universal(universal_p);
    }
    if (app.got_subcommand("advtrain")) {
      check_config_subcommand(config, AdvTrainParams::kName);
      return run_advtrain(advtrain_p);
    }
    if (app.got_subcommand("report")) {
      auto* report = app.get_subcommand("report");
      if (report->got_subcommand("table1")) {
        check_config_subcommand(config, ReportTable1Params::kName);
        return run_report_table1(table1_p);
      }
      if (report->got_subcommand("sweep")) {
        check_config_subcommand(config, ReportSweepParams::kName);
        return run_report_sweep(sweep_p);
      }
      if (report->got_subcommand("generalization")) {
        check_config_subcommand(config, ReportGeneralizationParams::kName);
        return run_report_generalization(gen_p);
      }
      if (report->got_subcommand("defense")) {
        check_config_subcommand(config, ReportDefenseParams::kName);
        return run_report_defense(defense_p);
      }
    }
    std::fprintf(stderr, "error: no subcommand given\n");
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
