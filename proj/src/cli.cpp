#include "fguap/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string_view>
#include <vector>

#include "fguap/analysis.hpp"
#include "fguap/attack.hpp"
#include "fguap/binary_io.hpp"
#include "fguap/dataset.hpp"
#include "fguap/errors.hpp"
#include "fguap/model.hpp"
#include "fguap/report.hpp"
#include "fguap/trainer.hpp"

namespace fguap::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string text_of(const std::string& v) { return v; }
std::string text_of(double v) { return io::format_real(v); }
std::string text_of(bool v) { return v ? "true" : "false"; }
template <std::unsigned_integral T>
std::string text_of(T v) {
  return std::to_string(v);
}

// One subcommand plus the record needed to write its resolved config.
struct Command {
  struct Field {
    std::string key;
    CLI::Option* option;
    std::function<std::string()> text;
    bool has_default;
  };

  explicit Command(CLI::App* a) : app(a) {}

  CLI::App* app;
  std::vector<Field> fields;

  template <typename T>
  CLI::Option* option(const std::string& key, T& var, const std::string& help,
                      bool has_default = true) {
    CLI::Option* o = app->add_option("--" + key, var, help);
    if (has_default) o->capture_default_str();
    fields.push_back({key, o, [&var] { return text_of(var); }, has_default});
    return o;
  }

  CLI::Option* flag(const std::string& key, bool& var, const std::string& help) {
    CLI::Option* o = app->add_flag("--" + key, var, help);
    fields.push_back({key, o, [&var] { return text_of(var); }, true});
    return o;
  }

  bool knows(const std::string& key) const {
    return std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return f.key == key; });
  }

  bool given(const std::string& key) const {
    for (const Field& f : fields) {
      if (f.key == key) return f.option->count() > 0;
    }
    return false;
  }

  std::string resolved_text() const {
    std::string s = "# command: " + app->get_name() + "\n";
    for (const Field& f : fields) {
      if (f.has_default || f.option->count() > 0) s += f.key + ": " + f.text() + "\n";
    }
    return s;
  }
};

// --- config files -----------------------------------------------------------

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto colon = body.find(':');
    const std::string key(trim(body.substr(0, colon)));
    if (colon == std::string_view::npos || key.empty()) {
      throw UsageError(path.string() + ":" + std::to_string(number) +
                       ": expected 'key: value'");
    }
    if (!seen.insert(key).second) {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": duplicate key '" +
                       key + "'");
    }
    entries.emplace_back(key, std::string(trim(body.substr(colon + 1))));
  }
  return entries;
}

// Config entries become ordinary flags placed before the user's own, so with
// the take-last policy a flag on the command line wins over the file.
std::vector<std::string> expand_config(std::span<const std::string> args,
                                       const std::map<std::string, Command*>& commands) {
  std::vector<std::string> out(args.begin(), args.end());
  if (args.empty()) return out;
  const auto cmd = commands.find(args[0]);
  if (cmd == commands.end()) return out;

  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (!path) return out;

  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config(*path)) {
    if (key == "config" || !cmd->second->knows(key)) {
      throw UsageError("unknown config key '" + key + "' for " + args[0]);
    }
    injected.push_back("--" + key + "=" + value);
  }
  out.insert(out.begin() + 1, injected.begin(), injected.end());
  return out;
}

// --- shared helpers ----------------------------------------------------------

double parse_budget(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) return io::parse_real(text);
    const double num = io::parse_real(text.substr(0, slash));
    const double den = io::parse_real(text.substr(slash + 1));
    if (den == 0.0) throw UsageError("--xi denominator is zero");
    return num / den;
  } catch (const FormatError&) {
    throw UsageError("--xi expects a number or a fraction like 10/255, got '" + text + "'");
  }
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> counts;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || end != item.data() + item.size()) {
      throw UsageError("--counts expects comma-separated integers, got '" + text + "'");
    }
    counts.push_back(v);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (counts.empty()) throw UsageError("--counts is empty");
  return counts;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file(path, io::Bytes(text.begin(), text.end()));
}

fs::path prepare_dir(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

std::vector<fs::path> files_with_extension(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw ArgumentError(dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  }
  if (files.empty()) throw ArgumentError("no " + ext + " files in " + dir);
  std::sort(files.begin(), files.end());
  return files;
}

double min_class_mean_distance(const data::LabeledDataset& ds) {
  const std::size_t K = ds.num_classes;
  const std::size_t P = ds.images.size() / ds.size();
  const auto counts = ds.class_counts();
  std::vector<double> mu(K * P, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < P; ++j) mu[ds.labels[i] * P + j] += ds.images[i * P + j];
  }
  for (std::size_t c = 0; c < K; ++c) {
    for (std::size_t j = 0; j < P; ++j) mu[c * P + j] /= static_cast<double>(counts[c]);
  }
  double best = INFINITY;
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = a + 1; b < K; ++b) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < P; ++j) d2 += (mu[a * P + j] - mu[b * P + j]) * (mu[a * P + j] - mu[b * P + j]);
      best = std::min(best, std::sqrt(d2));
    }
  }
  return best;
}

// --- gen-data ------------------------------------------------------------------

struct GenDataArgs {
  std::uint64_t seed = 0;
  std::size_t classes = 8;
  std::size_t per_class_train = 200;
  std::size_t per_class_test = 50;
  std::size_t side = 24;
  double contrast = 1.0;
  std::string out;
};

void add_gen_data(Command& c, GenDataArgs& a) {
  c.option("seed", a.seed, "generation seed");
  c.option("classes", a.classes, "number of classes")->check(CLI::Range(2, 65535));
  c.option("per-class-train", a.per_class_train, "train samples per class")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  c.option("per-class-test", a.per_class_test, "test samples per class")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  c.option("side", a.side, "image side in pixels")->check(CLI::Range(8, 1024));
  c.option("contrast", a.contrast, "template contrast scale")->check(CLI::PositiveNumber);
  c.option("out", a.out, "output directory", false)->required();
}

void gen_data(const GenDataArgs& a, const Command& c, std::ostream& out) {
  data::SyntheticSpec spec;
  spec.seed = a.seed;
  spec.num_classes = a.classes;
  spec.per_class_train = a.per_class_train;
  spec.per_class_test = a.per_class_test;
  spec.side = a.side;
  spec.contrast = a.contrast;
  const auto [train_set, test_set] = data::generate_synthetic(spec);

  const fs::path dir = prepare_dir(a.out);
  json files = json::array();
  for (const auto* ds : {&train_set, &test_set}) {
    const std::string name = std::string(data::split_name(ds->split)) + ".uapdata";
    const auto bytes = data::encode_dataset(*ds);
    io::write_file(dir / name, bytes);
    files.push_back({{"split", data::split_name(ds->split)},
                     {"path", name},
                     {"samples", ds->size()},
                     {"bytes", bytes.size()},
                     {"crc32", io::crc32(bytes.data(), bytes.size())}});
  }
  json manifest = {{"format", "UAPDATA1"},
                   {"seed", a.seed},
                   {"num_classes", a.classes},
                   {"per_class_train", a.per_class_train},
                   {"per_class_test", a.per_class_test},
                   {"side", a.side},
                   {"contrast", a.contrast},
                   {"noise_sigma", data::kNoiseSigma},
                   {"min_class_mean_distance", min_class_mean_distance(train_set)},
                   {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "gen-data.resolved.cfg", c.resolved_text());
  out << "wrote " << train_set.size() << " train and " << test_set.size() << " test images to "
      << dir.string() << "\n";
}

// --- train -----------------------------------------------------------------------

struct TrainArgs {
  std::string train;
  std::string test;
  std::string arch = "convnet";
  std::size_t epochs = 0;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  std::string out;
  std::string name;
};

void add_train(Command& c, TrainArgs& a) {
  c.option("train", a.train, "training split (.uapdata)", false)->required();
  c.option("test", a.test, "test split for per-epoch accuracy (.uapdata)", false);
  c.option("arch", a.arch, "architecture")->check(CLI::IsMember({"convnet", "mlp", "attnnet"}));
  c.option("epochs", a.epochs, "epochs (default: the architecture's recipe)")
      ->default_str("recipe")
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  c.option("batch-size", a.batch_size, "minibatch size")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  c.option("lr", a.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  c.option("weight-decay", a.weight_decay, "L2 weight decay")->check(CLI::NonNegativeNumber);
  c.option("seed", a.seed, "initialization and shuffle seed");
  c.option("out", a.out, "output directory", false)->required();
  c.option("name", a.name, "file stem (default: the architecture tag)");
}

void train_cmd(TrainArgs& a, const Command& c, std::ostream& out) {
  const nn::Arch arch = nn::parse_arch(a.arch);
  train::TrainConfig cfg = train::default_recipe(arch);
  if (c.given("epochs")) cfg.epochs = a.epochs;
  a.epochs = cfg.epochs;
  cfg.batch_size = a.batch_size;
  cfg.learning_rate = a.lr;
  cfg.weight_decay = a.weight_decay;
  cfg.seed = a.seed;
  if (a.name.empty()) a.name = a.arch;

  const data::LabeledDataset train_set = data::load_dataset(a.train);
  std::optional<data::LabeledDataset> test_set;
  if (!a.test.empty()) test_set = data::load_dataset(a.test);

  nn::Model model = nn::Model::build(arch, train_set.num_classes, a.seed, train_set.sample_shape());
  const auto history =
      train::train(model, train_set, cfg, test_set ? &*test_set : nullptr);

  const fs::path dir = prepare_dir(a.out);
  nn::save_checkpoint(model, dir / (a.name + ".uapckpt"));
  train::write_history_csv(dir / (a.name + ".history.csv"), history);
  write_text(dir / (a.name + ".resolved.cfg"), c.resolved_text());
  const auto& rec = *model.training();
  out << a.name << ": train_accuracy " << io::format_real(rec.train_accuracy);
  if (test_set) out << " test_accuracy " << io::format_real(rec.test_accuracy);
  out << "\n";
}

// --- attack ------------------------------------------------------------------------

struct AttackArgs {
  std::string model;
  std::string data;
  std::string method = "fg";
  std::string mode = "untargeted";
  std::size_t target_class = 0;
  std::string xi = "10/255";
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double lr = 0.02;
  std::uint64_t seed = 0;
  bool augment = false;
  std::size_t per_class = 0;
  std::string out;
  std::string name;
};

void add_attack_params(Command& c, std::string& xi, std::size_t& batch, std::size_t& epochs,
                       double& lr, std::uint64_t& seed) {
  c.option("xi", xi, "L-infinity budget, a number or a fraction like 10/255");
  c.option("batch-size", batch, "attack batch size")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  c.option("epochs", epochs, "attack epochs")->check(CLI::Range(std::size_t{0}, std::size_t{100000}));
  c.option("lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
  c.option("seed", seed, "shuffle and probe seed");
}

void add_attack(Command& c, AttackArgs& a) {
  c.option("model", a.model, "surrogate checkpoint (.uapckpt)", false)->required();
  c.option("data", a.data, "images to craft on (.uapdata)", false)->required();
  c.option("method", a.method, "loss")->check(CLI::IsMember({"fg", "logit-cosine"}));
  c.option("mode", a.mode, "attack mode")->check(CLI::IsMember({"untargeted", "targeted"}));
  c.option("target-class", a.target_class, "target class for --mode targeted", false);
  add_attack_params(c, a.xi, a.batch_size, a.epochs, a.lr, a.seed);
  c.flag("augment", a.augment, "random rotation and flip of every batch");
  c.option("per-class", a.per_class, "craft on this many images per class (0: all)");
  c.option("out", a.out, "output directory", false)->required();
  c.option("name", a.name, "file stem (default: <model>.<method>[.t<class>])");
}

attack::AttackConfig attack_config(const std::string& xi, std::size_t batch, std::size_t epochs,
                                   double lr, std::uint64_t seed) {
  attack::AttackConfig cfg;
  cfg.xi = parse_budget(xi);
  if (!(cfg.xi >= 0.0)) throw UsageError("--xi must be non-negative");
  cfg.batch_size = batch;
  cfg.epochs = epochs;
  cfg.learning_rate = lr;
  cfg.seed = seed;
  return cfg;
}

void attack_cmd(AttackArgs& a, const Command& c, std::ostream& out) {
  const bool targeted = a.mode == "targeted";
  if (targeted && !c.given("target-class")) {
    throw UsageError("--mode targeted requires --target-class");
  }
  if (!targeted && c.given("target-class")) {
    throw UsageError("--target-class is only valid with --mode targeted");
  }
  attack::AttackConfig cfg = attack_config(a.xi, a.batch_size, a.epochs, a.lr, a.seed);
  if (targeted) cfg.target = a.target_class;
  cfg.augment = a.augment;
  const attack::Method method = attack::parse_method(a.method);

  const std::string surrogate = fs::path(a.model).stem().string();
  if (a.name.empty()) {
    a.name = surrogate + "." + a.method + (targeted ? ".t" + std::to_string(a.target_class) : "");
  }

  const nn::Model model = nn::load_checkpoint(a.model);
  data::LabeledDataset ds = data::load_dataset(a.data);
  if (a.per_class > 0) ds = data::subsample_per_class(ds, a.per_class, a.seed);

  const attack::AttackResult res = attack::craft(method, model, ds, cfg, surrogate);

  const fs::path dir = prepare_dir(a.out);
  attack::save_perturbation(res.perturbation, dir / (a.name + ".uappert"));
  json log = {{"surrogate", surrogate},
              {"method", a.method},
              {"mode", a.mode},
              {"target_class", targeted ? json(a.target_class) : json(nullptr)},
              {"xi", cfg.xi},
              {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs},
              {"learning_rate", cfg.learning_rate},
              {"seed", cfg.seed},
              {"augment", cfg.augment},
              {"per_class", a.per_class},
              {"samples", ds.size()},
              {"steps", res.steps},
              {"epoch_loss", res.epoch_loss}};
  write_text(dir / (a.name + ".attack.json"), log.dump(2) + "\n");
  write_text(dir / (a.name + ".resolved.cfg"), c.resolved_text());
  out << a.name << ": " << res.steps << " steps";
  if (!res.epoch_loss.empty()) out << ", final loss " << io::format_real(res.epoch_loss.back());
  out << "\n";
}

// --- eval ----------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string perturbation;
  std::string data;
  std::string out;
  std::string name = "report";
};

void add_eval(Command& c, EvalArgs& a) {
  c.option("model", a.model, "victim checkpoint (.uapckpt)", false)->required();
  c.option("perturbation", a.perturbation, "perturbation (.uappert)", false)->required();
  c.option("data", a.data, "evaluation split (.uapdata)", false)->required();
  c.option("out", a.out, "output directory", false)->required();
  c.option("name", a.name, "report file stem");
}

void eval_cmd(const EvalArgs& a, const Command& c, std::ostream& out) {
  const nn::Model model = nn::load_checkpoint(a.model);
  const attack::Perturbation p = attack::load_perturbation(a.perturbation);
  const data::LabeledDataset ds = data::load_dataset(a.data);
  const report::EvalReport r = report::evaluate(
      model, ds, p,
      {fs::path(a.model).filename().string(), fs::path(a.perturbation).filename().string(),
       fs::path(a.data).filename().string()});
  const json doc = report::to_json(r);
  report::validate_report_json(doc);

  const fs::path dir = prepare_dir(a.out);
  write_text(dir / (a.name + ".json"), doc.dump(2) + "\n");
  write_text(dir / (a.name + ".resolved.cfg"), c.resolved_text());
  out << "fooling_ratio " << io::format_real(r.fooling_ratio) << " d1 " << io::format_real(r.d1)
      << "\n";
}

// --- transfer ------------------------------------------------------------------------------

struct TransferArgs {
  std::string models;
  std::string perturbations;
  std::string data;
  std::string out;
};

void add_transfer(Command& c, TransferArgs& a) {
  c.option("models", a.models, "directory of victim checkpoints", false)->required();
  c.option("perturbations", a.perturbations, "directory of perturbations", false)->required();
  c.option("data", a.data, "evaluation split (.uapdata)", false)->required();
  c.option("out", a.out, "output directory", false)->required();
}

void transfer_cmd(const TransferArgs& a, const Command& c, std::ostream& out) {
  const auto model_files = files_with_extension(a.models, ".uapckpt");
  const auto pert_files = files_with_extension(a.perturbations, ".uappert");
  const data::LabeledDataset ds = data::load_dataset(a.data);

  std::vector<nn::Model> models;
  std::vector<std::string> victims;
  for (const auto& f : model_files) {
    models.push_back(nn::load_checkpoint(f));
    victims.push_back(f.stem().string());
  }
  std::vector<attack::Perturbation> perts;
  std::vector<std::string> surrogates;
  for (const auto& f : pert_files) {
    perts.push_back(attack::load_perturbation(f));
    surrogates.push_back(perts.back().surrogate.empty() ? f.stem().string()
                                                        : perts.back().surrogate);
  }
  std::vector<const nn::Classifier*> handles;
  for (const auto& m : models) handles.push_back(&m);
  const auto fr = analysis::transfer_matrix(handles, perts, ds);

  const fs::path dir = prepare_dir(a.out);
  write_text(dir / "transfer.csv", report::transfer_csv(surrogates, victims, fr));
  write_text(dir / "transfer.resolved.cfg", c.resolved_text());
  out << surrogates.size() << "x" << victims.size() << " transfer matrix written\n";
}

// --- redundancy -------------------------------------------------------------------------------

struct RedundancyArgs {
  std::string model;
  std::string train;
  std::string test;
  std::string counts = "50,20,10,5,2,1";
  std::string xi = "10/255";
  std::size_t batch_size = 32;
  // Smaller sets converge better with a gentler, longer schedule.
  std::size_t epochs = 20;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::uint64_t subsample_seed = 0;
  std::string out;
};

void add_redundancy(Command& c, RedundancyArgs& a) {
  c.option("model", a.model, "surrogate checkpoint (.uapckpt)", false)->required();
  c.option("train", a.train, "split to subsample and craft on (.uapdata)", false)->required();
  c.option("test", a.test, "split to score on (.uapdata)", false)->required();
  c.option("counts", a.counts, "strictly descending images per class, comma-separated");
  add_attack_params(c, a.xi, a.batch_size, a.epochs, a.lr, a.seed);
  c.option("subsample-seed", a.subsample_seed, "seed of the per-class draw");
  c.option("out", a.out, "output directory", false)->required();
}

void redundancy_cmd(const RedundancyArgs& a, const Command& c, std::ostream& out) {
  const auto counts = parse_counts(a.counts);
  const attack::AttackConfig cfg = attack_config(a.xi, a.batch_size, a.epochs, a.lr, a.seed);
  const nn::Model model = nn::load_checkpoint(a.model);
  const data::LabeledDataset train_set = data::load_dataset(a.train);
  const data::LabeledDataset test_set = data::load_dataset(a.test);
  const auto res =
      analysis::redundancy_sweep(model, train_set, test_set, counts, cfg, a.subsample_seed);

  const fs::path dir = prepare_dir(a.out);
  write_text(dir / "redundancy.csv", report::redundancy_csv(res));
  write_text(dir / "redundancy.resolved.cfg", c.resolved_text());
  out << "full-set fooling_ratio " << io::format_real(res.full_fooling_ratio) << "\n";
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app("Feature-gathering universal adversarial perturbations at desk scale", "fguap");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path;
  Command gen{app.add_subcommand("gen-data", "generate the synthetic train/test splits")};
  Command trn{app.add_subcommand("train", "train a victim classifier")};
  Command atk{app.add_subcommand("attack", "craft a universal perturbation")};
  Command evl{app.add_subcommand("eval", "evaluate a perturbation against a model")};
  Command trf{app.add_subcommand("transfer", "cross-model fooling-ratio matrix")};
  Command red{app.add_subcommand("redundancy", "fooling ratio versus images per class")};
  GenDataArgs gen_args;
  TrainArgs trn_args;
  AttackArgs atk_args;
  EvalArgs evl_args;
  TransferArgs trf_args;
  RedundancyArgs red_args;
  add_gen_data(gen, gen_args);
  add_train(trn, trn_args);
  add_attack(atk, atk_args);
  add_eval(evl, evl_args);
  add_transfer(trf, trf_args);
  add_redundancy(red, red_args);

  const std::map<std::string, Command*> commands = {
      {"gen-data", &gen}, {"train", &trn},    {"attack", &atk},
      {"eval", &evl},     {"transfer", &trf}, {"redundancy", &red}};
  for (const auto& [name, cmd] : commands) {
    cmd->app->add_option("--config", config_path, "key: value file; flags override it");
  }

  try {
    std::vector<std::string> argv = expand_config(args, commands);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    // Help requests come through here with exit code 0.
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen.app) gen_data(gen_args, gen, out);
    if (*trn.app) train_cmd(trn_args, trn, out);
    if (*atk.app) attack_cmd(atk_args, atk, out);
    if (*evl.app) eval_cmd(evl_args, evl, out);
    if (*trf.app) transfer_cmd(trf_args, trf, out);
    if (*red.app) redundancy_cmd(red_args, red, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace fguap::cli
