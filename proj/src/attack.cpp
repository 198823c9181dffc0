#include "fguap/attack.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fguap/adam.hpp"
#include "fguap/binary_io.hpp"
#include "fguap/errors.hpp"
#include "fguap/ops.hpp"
#include "fguap/rng.hpp"

namespace fguap::attack {

namespace {

using Kind = FormatError::Kind;
constexpr std::string_view kMagic = "UAPPERT1";
// Keeps augmentation draws independent of the shuffle stream.
constexpr std::uint64_t kAugmentStream = 0xa06;
// cos(h, h) is a maximum, so the loss gradient at delta = 0 is rounding residue
// far below Adam's epsilon. The first gradient is taken at a seeded sign
// pattern of this relative size instead; delta itself still starts at zero.
constexpr double kProbeScale = 1e-3;

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kFeatureGathering: return "fg";
    case Method::kLogitCosine: return "logit-cosine";
  }
  return "unknown";
}

Method parse_method(std::string_view tag) {
  if (tag == "fg") return Method::kFeatureGathering;
  if (tag == "logit-cosine") return Method::kLogitCosine;
  throw ArgumentError("unknown attack method '" + std::string(tag) +
                      "' (valid: fg, logit-cosine)");
}

void AttackConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("attack batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("attack learning rate must be > 0");
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw ArgumentError("budget xi must be >= 0");
}

void Perturbation::validate() const {
  if (delta.rank() != 3) {
    throw ArgumentError("perturbation must be [C,H,W], got " + shape_string(delta.dims()));
  }
  if (!(xi >= 0.0) || !std::isfinite(xi)) {
    throw ArgumentError("perturbation budget must be finite and >= 0");
  }
  if (!delta.all_finite()) throw ArgumentError("perturbation holds non-finite values");
  if (delta.max_abs() > xi) {
    throw ArgumentError("perturbation violates its budget: max |delta| = " +
                        io::format_real(delta.max_abs()) + " > xi = " + io::format_real(xi));
  }
}

Perturbation zero_perturbation(const Shape& sample_shape, double xi) {
  Perturbation p;
  p.delta = Tensor(sample_shape);
  p.xi = xi;
  p.surrogate = "none";
  return p;
}

Perturbation uniform_random_perturbation(const Shape& sample_shape, double xi,
                                         std::uint64_t seed) {
  Perturbation p = zero_perturbation(sample_shape, xi);
  Rng rng(seed);
  for (double& v : p.delta.data()) v = std::clamp(rng.uniform(-xi, xi), -xi, xi);
  p.seed = seed;
  return p;
}

ad::Var fg_loss(const ad::Var& h, const ad::Var& h_adv) {
  if (h.value().rank() == 1) return ad::cosine_similarity(h, h_adv);
  return ad::mean(ad::cosine_similarity_rows(h, h_adv));
}

ad::Var targeted_fg_loss(const ad::Var& h, const ad::Var& h_adv, const ad::Var& logits_adv,
                         std::size_t target) {
  const Tensor& logits = logits_adv.value();
  const std::size_t K = logits.dims().back();
  if (target >= K) {
    throw ArgumentError("target class " + std::to_string(target) + " out of range for " +
                        std::to_string(K) + " classes");
  }
  if (logits.rank() == 1) {
    const std::size_t idx[1] = {target};
    ad::Var row = ad::reshape(logits_adv, {1, K});
    return ad::sub(fg_loss(h, h_adv), ad::reshape(ad::pick(row, idx), {}));
  }
  const std::vector<std::size_t> idx(logits.dim(0), target);
  return ad::sub(fg_loss(h, h_adv), ad::mean(ad::pick(logits_adv, idx)));
}

namespace {

Tensor augment_batch(const Tensor& batch, std::span<const std::size_t> idx, std::uint64_t seed,
                     std::size_t epoch) {
  Tensor out = batch;
  const std::size_t stride = batch.size() / batch.dim(0);
  const Shape sample{batch.dim(1), batch.dim(2), batch.dim(3)};
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto src = batch.data().subspan(b * stride, stride);
    const data::Image img(Tensor(sample, std::vector<double>(src.begin(), src.end())));
    const auto aug = data::augment(
        img, Rng::derive(Rng::derive(seed, kAugmentStream), epoch, idx[b]));
    std::copy(aug.pixels().data().begin(), aug.pixels().data().end(),
              out.data().begin() + b * stride);
  }
  return out;
}

Tensor probe_pattern(const Shape& dims, double scale, std::uint64_t seed) {
  Tensor out(dims);
  Rng rng(Rng::derive(seed, 0));
  for (double& v : out.data()) v = rng.uniform() < 0.5 ? -scale : scale;
  return out;
}

Tensor rows(const Tensor& t, std::span<const std::size_t> idx) {
  const std::size_t width = t.dim(1);
  Tensor out({idx.size(), width});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    std::copy_n(t.data().begin() + idx[b] * width, width, out.data().begin() + b * width);
  }
  return out;
}

}  // namespace

AttackResult craft(Method method, const nn::Classifier& m, const data::LabeledDataset& ds,
                   const AttackConfig& cfg, std::string surrogate,
                   const StepObserver& observer) {
  cfg.validate();
  if (ds.size() == 0) throw ArgumentError("attack dataset is empty");
  nn::check_input(m, ds.images);
  if (cfg.target && *cfg.target >= m.num_classes()) {
    throw ArgumentError("target class " + std::to_string(*cfg.target) + " out of range for " +
                        std::to_string(m.num_classes()) + " classes");
  }

  const bool use_logits = method == Method::kLogitCosine;
  const double xi = cfg.xi;
  Tensor delta(m.input_shape());
  AdamState adam(delta.dims());

  // Clean-side vectors never change unless the inputs are augmented.
  Tensor clean_all;
  if (!cfg.augment) {
    nn::Outputs out = nn::forward_with_features(m, ds.images);
    clean_all = use_logits ? std::move(out.logits) : std::move(out.features);
  }

  AttackResult result;
  const std::size_t N = ds.size();
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  ad::Tape tape;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(Rng::derive(cfg.seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < N; start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, N - start);
      const std::span<const std::size_t> idx(order.data() + start, n);

      Tensor x = ds.batch(idx);
      Tensor clean;
      if (cfg.augment) {
        x = augment_batch(x, idx, cfg.seed, epoch);
        nn::Outputs out = nn::forward_with_features(m, x);
        clean = use_logits ? std::move(out.logits) : std::move(out.features);
      } else {
        clean = rows(clean_all, idx);
      }

      tape.clear();
      ad::Var d = tape.variable(result.steps == 0
                                    ? probe_pattern(delta.dims(), kProbeScale * xi, cfg.seed)
                                    : delta);
      ad::Var x_adv = ad::add_per_sample(tape.constant(std::move(x)), d);
      const nn::ForwardResult r = m.forward(tape, x_adv, false);
      ad::Var adv = use_logits ? r.logits : r.features;
      ad::Var loss = cfg.target
                         ? targeted_fg_loss(tape.constant(std::move(clean)), adv, r.logits,
                                            *cfg.target)
                         : fg_loss(tape.constant(std::move(clean)), adv);
      tape.backward(loss);

      delta = adam_step(delta, d.grad(), adam, cfg.learning_rate);
      // "+ 0.0" folds a clamped -0.0 into +0.0 so xi = 0 yields an all-zero file.
      for (double& v : delta.data()) v = std::clamp(v, -xi, xi) + 0.0;
      if (delta.max_abs() > xi) throw std::logic_error("perturbation escaped its budget");

      loss_sum += loss.value().item() * static_cast<double>(n);
      ++result.steps;
      if (observer) observer(result.steps, delta);
    }
    const double epoch_loss = loss_sum / static_cast<double>(N);
    if (!std::isfinite(epoch_loss)) {
      throw NonFiniteError("attack loss became non-finite in epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(epoch_loss);
  }

  result.perturbation.delta = std::move(delta);
  result.perturbation.xi = xi;
  result.perturbation.method = method;
  result.perturbation.target = cfg.target;
  result.perturbation.surrogate = std::move(surrogate);
  result.perturbation.seed = cfg.seed;
  return result;
}

AttackResult craft_uap(const nn::Classifier& m, const data::LabeledDataset& ds,
                       const AttackConfig& cfg, std::string surrogate,
                       const StepObserver& observer) {
  return craft(Method::kFeatureGathering, m, ds, cfg, std::move(surrogate), observer);
}

AttackResult craft_logit_cosine_baseline(const nn::Classifier& m,
                                         const data::LabeledDataset& ds,
                                         const AttackConfig& cfg, std::string surrogate,
                                         const StepObserver& observer) {
  return craft(Method::kLogitCosine, m, ds, cfg, std::move(surrogate), observer);
}

Tensor apply(const Perturbation& p, const Tensor& batch) {
  const Shape& s = p.delta.dims();
  if (batch.rank() != s.size() + 1 || !std::equal(s.begin(), s.end(), batch.dims().begin() + 1)) {
    throw ShapeError("perturbation " + shape_string(s) + " does not fit batch " +
                     shape_string(batch.dims()));
  }
  Tensor out = batch;
  const std::size_t stride = p.delta.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i] + p.delta[i % stride], 0.0, 1.0);
  }
  return out;
}

data::Image apply(const Perturbation& p, const data::Image& x) {
  require_same_shape(p.delta, x.pixels(), "apply");
  Tensor out = x.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i] + p.delta[i], 0.0, 1.0);
  }
  return data::Image(std::move(out));
}

std::vector<std::uint8_t> encode_perturbation(const Perturbation& p) {
  p.validate();
  io::Container c;
  c.metadata["method"] = std::string(method_name(p.method));
  c.metadata["mode"] = p.targeted() ? "targeted" : "untargeted";
  if (p.target) c.metadata["target"] = std::to_string(*p.target);
  c.metadata["xi"] = io::format_real(p.xi);
  c.metadata["surrogate"] = p.surrogate;
  c.metadata["seed"] = std::to_string(p.seed);
  c.tensors.push_back({"delta", p.delta});
  return io::encode_container(kMagic, c);
}

void save_perturbation(const Perturbation& p, const std::filesystem::path& path) {
  io::write_file(path, encode_perturbation(p));
}

Perturbation decode_perturbation(const std::vector<std::uint8_t>& bytes) {
  io::Container c = io::decode_container(kMagic, bytes, "perturbation");
  const auto& meta = c.metadata;
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw FormatError(Kind::kMalformedHeader, "perturbation metadata lacks '" + key + "'");
    }
    return it->second;
  };
  auto to_uint = [&](const std::string& key) {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw FormatError(Kind::kMalformedHeader, "perturbation '" + key + "' is not an integer");
    }
    return v;
  };

  if (c.tensors.size() != 1) {
    throw FormatError(Kind::kTensorCount, "perturbation file holds " +
                                              std::to_string(c.tensors.size()) +
                                              " tensors, expected 1");
  }
  if (c.tensors[0].name != "delta") {
    throw FormatError(Kind::kTensorShape, "perturbation tensor is named '" + c.tensors[0].name +
                                              "', expected 'delta'");
  }
  Perturbation p;
  try {
    p.method = parse_method(get("method"));
    p.xi = io::parse_real(get("xi"));
  } catch (const ArgumentError& e) {
    throw FormatError(Kind::kMalformedHeader, e.what());
  }
  const std::string& mode = get("mode");
  if (mode == "targeted") {
    p.target = to_uint("target");
  } else if (mode != "untargeted") {
    throw FormatError(Kind::kMalformedHeader, "unknown perturbation mode '" + mode + "'");
  }
  p.surrogate = get("surrogate");
  p.seed = to_uint("seed");
  p.delta = std::move(c.tensors[0].tensor);
  try {
    p.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(Kind::kValidation, e.what());
  }
  return p;
}

Perturbation load_perturbation(const std::filesystem::path& path) {
  return decode_perturbation(io::read_file(path));
}

}  // namespace fguap::attack
