#include "fguap/model.hpp"

#include <algorithm>
#include <cmath>

#include "fguap/errors.hpp"
#include "fguap/ops.hpp"
#include "fguap/rng.hpp"

namespace fguap::nn {

namespace {

constexpr std::size_t kPatch = 4;
constexpr std::size_t kTokenWidth = 32;
constexpr std::size_t kMlpHidden = 128;
constexpr std::size_t kInferenceChunk = 256;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor he_uniform(Shape dims, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(dims));
    for (double& v : t.data()) v = rng_.uniform(-bound, bound);
    return t;
  }

  Linear linear(std::size_t in, std::size_t out) {
    return Linear{he_uniform({out, in}, in), Tensor({out})};
  }

  Conv2d conv(std::size_t in_ch, std::size_t out_ch, std::size_t k) {
    return Conv2d{he_uniform({out_ch, in_ch, k, k}, in_ch * k * k), Tensor({out_ch}), 1,
                  k / 2};
  }

 private:
  Rng rng_;
};

}  // namespace

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kConvNet: return "convnet";
    case Arch::kMlp: return "mlp";
    case Arch::kAttnNet: return "attnnet";
  }
  return "unknown";
}

Arch parse_arch(std::string_view tag) {
  if (tag == "convnet") return Arch::kConvNet;
  if (tag == "mlp") return Arch::kMlp;
  if (tag == "attnnet") return Arch::kAttnNet;
  throw ArgumentError("unknown architecture '" + std::string(tag) +
                      "' (valid: convnet, mlp, attnnet)");
}

Model::Model(Arch arch, std::size_t num_classes, Shape input_shape, std::vector<Layer> body,
             Linear head, std::uint64_t init_seed)
    : arch_(arch),
      num_classes_(num_classes),
      input_shape_(std::move(input_shape)),
      body_(std::move(body)),
      head_(std::move(head)),
      init_seed_(init_seed) {
  if (head_.weight.rank() != 2 || head_.weight.dim(0) != num_classes_ ||
      head_.bias.dims() != Shape{num_classes_}) {
    throw ShapeError("head " + shape_string(head_.weight.dims()) +
                     " inconsistent with " + std::to_string(num_classes_) + " classes");
  }
}

Model Model::build(Arch arch, std::size_t num_classes, std::uint64_t seed,
                   Shape input_shape) {
  if (num_classes < 2) throw ArgumentError("model needs at least 2 classes");
  if (input_shape.size() != 3) {
    throw ShapeError("input shape must be [C,H,W], got " + shape_string(input_shape));
  }
  const std::size_t C = input_shape[0], H = input_shape[1], W = input_shape[2];
  Initializer init(seed);
  std::vector<Layer> body;
  switch (arch) {
    case Arch::kConvNet: {
      if (H < 4 || W < 4) throw ShapeError("convnet needs inputs of at least 4x4");
      body.emplace_back(init.conv(C, 8, 3));
      body.emplace_back(ReLU{});
      body.emplace_back(MaxPool2d{2});
      body.emplace_back(init.conv(8, 16, 3));
      body.emplace_back(ReLU{});
      body.emplace_back(MaxPool2d{2});
      body.emplace_back(Flatten{});
      body.emplace_back(init.linear(16 * (H / 4) * (W / 4), kFeatureDim));
      body.emplace_back(ReLU{});
      break;
    }
    case Arch::kMlp: {
      body.emplace_back(Flatten{});
      body.emplace_back(init.linear(C * H * W, kMlpHidden));
      body.emplace_back(ReLU{});
      body.emplace_back(init.linear(kMlpHidden, kFeatureDim));
      body.emplace_back(ReLU{});
      break;
    }
    case Arch::kAttnNet: {
      if (H % kPatch != 0 || W % kPatch != 0) {
        throw ShapeError("attnnet needs sides divisible by " + std::to_string(kPatch));
      }
      const std::size_t patch_dim = C * kPatch * kPatch;
      body.emplace_back(PatchEmbed{kPatch,
                                   init.he_uniform({kTokenWidth, patch_dim}, patch_dim),
                                   Tensor({kTokenWidth})});
      const Shape sq{kTokenWidth, kTokenWidth};
      SelfAttention attn;
      attn.wq = init.he_uniform(sq, kTokenWidth);
      attn.wk = init.he_uniform(sq, kTokenWidth);
      attn.wv = init.he_uniform(sq, kTokenWidth);
      attn.wo = init.he_uniform(sq, kTokenWidth);
      body.emplace_back(std::move(attn));
      body.emplace_back(MeanPool{});
      body.emplace_back(init.linear(kTokenWidth, kFeatureDim));
      body.emplace_back(ReLU{});
      break;
    }
  }
  Linear head = init.linear(kFeatureDim, num_classes);
  return Model(arch, num_classes, std::move(input_shape), std::move(body), std::move(head),
               seed);
}

std::vector<std::pair<std::string, const Tensor*>> Model::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (std::size_t i = 0; i < body_.size(); ++i) {
    const std::string p = std::to_string(i) + ".";
    std::visit(Overloaded{
                   [&](const Conv2d& l) {
                     out.emplace_back(p + "kernel", &l.kernel);
                     out.emplace_back(p + "bias", &l.bias);
                   },
                   [&](const Linear& l) {
                     out.emplace_back(p + "weight", &l.weight);
                     out.emplace_back(p + "bias", &l.bias);
                   },
                   [&](const PatchEmbed& l) {
                     out.emplace_back(p + "weight", &l.weight);
                     out.emplace_back(p + "bias", &l.bias);
                   },
                   [&](const SelfAttention& l) {
                     out.emplace_back(p + "wq", &l.wq);
                     out.emplace_back(p + "wk", &l.wk);
                     out.emplace_back(p + "wv", &l.wv);
                     out.emplace_back(p + "wo", &l.wo);
                   },
                   [](const auto&) {},
               },
               body_[i]);
  }
  out.emplace_back("head.weight", &head_.weight);
  out.emplace_back("head.bias", &head_.bias);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& [name, t] : std::as_const(*this).parameters()) {
    out.emplace_back(name, const_cast<Tensor*>(t));
  }
  return out;
}

ForwardResult Model::forward(ad::Tape& tape, const ad::Var& input, bool track_params) const {
  using namespace ad;
  if (input.value().rank() != 4 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), input.dims().begin() + 1)) {
    throw ShapeError("model expects [N," + shape_string(input_shape_).substr(1) +
                     " input, got " + shape_string(input.dims()));
  }
  ForwardResult res;
  auto bind = [&](const Tensor& t) {
    Var v = track_params ? tape.variable(t) : tape.constant(t);
    if (track_params) res.params.push_back(v);
    return v;
  };

  Var x = input;
  for (const Layer& layer : body_) {
    x = std::visit(
        Overloaded{
            [&](const Conv2d& l) {
              Var k = bind(l.kernel);
              Var b = bind(l.bias);
              return conv2d(x, k, b, l.stride, l.padding);
            },
            [&](const ReLU&) { return relu(x); },
            [&](const MaxPool2d& l) { return max_pool2d(x, l.window); },
            [&](const Flatten&) { return flatten(x); },
            [&](const Linear& l) {
              Var w = bind(l.weight);
              Var b = bind(l.bias);
              return linear(x, w, b);
            },
            [&](const PatchEmbed& l) {
              Var w = bind(l.weight);
              Var b = bind(l.bias);
              Var patches = patchify(x, l.patch);
              const std::size_t N = patches.dims()[0], P = patches.dims()[1];
              Var tokens = linear(reshape(patches, {N * P, patches.dims()[2]}), w, b);
              return reshape(tokens, {N, P, l.weight.dim(0)});
            },
            [&](const SelfAttention& l) {
              Var wq = bind(l.wq), wk = bind(l.wk), wv = bind(l.wv), wo = bind(l.wo);
              const std::size_t N = x.dims()[0], P = x.dims()[1], D = x.dims()[2];
              Var flat = reshape(x, {N * P, D});
              Var q = reshape(matmul(flat, wq), {N, P, D});
              Var k = reshape(matmul(flat, wk), {N, P, D});
              Var v = reshape(matmul(flat, wv), {N, P, D});
              Var scores = bmm(q, transpose_last2(k)) * (1.0 / std::sqrt(static_cast<double>(D)));
              Var weights = softmax(scores);
              res.attention.push_back(weights);
              Var mixed = reshape(bmm(weights, v), {N * P, D});
              return x + reshape(matmul(mixed, wo), {N, P, D});
            },
            [&](const MeanPool&) { return mean_pool(x); },
        },
        layer);
  }
  res.features = x;
  Var hw = bind(head_.weight);
  Var hb = bind(head_.bias);
  res.logits = linear(x, hw, hb);
  return res;
}

void check_input(const Classifier& m, const Tensor& x) {
  const Shape s = m.input_shape();
  if (x.rank() != s.size() + 1 || !std::equal(s.begin(), s.end(), x.dims().begin() + 1)) {
    throw ShapeError("input " + shape_string(x.dims()) + " does not match model input " +
                     shape_string(s));
  }
}

Outputs forward_with_features(const Classifier& m, const Tensor& x) {
  check_input(m, x);
  const std::size_t N = x.dim(0), stride = x.size() / N;
  const std::size_t K = m.num_classes(), d = m.feature_dim();
  Outputs out{Tensor({N, K}), Tensor({N, d})};
  ad::Tape tape;
  for (std::size_t start = 0; start < N; start += kInferenceChunk) {
    const std::size_t n = std::min(kInferenceChunk, N - start);
    Shape dims = x.dims();
    dims[0] = n;
    Tensor chunk(dims, std::vector<double>(x.data().begin() + start * stride,
                                           x.data().begin() + (start + n) * stride));
    tape.clear();
    const ForwardResult r = m.forward(tape, tape.constant(std::move(chunk)), false);
    std::copy_n(r.logits.value().data().begin(), n * K, out.logits.data().begin() + start * K);
    std::copy_n(r.features.value().data().begin(), n * d,
                out.features.data().begin() + start * d);
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> predict(const Classifier& m, const Tensor& x) {
  const Tensor logits = forward_with_features(m, x).logits;
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  std::vector<std::size_t> out(N);
  for (std::size_t n = 0; n < N; ++n) out[n] = argmax(logits.data().subspan(n * K, K));
  return out;
}

}  // namespace fguap::nn
