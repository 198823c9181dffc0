#include <charconv>
#include <string>

#include "fguap/binary_io.hpp"
#include "fguap/errors.hpp"
#include "fguap/model.hpp"

namespace fguap::nn {

namespace {

using Kind = FormatError::Kind;
constexpr std::string_view kMagic = "UAPCKPT1";

std::string join_shape(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

std::uint64_t parse_uint(const io::Metadata& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) {
    throw FormatError(Kind::kMalformedHeader, "checkpoint metadata lacks '" + key + "'");
  }
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(Kind::kMalformedHeader, "checkpoint metadata '" + key +
                                                  "' is not an integer: '" + s + "'");
  }
  return v;
}

double parse_meta_real(const io::Metadata& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) {
    throw FormatError(Kind::kMalformedHeader, "checkpoint metadata lacks '" + key + "'");
  }
  try {
    return io::parse_real(it->second);
  } catch (const ArgumentError& e) {
    throw FormatError(Kind::kMalformedHeader, e.what());
  }
}

Shape parse_shape(const std::string& text) {
  Shape s;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('x', pos), text.size());
    std::size_t v = 0;
    const auto res = std::from_chars(text.data() + pos, text.data() + end, v);
    if (res.ec != std::errc{} || res.ptr != text.data() + end || v == 0) {
      throw FormatError(Kind::kMalformedHeader, "bad input_shape '" + text + "'");
    }
    s.push_back(v);
    pos = end + 1;
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& m) {
  io::Container c;
  c.metadata["arch"] = std::string(arch_name(m.arch()));
  c.metadata["num_classes"] = std::to_string(m.num_classes());
  c.metadata["feature_dim"] = std::to_string(m.feature_dim());
  c.metadata["input_shape"] = join_shape(m.input_shape());
  c.metadata["init_seed"] = std::to_string(m.init_seed());
  if (const auto& t = m.training()) {
    c.metadata["train.epochs"] = std::to_string(t->epochs);
    c.metadata["train.batch_size"] = std::to_string(t->batch_size);
    c.metadata["train.learning_rate"] = io::format_real(t->learning_rate);
    c.metadata["train.weight_decay"] = io::format_real(t->weight_decay);
    c.metadata["train.seed"] = std::to_string(t->seed);
    c.metadata["train.train_accuracy"] = io::format_real(t->train_accuracy);
    c.metadata["train.test_accuracy"] = io::format_real(t->test_accuracy);
  }
  for (const auto& [name, tensor] : m.parameters()) c.tensors.push_back({name, *tensor});
  return io::encode_container(kMagic, c);
}

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(m));
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::optional<Arch> expected) {
  const io::Container c = io::decode_container(kMagic, bytes, "checkpoint");
  const auto& meta = c.metadata;

  const auto arch_it = meta.find("arch");
  if (arch_it == meta.end()) {
    throw FormatError(Kind::kMalformedHeader, "checkpoint metadata lacks 'arch'");
  }
  Arch arch;
  try {
    arch = parse_arch(arch_it->second);
  } catch (const ArgumentError& e) {
    throw FormatError(Kind::kMalformedHeader, e.what());
  }
  if (expected && *expected != arch) {
    throw FormatError(Kind::kArchitectureMismatch,
                      "checkpoint holds a " + std::string(arch_name(arch)) + ", expected " +
                          std::string(arch_name(*expected)));
  }
  const std::size_t K = parse_uint(meta, "num_classes");
  const auto in_it = meta.find("input_shape");
  if (in_it == meta.end()) {
    throw FormatError(Kind::kMalformedHeader, "checkpoint metadata lacks 'input_shape'");
  }
  Model m = [&] {
    try {
      return Model::build(arch, K, parse_uint(meta, "init_seed"), parse_shape(in_it->second));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(Kind::kMalformedHeader, e.what());
    }
  }();

  auto params = m.parameters();
  if (params.size() != c.tensors.size()) {
    throw FormatError(Kind::kTensorCount, "checkpoint has " + std::to_string(c.tensors.size()) +
                                              " tensors, " + std::string(arch_name(arch)) +
                                              " needs " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, dst] = params[i];
    const auto& src = c.tensors[i];
    if (src.name != name) {
      throw FormatError(Kind::kTensorShape,
                        "tensor " + std::to_string(i) + " is '" + src.name + "', expected '" +
                            name + "'");
    }
    if (src.tensor.dims() != dst->dims()) {
      throw FormatError(Kind::kTensorShape, "tensor '" + name + "' has dims " +
                                                shape_string(src.tensor.dims()) + ", expected " +
                                                shape_string(dst->dims()));
    }
    *dst = src.tensor;
  }

  if (meta.contains("train.epochs")) {
    TrainingRecord t;
    t.epochs = parse_uint(meta, "train.epochs");
    t.batch_size = parse_uint(meta, "train.batch_size");
    t.learning_rate = parse_meta_real(meta, "train.learning_rate");
    t.weight_decay = parse_meta_real(meta, "train.weight_decay");
    t.seed = parse_uint(meta, "train.seed");
    t.train_accuracy = parse_meta_real(meta, "train.train_accuracy");
    t.test_accuracy = parse_meta_real(meta, "train.test_accuracy");
    m.set_training(t);
  }
  return m;
}

Model load_checkpoint(const std::filesystem::path& path, std::optional<Arch> expected) {
  return decode_checkpoint(io::read_file(path), expected);
}

}  // namespace fguap::nn
