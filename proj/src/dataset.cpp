#include "fguap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "fguap/binary_io.hpp"
#include "fguap/errors.hpp"
#include "fguap/rng.hpp"

namespace fguap::data {

namespace {

constexpr char kMagic[] = "UAPDATA1";
constexpr std::size_t kMagicLen = 8;

// Smallest amplitudes that keep every pair of class means more than 10 noise
// sigmas apart on the default geometry.
constexpr double kGratingAmplitude = 0.057;
constexpr double kBlobAmplitude = 0.019;
constexpr double kGratingCycles = 2.5;

}  // namespace

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 3) {
    throw ArgumentError("image must be [C,H,W], got " + shape_string(pixels_.dims()));
  }
  for (double v : pixels_.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ArgumentError("image pixel outside [0,1]: " + std::to_string(v));
    }
  }
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kUnspecified: break;
  }
  return "unspecified";
}

Shape LabeledDataset::sample_shape() const {
  return {images.dim(1), images.dim(2), images.dim(3)};
}

Image LabeledDataset::image(std::size_t i) const {
  const std::size_t stride = images.size() / images.dim(0);
  const auto src = images.data().subspan(i * stride, stride);
  return Image(Tensor(sample_shape(), std::vector<double>(src.begin(), src.end())));
}

Tensor LabeledDataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t stride = images.size() / images.dim(0);
  Shape dims = images.dims();
  dims[0] = indices.size();
  Tensor out(dims);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw ArgumentError("batch index out of range");
    std::memcpy(out.data().data() + b * stride, images.data().data() + indices[b] * stride,
                stride * sizeof(double));
  }
  return out;
}

std::vector<std::size_t> LabeledDataset::labels_of(
    std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t l : labels) ++counts.at(l);
  return counts;
}

void LabeledDataset::validate() const {
  if (images.rank() != 4) {
    throw ArgumentError("dataset images must be [N,C,H,W], got " +
                        shape_string(images.dims()));
  }
  if (images.dim(0) != labels.size()) {
    throw ArgumentError("dataset has " + std::to_string(images.dim(0)) + " images but " +
                        std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 2) throw ArgumentError("dataset needs at least 2 classes");
  for (std::size_t l : labels) {
    if (l >= num_classes) {
      throw ArgumentError("label " + std::to_string(l) + " out of range for " +
                          std::to_string(num_classes) + " classes");
    }
  }
  for (double v : images.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("dataset pixel outside [0,1]");
  }
  if (split == Split::kTrain) {
    const auto counts = class_counts();
    if (std::find(counts.begin(), counts.end(), 0u) != counts.end()) {
      throw ArgumentError("train split is missing a class");
    }
  }
}

double template_value(std::size_t cls, std::size_t num_classes, std::size_t side,
                      double x, double y, double contrast) {
  using std::numbers::pi;
  const double s = static_cast<double>(side);
  const double k = static_cast<double>(num_classes);
  const double c = static_cast<double>(cls);

  // Oriented grating; orientation spreads over half a turn at a common
  // frequency so that no class is easier to tell apart than another.
  const double theta = pi * c / k;
  const double u = (x * std::cos(theta) + y * std::sin(theta)) / s;
  const double grating = kGratingAmplitude * std::sin(2.0 * pi * kGratingCycles * u + 0.7 * c);

  // Blob on a ring around the centre.
  const double phi = 2.0 * pi * c / k;
  const double bx = (s - 1.0) / 2.0 + 0.28 * s * std::cos(phi);
  const double by = (s - 1.0) / 2.0 + 0.28 * s * std::sin(phi);
  const double r = s / 8.0;
  const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
  const double blob = kBlobAmplitude * std::exp(-d2 / (2.0 * r * r));

  return std::clamp(0.45 + contrast * (grating + blob), 0.0, 1.0);
}

namespace {

LabeledDataset make_split(const SyntheticSpec& spec, std::size_t per_class, Split split,
                          std::uint64_t stream) {
  const std::size_t K = spec.num_classes, side = spec.side;
  const std::size_t N = K * per_class;
  LabeledDataset ds;
  ds.images = Tensor({N, 1, side, side});
  ds.labels.resize(N);
  ds.num_classes = K;
  ds.split = split;
  ds.seed = spec.seed;

  Rng rng(Rng::derive(spec.seed, stream));
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t cls = i % K;
    ds.labels[i] = cls;
    const auto span = static_cast<std::size_t>(2 * kMaxShift + 1);
    const double dx = static_cast<double>(rng.below(span)) - kMaxShift;
    const double dy = static_cast<double>(rng.below(span)) - kMaxShift;
    const double brightness = rng.uniform(-kBrightnessJitter, kBrightnessJitter);
    double* px = &ds.images[i * side * side];
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const double v = template_value(cls, K, side, static_cast<double>(x) - dx,
                                        static_cast<double>(y) - dy, spec.contrast);
        px[y * side + x] = std::clamp(v + brightness + kNoiseSigma * rng.normal(), 0.0, 1.0);
      }
  }
  return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ArgumentError("num_classes must be >= 2");
  if (spec.num_classes > 65535) throw ArgumentError("num_classes must fit in u16");
  if (spec.side < 8) throw ArgumentError("side must be >= 8");
  if (!(spec.contrast > 0.0)) throw ArgumentError("contrast must be > 0");
  if (spec.per_class_train < 1 || spec.per_class_test < 1) {
    throw ArgumentError("per-class counts must be >= 1");
  }
  return {make_split(spec, spec.per_class_train, Split::kTrain, 1),
          make_split(spec, spec.per_class_test, Split::kTest, 2)};
}

std::vector<std::uint8_t> encode_dataset(const LabeledDataset& ds) {
  ds.validate();
  io::Writer w;
  w.raw(std::string_view(kMagic, kMagicLen));
  w.u32(static_cast<std::uint32_t>(ds.num_classes));
  w.u32(static_cast<std::uint32_t>(ds.size()));
  for (std::size_t axis = 1; axis < 4; ++axis) {
    w.u32(static_cast<std::uint32_t>(ds.images.dim(axis)));
  }
  for (std::size_t l : ds.labels) w.u16(static_cast<std::uint16_t>(l));
  for (double v : ds.images.data()) w.f64(v);
  w.crc_from(kMagicLen);
  return std::move(w.bytes());
}

LabeledDataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  using Kind = FormatError::Kind;
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw FormatError(Kind::kBadMagic, "not a dataset file (bad magic)");
  }
  io::Reader r(bytes);
  r.raw(kMagicLen);
  const std::size_t K = r.u32(), N = r.u32(), C = r.u32(), H = r.u32(), W = r.u32();
  if (K < 2 || N == 0 || C == 0 || H == 0 || W == 0) {
    throw FormatError(Kind::kMalformedHeader,
                      "malformed dataset header: K=" + std::to_string(K) +
                          " N=" + std::to_string(N) + " C=" + std::to_string(C) +
                          " H=" + std::to_string(H) + " W=" + std::to_string(W));
  }
  const std::size_t values = N * C * H * W;
  if (r.remaining() < 2 * N + 8 * values + 4) {
    throw FormatError(Kind::kTruncated,
                      "truncated payload: header declares " + std::to_string(N) +
                          " images of " + shape_string({C, H, W}) + ", file has " +
                          std::to_string(r.remaining()) + " bytes left");
  }
  LabeledDataset ds;
  ds.num_classes = K;
  ds.labels.resize(N);
  for (auto& l : ds.labels) l = r.u16();
  std::vector<double> data(values);
  for (auto& v : data) v = r.f64();
  r.expect_crc_from(kMagicLen);
  r.expect_end();
  ds.images = Tensor({N, C, H, W}, std::move(data));
  try {
    ds.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(Kind::kValidation, std::string("invalid dataset: ") + e.what());
  }
  return ds;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(ds));
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path));
}

LabeledDataset subsample_per_class(const LabeledDataset& ds, std::size_t n_per_class,
                                   std::uint64_t seed) {
  if (n_per_class == 0) throw ArgumentError("n_per_class must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    auto& pool = by_class[c];
    if (pool.size() < n_per_class) {
      throw ArgumentError("class " + std::to_string(c) + " has " +
                          std::to_string(pool.size()) + " samples, " +
                          std::to_string(n_per_class) + " requested");
    }
    // Partial Fisher-Yates: the first n entries become the draw.
    for (std::size_t i = 0; i < n_per_class; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    }
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + n_per_class);
  }
  std::sort(chosen.begin(), chosen.end());

  LabeledDataset out;
  out.images = ds.batch(chosen);
  out.labels = ds.labels_of(chosen);
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  out.seed = ds.seed;
  return out;
}

Image augment_with(const Image& img, double degrees, bool flip) {
  const std::size_t C = img.channels(), H = img.height(), W = img.width();
  const Tensor& src = img.pixels();
  Tensor out(src.dims());
  if (degrees == 0.0) {
    out = src;
  } else {
    const double rad = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cx = (static_cast<double>(W) - 1.0) / 2.0;
    const double cy = (static_cast<double>(H) - 1.0) / 2.0;
    auto sample = [&](std::size_t c, long yi, long xi) {
      if (yi < 0 || xi < 0 || yi >= static_cast<long>(H) || xi >= static_cast<long>(W)) {
        return 0.0;
      }
      return src[(c * H + static_cast<std::size_t>(yi)) * W + static_cast<std::size_t>(xi)];
    };
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        // Inverse map: rotate the output coordinate back into the source.
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double sx = cs * dx + sn * dy + cx;
        const double sy = -sn * dx + cs * dy + cy;
        const double fx = std::floor(sx), fy = std::floor(sy);
        const double ax = sx - fx, ay = sy - fy;
        const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
        for (std::size_t c = 0; c < C; ++c) {
          const double v = (1 - ay) * ((1 - ax) * sample(c, y0, x0) + ax * sample(c, y0, x0 + 1)) +
                           ay * ((1 - ax) * sample(c, y0 + 1, x0) + ax * sample(c, y0 + 1, x0 + 1));
          out[(c * H + y) * W + x] = v;
        }
      }
  }
  if (flip) {
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y) {
        double* row = &out[(c * H + y) * W];
        std::reverse(row, row + W);
      }
  }
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return Image(std::move(out));
}

Image augment(const Image& img, std::uint64_t seed) {
  Rng rng(seed);
  const double degrees = rng.uniform(-kMaxRotationDegrees, kMaxRotationDegrees);
  const bool flip = rng.uniform() < 0.5;
  return augment_with(img, degrees, flip);
}

}  // namespace fguap::data
