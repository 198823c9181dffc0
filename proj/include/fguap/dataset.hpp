#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "fguap/tensor.hpp"

namespace fguap::data {

/// One [C,H,W] image with pixels in [0,1].
class Image {
 public:
  /// Throws ArgumentError on wrong rank or out-of-range pixels.
  explicit Image(Tensor pixels);

  const Tensor& pixels() const noexcept { return pixels_; }
  std::size_t channels() const { return pixels_.dim(0); }
  std::size_t height() const { return pixels_.dim(1); }
  std::size_t width() const { return pixels_.dim(2); }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Tensor pixels_;
};

enum class Split { kTrain, kTest, kUnspecified };

const char* split_name(Split s);

/// Images stored contiguously as one [N,C,H,W] tensor.
struct LabeledDataset {
  Tensor images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  Split split = Split::kUnspecified;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return labels.size(); }
  /// [C,H,W] of a single sample.
  Shape sample_shape() const;
  Image image(std::size_t i) const;
  /// Stacks the listed samples into [B,C,H,W].
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> labels_of(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;

  /// Checks the structural invariants; throws ArgumentError.
  void validate() const;

  /// Content equality (pixels, labels, class count). Split tag and seed are
  /// provenance and are not part of the on-disk format.
  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.num_classes == b.num_classes && a.labels == b.labels &&
           a.images == b.images;
  }
};

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t num_classes = 8;
  std::size_t per_class_train = 200;
  std::size_t per_class_test = 50;
  std::size_t side = 24;
  /// Scales the class-specific part of every template around mid-gray.
  double contrast = 1.0;
};

inline constexpr double kNoiseSigma = 0.08;
inline constexpr int kMaxShift = 2;
inline constexpr double kBrightnessJitter = 0.1;

/// Noise-free class template evaluated at continuous coordinates.
double template_value(std::size_t cls, std::size_t num_classes, std::size_t side,
                      double x, double y, double contrast = 1.0);

/// Class templates with per-sample shift, Gaussian noise and brightness
/// jitter. Samples are interleaved by class: index i has label i % K.
std::pair<LabeledDataset, LabeledDataset> generate_synthetic(const SyntheticSpec& spec);

/// UAPDATA1 container.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_dataset(const LabeledDataset& ds);
LabeledDataset decode_dataset(const std::vector<std::uint8_t>& bytes);

/// Exactly n samples from each class, drawn uniformly without replacement.
/// The result keeps the original relative order of the chosen samples.
LabeledDataset subsample_per_class(const LabeledDataset& ds, std::size_t n_per_class,
                                   std::uint64_t seed);

inline constexpr double kMaxRotationDegrees = 15.0;

/// Rotation by `degrees` about the image centre (bilinear, zero fill),
/// then an optional horizontal flip; result clamped to [0,1].
Image augment_with(const Image& img, double degrees, bool flip);
/// Random rotation in [-15, 15] degrees and a fair-coin horizontal flip.
Image augment(const Image& img, std::uint64_t seed);

}  // namespace fguap::data
