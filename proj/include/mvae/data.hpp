#ifndef MVAE_DATA_HPP
#define MVAE_DATA_HPP

#include "mvae/batch.hpp"
#include "mvae/error.hpp"
#include "mvae/gaussian.hpp"
#include "mvae/numerics/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mvae {

// Fully observed examples; every modality matrix has one row per example.
struct Dataset {
  std::vector<RowMatrix> modalities;
  std::string provenance;

  Index size() const noexcept { return modalities.empty() ? 0 : modalities.front().rows(); }
  MultimodalBatch to_batch() const { return MultimodalBatch::fully_observed(modalities); }
  Dataset slice(Index begin, Index count) const;
};

// ---- IDX (MNIST) files --------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

class IdxError : public FormatError {
 public:
  enum class Kind { bad_magic, truncated, dimension_overflow, trailing_data };
  IdxError(Kind kind, const std::string& what, std::size_t offset) : FormatError(what, offset), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Unsigned-byte IDX files: 3-D image files come back scaled by 1/255 with
// shape [n, rows, cols]; 1-D label files keep their raw values.
// Errors are IdxError carrying the byte offset of the failure.
Tensor parse_idx(const std::vector<std::uint8_t>& bytes);
Tensor load_idx(const std::string& path);

// Inverse of parse_idx: rank 3 writes an image file (values * 255, rounded),
// rank 1 a label file.
std::vector<std::uint8_t> encode_idx(const Tensor& tensor);
void write_idx(const Tensor& tensor, const std::string& path);

// Image + label dataset from MNIST files: images flattened to 784 columns,
// labels as class indices.
Dataset load_mnist(const std::string& images_path, const std::string& labels_path);

enum class BinarizeMode { threshold, stochastic };

// threshold: 1 iff value >= 0.5. stochastic: one Bernoulli(value) draw per
// entry from `stream`. Throws DomainError for values outside [0, 1].
Tensor binarize(const Tensor& images, BinarizeMode mode, RngStream* stream = nullptr);

// ---- Synthetic generators -----------------------------------------------

inline constexpr Index kGlyphSide = 8;
inline constexpr Index kGlyphPixels = kGlyphSide * kGlyphSide;
inline constexpr Index kGlyphClasses = 10;
inline constexpr Index kMaxAttributes = 18;

// 10 x 64 binary glyph templates parsed from the repository asset.
const RowMatrix& glyph_templates();
RowMatrix parse_glyph_templates(std::string_view text);

// Per-class attribute bits used by synth_attributes: bit j of entry c.
const std::array<std::uint32_t, kGlyphClasses>& attribute_table();

// Modality 0: 64-pixel glyph image with each pixel flipped w.p. noise_flip_prob.
// Modality 1: the class index. Classes are uniform.
Dataset synth_bimodal(Index n, double noise_flip_prob, std::uint64_t seed);

// Modality 0: noisy glyph (flip 0.05). Modalities 1..N-1: single attribute
// bits from attribute_table(), flipped w.p. attribute_flip_prob.
Dataset synth_attributes(Index n, Index n_modalities, std::uint64_t seed, double attribute_flip_prob = 0.05);

// ---- Linear-Gaussian family ---------------------------------------------

// z ~ N(0, 1), x_i = a_i z + e_i, e_i ~ N(0, s_i^2). Scalar modalities.
struct LinearGaussianSpec {
  std::vector<double> loadings;
  std::vector<double> noise_variances;

  Index modality_count() const noexcept { return static_cast<Index>(loadings.size()); }
  void validate() const;

  // Exact p(z | x_S) for the modalities in `subset`; x has one value per modality.
  DiagGaussian posterior(const Eigen::VectorXd& x, const SubsetMask& subset) const;
  // log p(x_S) from the jointly Gaussian marginal.
  double log_marginal(const Eigen::VectorXd& x, const SubsetMask& subset) const;
  // log p(x_i | x_j) = log p(x_i, x_j) - log p(x_j).
  double log_conditional(const Eigen::VectorXd& x, Index target, Index given) const;
  double log_likelihood(Index modality, double x, double z) const;
};

Dataset linear_gaussian_dataset(const LinearGaussianSpec& spec, Index n, std::uint64_t seed);

}  // namespace mvae

#endif  // MVAE_DATA_HPP
