#include "mvae/data.hpp"

#include "mvae/glyph_asset.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <sstream>

namespace mvae {

Dataset Dataset::slice(Index begin, Index count) const {
  if (begin < 0 || count < 0 || begin + count > size()) throw DimensionError("dataset slice out of range");
  Dataset d;
  for (const RowMatrix& m : modalities) d.modalities.push_back(m.middleRows(begin, count));
  d.provenance = provenance + "[" + std::to_string(begin) + ":" + std::to_string(begin + count) + "]";
  return d;
}

Tensor binarize(const Tensor& images, BinarizeMode mode, RngStream* stream) {
  const Eigen::VectorXd& v = images.values();
  for (Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw DomainError("binarize: value " + std::to_string(v[i]) + " at index " + std::to_string(i) +
                        " outside [0, 1]");
    }
  }
  Eigen::VectorXd out(v.size());
  if (mode == BinarizeMode::threshold) {
    for (Index i = 0; i < v.size(); ++i) out[i] = v[i] >= 0.5 ? 1.0 : 0.0;
  } else {
    if (stream == nullptr) throw DomainError("stochastic binarization needs a random stream");
    for (Index i = 0; i < v.size(); ++i) out[i] = stream->uniform01() < v[i] ? 1.0 : 0.0;
  }
  return Tensor(images.shape(), std::move(out));
}

RowMatrix parse_glyph_templates(std::string_view text) {
  RowMatrix glyphs = RowMatrix::Constant(kGlyphClasses, kGlyphPixels, -1.0);
  std::istringstream in{std::string(text)};
  std::string line;
  Index current = -1, row = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == ';') continue;
    const auto fail = [&](const std::string& why) {
      return DomainError("glyph asset line " + std::to_string(line_no) + ": " + why);
    };
    if (line.rfind("glyph ", 0) == 0) {
      current = std::stol(line.substr(6));
      if (current < 0 || current >= kGlyphClasses) throw fail("class out of range");
      row = 0;
      continue;
    }
    if (current < 0 || row >= kGlyphSide) throw fail("bitmap row outside a glyph block");
    if (static_cast<Index>(line.size()) != kGlyphSide) throw fail("bitmap rows must have 8 characters");
    for (Index c = 0; c < kGlyphSide; ++c) {
      const char ch = line[static_cast<std::size_t>(c)];
      if (ch != 'X' && ch != '.') throw fail("unexpected character");
      glyphs(current, row * kGlyphSide + c) = ch == 'X' ? 1.0 : 0.0;
    }
    ++row;
  }
  if ((glyphs.array() < 0.0).any()) throw DomainError("glyph asset is missing classes or rows");
  return glyphs;
}

const RowMatrix& glyph_templates() {
  static const RowMatrix glyphs = parse_glyph_templates(assets::kGlyphTemplates);
  return glyphs;
}

const std::array<std::uint32_t, kGlyphClasses>& attribute_table() {
  static constexpr std::array<std::uint32_t, kGlyphClasses> table{
      0x2A5F3, 0x1C3A6, 0x35C19, 0x0B6E4, 0x3D21A, 0x16F8D, 0x28B57, 0x07D2C, 0x3392E, 0x1E4B1};
  return table;
}

namespace {

void render_glyph(RowMatrix& images, Index row, Index cls, double flip, RngStream& stream) {
  const RowMatrix& glyphs = glyph_templates();
  for (Index p = 0; p < kGlyphPixels; ++p) {
    const double bit = glyphs(cls, p);
    images(row, p) = stream.uniform01() < flip ? 1.0 - bit : bit;
  }
}

}  // namespace

Dataset synth_bimodal(Index n, double noise_flip_prob, std::uint64_t seed) {
  if (n < 1) throw DomainError("synth_bimodal needs n >= 1");
  if (!(noise_flip_prob >= 0.0 && noise_flip_prob <= 0.5)) throw DomainError("flip probability must lie in [0, 0.5]");
  RngStream stream(seed, 0xb1);
  RowMatrix images(n, kGlyphPixels);
  RowMatrix labels(n, 1);
  for (Index r = 0; r < n; ++r) {
    const auto cls = static_cast<Index>(stream.uniform_index(kGlyphClasses));
    labels(r, 0) = static_cast<double>(cls);
    render_glyph(images, r, cls, noise_flip_prob, stream);
  }
  Dataset d;
  d.modalities = {std::move(images), std::move(labels)};
  std::ostringstream os;
  os << "synth_bimodal(n=" << n << ",flip=" << noise_flip_prob << ",seed=" << seed << ")";
  d.provenance = os.str();
  return d;
}

Dataset synth_attributes(Index n, Index n_modalities, std::uint64_t seed, double attribute_flip_prob) {
  if (n < 1) throw DomainError("synth_attributes needs n >= 1");
  if (n_modalities < 3 || n_modalities > kMaxAttributes + 1) {
    throw DomainError("synth_attributes supports 3..19 modalities, got " + std::to_string(n_modalities));
  }
  if (!(attribute_flip_prob >= 0.0 && attribute_flip_prob <= 0.5)) throw DomainError("flip probability must lie in [0, 0.5]");
  RngStream stream(seed, 0xa7);
  RowMatrix images(n, kGlyphPixels);
  std::vector<RowMatrix> attrs(static_cast<std::size_t>(n_modalities - 1), RowMatrix(n, 1));
  for (Index r = 0; r < n; ++r) {
    const auto cls = static_cast<Index>(stream.uniform_index(kGlyphClasses));
    render_glyph(images, r, cls, 0.05, stream);
    const std::uint32_t bits = attribute_table()[static_cast<std::size_t>(cls)];
    for (std::size_t j = 0; j < attrs.size(); ++j) {
      const double bit = (bits >> j) & 1U;
      attrs[j](r, 0) = stream.uniform01() < attribute_flip_prob ? 1.0 - bit : bit;
    }
  }
  Dataset d;
  d.modalities.push_back(std::move(images));
  for (RowMatrix& a : attrs) d.modalities.push_back(std::move(a));
  std::ostringstream os;
  os << "synth_attributes(n=" << n << ",modalities=" << n_modalities << ",seed=" << seed << ")";
  d.provenance = os.str();
  return d;
}

void LinearGaussianSpec::validate() const {
  if (loadings.empty() || loadings.size() != noise_variances.size()) {
    throw DimensionError("linear-Gaussian spec needs one loading and one noise variance per modality");
  }
  for (double s2 : noise_variances)
    if (!(s2 > 0.0)) throw DomainError("noise variances must be positive");
}

DiagGaussian LinearGaussianSpec::posterior(const Eigen::VectorXd& x, const SubsetMask& subset) const {
  double precision = 1.0, shift = 0.0;
  for (Index i : subset.indices()) {
    const auto s = static_cast<std::size_t>(i);
    precision += loadings[s] * loadings[s] / noise_variances[s];
    shift += loadings[s] * x[i] / noise_variances[s];
  }
  return DiagGaussian(Tensor::from_values({1, 1}, {shift / precision}),
                      Tensor::from_values({1, 1}, {-std::log(precision)}));
}

double LinearGaussianSpec::log_marginal(const Eigen::VectorXd& x, const SubsetMask& subset) const {
  const std::vector<Index> idx = subset.indices();
  const auto m = static_cast<Index>(idx.size());
  if (m == 0) return 0.0;
  Eigen::MatrixXd cov(m, m);
  Eigen::VectorXd xs(m);
  for (Index r = 0; r < m; ++r) {
    const auto sr = static_cast<std::size_t>(idx[static_cast<std::size_t>(r)]);
    xs[r] = x[static_cast<Index>(sr)];
    for (Index c = 0; c < m; ++c) {
      const auto sc = static_cast<std::size_t>(idx[static_cast<std::size_t>(c)]);
      cov(r, c) = loadings[sr] * loadings[sc] + (r == c ? noise_variances[sr] : 0.0);
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd solved = llt.matrixL().solve(xs);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det + solved.squaredNorm());
}

double LinearGaussianSpec::log_conditional(const Eigen::VectorXd& x, Index target, Index given) const {
  const Index n = modality_count();
  return log_marginal(x, SubsetMask::of(n, {target, given})) - log_marginal(x, SubsetMask::of(n, {given}));
}

double LinearGaussianSpec::log_likelihood(Index modality, double x, double z) const {
  const auto s = static_cast<std::size_t>(modality);
  const double r = x - loadings[s] * z;
  return -0.5 * (std::log(2.0 * std::numbers::pi * noise_variances[s]) + r * r / noise_variances[s]);
}

Dataset linear_gaussian_dataset(const LinearGaussianSpec& spec, Index n, std::uint64_t seed) {
  spec.validate();
  RngStream stream(seed, 0x19);
  std::vector<RowMatrix> mods(static_cast<std::size_t>(spec.modality_count()), RowMatrix(n, 1));
  for (Index r = 0; r < n; ++r) {
    const double z = stream.standard_normal();
    for (std::size_t i = 0; i < mods.size(); ++i) {
      mods[i](r, 0) = spec.loadings[i] * z + std::sqrt(spec.noise_variances[i]) * stream.standard_normal();
    }
  }
  Dataset d;
  d.modalities = std::move(mods);
  d.provenance = "linear_gaussian(n=" + std::to_string(n) + ",seed=" + std::to_string(seed) + ")";
  return d;
}

}  // namespace mvae
