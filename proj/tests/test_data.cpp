#include "mvae/data.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace mvae;

namespace {

std::vector<std::uint8_t> tiny_image_file() {
  return {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 255, 0, 255};
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

IdxError::Kind idx_failure(const std::vector<std::uint8_t>& bytes, std::size_t* offset = nullptr) {
  try {
    parse_idx(bytes);
  } catch (const IdxError& e) {
    if (offset) *offset = e.offset();
    return e.kind();
  }
  FAIL("expected IdxError");
  return IdxError::Kind::bad_magic;
}

int hamming(const RowMatrix& a, Index ra, const RowMatrix& b, Index rb) {
  return static_cast<int>((a.row(ra).array() != b.row(rb).array()).count());
}

}  // namespace

TEST_CASE("IDX parsing") {
  SUBCASE("hand-built image file") {
    const std::vector<std::uint8_t> bytes = tiny_image_file();
    CHECK(bytes.size() == 20);
    const Tensor t = parse_idx(bytes);
    CHECK(t.shape() == Shape{1, 2, 2});
    CHECK(t.values() == Tensor::from_values({4}, {0, 1, 0, 1}).values());
    CHECK(encode_idx(t) == bytes);
  }
  SUBCASE("label file keeps raw values") {
    const std::vector<std::uint8_t> bytes{0, 0, 8, 1, 0, 0, 0, 3, 7, 0, 9};
    const Tensor t = parse_idx(bytes);
    CHECK(t.shape() == Shape{3});
    CHECK(t.values() == Tensor::from_values({3}, {7, 0, 9}).values());
    CHECK(encode_idx(t) == bytes);
  }
  SUBCASE("distinct errors with offsets") {
    std::size_t off = 99;
    std::vector<std::uint8_t> bad = tiny_image_file();
    bad[3] = 0x02;
    CHECK(idx_failure(bad, &off) == IdxError::Kind::bad_magic);
    CHECK(off == 0);

    std::vector<std::uint8_t> cut = tiny_image_file();
    cut.pop_back();
    CHECK(idx_failure(cut, &off) == IdxError::Kind::truncated);
    CHECK(off == 19);
    CHECK(idx_failure({0, 0, 8, 3, 0, 0}) == IdxError::Kind::truncated);
    CHECK(idx_failure({0, 0}) == IdxError::Kind::truncated);

    const std::vector<std::uint8_t> huge{0, 0, 8, 3, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0, 0, 0, 2};
    CHECK(idx_failure(huge, &off) == IdxError::Kind::dimension_overflow);
    CHECK(off >= 4);
    CHECK(off < 16);

    std::vector<std::uint8_t> extra = tiny_image_file();
    extra.push_back(1);
    CHECK(idx_failure(extra, &off) == IdxError::Kind::trailing_data);
    CHECK(off == 20);
  }
  SUBCASE("file round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "mvae_test_idx";
    std::filesystem::create_directories(dir);
    RngStream s(1);
    Eigen::VectorXd v(3 * 4 * 5);
    for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(s.uniform_index(256)) / 255.0;
    const Tensor images({3, 4, 5}, v);
    const auto path = (dir / "images.idx").string();
    write_idx(images, path);
    const Tensor back = load_idx(path);
    CHECK((back.values() - images.values()).cwiseAbs().maxCoeff() < 1e-15);
    const auto path2 = (dir / "again.idx").string();
    write_idx(back, path2);
    CHECK(read_text(path) == read_text(path2));
    CHECK_THROWS_AS(load_idx((dir / "missing.idx").string()), Error);
    CHECK_THROWS_AS(encode_idx(Tensor::zeros({2, 2})), Error);
  }
  SUBCASE("mnist loader pairs images and labels") {
    const auto dir = std::filesystem::temp_directory_path() / "mvae_test_idx";
    std::filesystem::create_directories(dir);
    write_idx(Tensor::constant({2, 28, 28}, 1.0), (dir / "img").string());
    write_idx(Tensor::from_values({2}, {3, 8}), (dir / "lab").string());
    const Dataset d = load_mnist((dir / "img").string(), (dir / "lab").string());
    CHECK(d.size() == 2);
    CHECK(d.modalities[0].cols() == 784);
    CHECK(d.modalities[1](1, 0) == 8.0);
    write_idx(Tensor::from_values({3}, {3, 8, 1}), (dir / "lab3").string());
    CHECK_THROWS_AS(load_mnist((dir / "img").string(), (dir / "lab3").string()), Error);
  }
}

TEST_CASE("real MNIST files") {
  const char* dir = std::getenv("MVAE_MNIST_DIR");
  const std::filesystem::path images = dir ? std::filesystem::path(dir) / "train-images-idx3-ubyte" : "";
  if (!dir || !std::filesystem::exists(images)) {
    MESSAGE("MVAE_MNIST_DIR not set or missing train-images-idx3-ubyte; skipped");
    return;
  }
  const Tensor t = load_idx(images.string());
  CHECK(t.shape() == Shape{60000, 28, 28});
  CHECK(t.values().minCoeff() >= 0.0);
  CHECK(t.values().maxCoeff() <= 1.0);
  const Tensor l = load_idx((std::filesystem::path(dir) / "train-labels-idx1-ubyte").string());
  CHECK(l.shape() == Shape{60000});
}

TEST_CASE("binarize") {
  const Tensor x = Tensor::from_values({4}, {0.5, 0.499, 1.0, 0.0});
  CHECK(binarize(x, BinarizeMode::threshold).values() == Tensor::from_values({4}, {1, 0, 1, 0}).values());
  RngStream s(2);
  CHECK(binarize(Tensor::zeros({50}), BinarizeMode::threshold).values().isZero());
  CHECK(binarize(Tensor::zeros({50}), BinarizeMode::stochastic, &s).values().isZero());
  const Tensor b = binarize(Tensor::constant({100000}, 0.3), BinarizeMode::stochastic, &s);
  CHECK(std::abs(b.values().mean() - 0.3) < 0.01);
  CHECK_THROWS_AS(binarize(Tensor::from_values({1}, {1.2}), BinarizeMode::threshold), DomainError);
  CHECK_THROWS_AS(binarize(Tensor::from_values({1}, {-0.1}), BinarizeMode::threshold), DomainError);
  CHECK_THROWS_AS(binarize(x, BinarizeMode::stochastic), DomainError);
}

TEST_CASE("glyph templates") {
  const RowMatrix& g = glyph_templates();
  CHECK(g.rows() == 10);
  CHECK(g.cols() == 64);
  CHECK(((g.array() == 0.0) || (g.array() == 1.0)).all());
  int min_dist = 64;
  for (Index a = 0; a < 10; ++a)
    for (Index b = a + 1; b < 10; ++b) min_dist = std::min(min_dist, hamming(g, a, g, b));
  CHECK(min_dist >= 6);

  const std::string asset = read_text(std::filesystem::path(MVAE_SOURCE_DIR) / "data" / "glyphs.txt");
  CHECK(parse_glyph_templates(asset) == g);
  CHECK_THROWS_AS(parse_glyph_templates("glyph 0\n........\n"), DomainError);
  CHECK_THROWS_AS(parse_glyph_templates("glyph 12\n"), DomainError);
  CHECK_THROWS_AS(parse_glyph_templates("glyph 0\n...\n"), DomainError);
}

TEST_CASE("synthetic bimodal") {
  SUBCASE("no noise renders templates exactly") {
    const Dataset d = synth_bimodal(200, 0.0, 3);
    for (Index r = 0; r < d.size(); ++r)
      REQUIRE(d.modalities[0].row(r) == glyph_templates().row(static_cast<Index>(d.modalities[1](r, 0))));
  }
  SUBCASE("class frequencies") {
    const Dataset d = synth_bimodal(100000, 0.05, 4);
    for (int c = 0; c < 10; ++c) CHECK(std::abs((d.modalities[1].array() == c).cast<double>().mean() - 0.1) < 0.01);
  }
  SUBCASE("template matcher") {
    auto matcher_accuracy = [](const Dataset& d) {
      Index hits = 0;
      for (Index r = 0; r < d.size(); ++r) {
        Index best = 0;
        int best_d = 65;
        for (Index c = 0; c < 10; ++c) {
          const int h = hamming(d.modalities[0], r, glyph_templates(), c);
          if (h < best_d) {
            best_d = h;
            best = c;
          }
        }
        hits += best == static_cast<Index>(d.modalities[1](r, 0));
      }
      return static_cast<double>(hits) / static_cast<double>(d.size());
    };
    CHECK(std::abs(matcher_accuracy(synth_bimodal(10000, 0.5, 5)) - 0.1) < 0.02);
    CHECK(matcher_accuracy(synth_bimodal(2000, 0.05, 6)) > 0.95);
  }
  SUBCASE("determinism and errors") {
    const Dataset a = synth_bimodal(50, 0.1, 7), b = synth_bimodal(50, 0.1, 7), c = synth_bimodal(50, 0.1, 8);
    CHECK(a.modalities == b.modalities);
    CHECK(a.modalities != c.modalities);
    CHECK(a.provenance == b.provenance);
    CHECK(a.provenance.find("seed=7") != std::string::npos);
    CHECK_THROWS_AS(synth_bimodal(0, 0.1, 1), DomainError);
    CHECK_THROWS_AS(synth_bimodal(5, 0.6, 1), DomainError);
    CHECK_THROWS_AS(synth_bimodal(5, -0.1, 1), DomainError);
  }
  SUBCASE("slice") {
    const Dataset a = synth_bimodal(50, 0.1, 7);
    const Dataset s = a.slice(10, 5);
    CHECK(s.size() == 5);
    CHECK(s.modalities[0].row(0) == a.modalities[0].row(10));
    CHECK_THROWS_AS(a.slice(48, 5), DimensionError);
  }
}

TEST_CASE("synthetic attributes") {
  SUBCASE("zero flip reproduces the table") {
    const Dataset d = synth_attributes(500, 19, 9, 0.0);
    CHECK(d.modalities.size() == 19);
    for (Index r = 0; r < d.size(); ++r) {
      // Recover the class from the attribute bits, then compare each bit.
      std::uint32_t bits = 0;
      for (Index j = 0; j < 18; ++j) bits |= static_cast<std::uint32_t>(d.modalities[static_cast<std::size_t>(j + 1)](r, 0)) << j;
      bool found = false;
      for (std::uint32_t row : attribute_table()) found = found || (row & 0x3FFFF) == bits;
      REQUIRE(found);
    }
  }
  SUBCASE("marginal frequencies follow the table") {
    const Dataset d = synth_attributes(100000, 19, 10);
    for (Index j = 0; j < 18; ++j) {
      double p_table = 0.0;
      for (std::uint32_t row : attribute_table()) p_table += ((row >> j) & 1U) ? 0.1 : 0.0;
      const double expect = p_table * 0.95 + (1.0 - p_table) * 0.05;
      CHECK(std::abs(d.modalities[static_cast<std::size_t>(j + 1)].mean() - expect) < 0.01);
    }
  }
  SUBCASE("bounds") {
    CHECK(synth_attributes(5, 3, 1).modalities.size() == 3);
    CHECK_THROWS_AS(synth_attributes(5, 2, 1), DomainError);
    CHECK_THROWS_AS(synth_attributes(5, 20, 1), DomainError);
    CHECK(synth_attributes(20, 5, 11).modalities == synth_attributes(20, 5, 11).modalities);
  }
}

TEST_CASE("linear-Gaussian family") {
  SUBCASE("unit loading and noise") {
    const LinearGaussianSpec spec{{1.0}, {1.0}};
    Eigen::VectorXd x(1);
    x << 0.0;
    CHECK(spec.log_marginal(x, SubsetMask::all(1)) == doctest::Approx(-0.5 * std::log(4 * std::numbers::pi)).epsilon(1e-15));
    x << 1.3;
    CHECK(spec.log_marginal(x, SubsetMask::all(1)) ==
          doctest::Approx(-0.5 * std::log(4 * std::numbers::pi) - 1.3 * 1.3 / 4.0).epsilon(1e-14));
  }
  SUBCASE("posterior precision") {
    const LinearGaussianSpec spec{{1.2, -0.8}, {0.5, 0.7}};
    Eigen::VectorXd x(2);
    x << 0.4, -1.1;
    const DiagGaussian post = spec.posterior(x, SubsetMask::all(2));
    const double t = 1.0 + 1.44 / 0.5 + 0.64 / 0.7;
    CHECK(std::exp(-post.log_var()[0]) == doctest::Approx(t).epsilon(1e-14));
    CHECK(post.mean()[0] == doctest::Approx((1.2 * 0.4 / 0.5 + 0.8 * 1.1 / 0.7) / t).epsilon(1e-14));
  }
  SUBCASE("posterior is the product of per-modality experts") {
    const LinearGaussianSpec spec{{1.2, -0.8, 0.3}, {0.5, 0.7, 2.0}};
    RngStream s(12);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd x(3);
      for (Index i = 0; i < 3; ++i) x[i] = 2.0 * s.standard_normal();
      std::vector<DiagGaussian> experts;
      for (Index i = 0; i < 3; ++i)
        experts.push_back(quotient_of_experts(spec.posterior(x, SubsetMask::of(3, {i})), DiagGaussian::standard({1, 1})));
      const DiagGaussian poe = product_of_experts(experts, true);
      const DiagGaussian exact = spec.posterior(x, SubsetMask::all(3));
      CHECK(std::abs(poe.mean()[0] - exact.mean()[0]) < 1e-10);
      CHECK(std::abs(poe.log_var()[0] - exact.log_var()[0]) < 1e-10);
    }
  }
  SUBCASE("conditional is joint minus marginal") {
    const LinearGaussianSpec spec{{1.2, -0.8}, {0.5, 0.7}};
    Eigen::VectorXd x(2);
    x << 0.9, 0.2;
    CHECK(spec.log_conditional(x, 0, 1) ==
          doctest::Approx(spec.log_marginal(x, SubsetMask::all(2)) - spec.log_marginal(x, SubsetMask::of(2, {1}))).epsilon(1e-14));
  }
  SUBCASE("sample moments") {
    const LinearGaussianSpec spec{{1.2, -0.8}, {0.5, 0.7}};
    const Dataset d = linear_gaussian_dataset(spec, 1000000, 13);
    const Eigen::ArrayXd a = d.modalities[0].col(0).array(), b = d.modalities[1].col(0).array();
    const double n = 1e6;
    const double va = 1.44 + 0.5, vb = 0.64 + 0.7, cab = -0.96;
    CHECK(std::abs(a.mean()) < 3 * std::sqrt(va / n));
    CHECK(std::abs(b.mean()) < 3 * std::sqrt(vb / n));
    CHECK(std::abs((a * a).mean() - va) < 3 * std::sqrt(2 * va * va / n));
    CHECK(std::abs((b * b).mean() - vb) < 3 * std::sqrt(2 * vb * vb / n));
    CHECK(std::abs((a * b).mean() - cab) < 3 * std::sqrt((va * vb + cab * cab) / n));
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(linear_gaussian_dataset({{1.0}, {0.0}}, 5, 1), DomainError);
    CHECK_THROWS_AS(linear_gaussian_dataset({{1.0, 2.0}, {1.0}}, 5, 1), DimensionError);
    CHECK(linear_gaussian_dataset({{1.0}, {1.0}}, 5, 2).modalities == linear_gaussian_dataset({{1.0}, {1.0}}, 5, 2).modalities);
  }
}
