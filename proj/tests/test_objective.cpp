#include "mvae/error.hpp"
#include "mvae/objective.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace mvae;

namespace {

// N Gaussian modalities of width 2 with a single linear layer each.
ModelConfig wide_config(Index n) {
  ModelConfig c;
  c.latent_dim = 2;
  for (Index i = 0; i < n; ++i) c.modalities.push_back({"m" + std::to_string(i), Likelihood::gaussian, 2, {}, 1.0, false});
  return c;
}

MultimodalBatch gaussian_batch(Index n_modalities, Index rows, std::uint64_t seed) {
  RngStream s(seed);
  std::vector<RowMatrix> data;
  for (Index i = 0; i < n_modalities; ++i) data.push_back(standard_normal(s, {rows, 2}).matrix());
  return MultimodalBatch::fully_observed(std::move(data));
}

Index term_count(Index n_modalities, const SubsetMask& present, Index k) {
  const MvaeModel m(wide_config(n_modalities), 1);
  MultimodalBatch b = gaussian_batch(n_modalities, 2, 2);
  for (auto& mask : b.masks) mask = present;
  ObjectiveOptions opts;
  opts.k = k;
  RngStream s(3);
  return static_cast<Index>(sub_sampled_objective(m, b, opts, s).terms.size());
}

}  // namespace

TEST_CASE("available random subsets") {
  CHECK(available_random_subsets(0) == 0);
  CHECK(available_random_subsets(1) == 0);
  CHECK(available_random_subsets(2) == 0);
  CHECK(available_random_subsets(3) == 3);
  CHECK(available_random_subsets(4) == 10);
  CHECK(available_random_subsets(5) == 25);
  CHECK(available_random_subsets(19) == (Index{1} << 19) - 21);
  CHECK(available_random_subsets(64) == std::numeric_limits<Index>::max());
}

TEST_CASE("term counts") {
  SUBCASE("two modalities, k = 0") {
    const MvaeModel m(wide_config(2), 1);
    const MultimodalBatch b = gaussian_batch(2, 3, 2);
    RngStream s(3);
    const SubSampledObjective obj = sub_sampled_objective(m, b, {}, s);
    REQUIRE(obj.terms.size() == 3);
    CHECK(obj.terms[0].subset == SubsetMask::all(2));
    CHECK(obj.terms[1].subset == SubsetMask::of(2, {0}));
    CHECK(obj.terms[2].subset == SubsetMask::of(2, {1}));
  }
  SUBCASE("nineteen modalities, k = 1") { CHECK(term_count(19, SubsetMask::all(19), 1) == 21); }
  SUBCASE("only the second modality present") {
    for (Index k : {0, 1, 5}) CHECK(term_count(2, SubsetMask::of(2, {1}), k) == 1);
    CHECK(term_count(5, SubsetMask::of(5, {3}), 4) == 1);
  }
  SUBCASE("law over N, present count and k") {
    for (Index n = 1; n <= 6; ++n) {
      for (Index k = 0; k <= 12; k += 3) {
        CHECK(term_count(n, SubsetMask::all(n), k) == n + (n > 1 ? 1 : 0) + std::min(k, available_random_subsets(n)));
      }
    }
    CHECK(term_count(5, SubsetMask::of(5, {0, 2, 4}), 10) == 3 + 1 + 3);
    CHECK(term_count(5, SubsetMask::of(5, {0, 2, 4}), 2) == 3 + 1 + 2);
    CHECK(term_count(5, SubsetMask::of(5, {0, 4}), 10) == 3);
    CHECK(term_count(6, SubsetMask::of(6, {0, 1, 2, 5}), 7) == 4 + 1 + 7);
  }
  SUBCASE("mixed presence groups add up") {
    const MvaeModel m(wide_config(3), 1);
    MultimodalBatch b = gaussian_batch(3, 4, 2);
    b.masks[1] = SubsetMask::of(3, {2});
    b.masks[3] = SubsetMask::of(3, {0, 1});
    ObjectiveOptions opts;
    opts.k = 2;
    RngStream s(4);
    const SubSampledObjective obj = sub_sampled_objective(m, b, opts, s);
    // full (1+3+2) + singleton (1) + pair (1+2)
    CHECK(obj.terms.size() == 10);
    Index examples = 0;
    for (const ObjectiveTerm& t : obj.terms) {
      if (t.subset == SubsetMask::all(3)) examples += t.examples;
    }
    CHECK(examples == 2);
  }
}

TEST_CASE("random subset law") {
  const SubsetMask present = SubsetMask::of(6, {0, 2, 3, 5});
  RngStream s(40);
  std::map<std::uint64_t, int> freq;
  const int n = 120000;
  for (int i = 0; i < n; ++i) {
    const SubsetMask m = draw_random_subset(s, present);
    REQUIRE(m.subset_of(present));
    REQUIRE(m.count() >= 2);
    REQUIRE(m.count() <= 3);
    ++freq[m.bits()];
  }
  CHECK(freq.size() == 10);
  for (const auto& [bits, count] : freq) {
    const double expect = std::popcount(bits) == 2 ? 1.0 / 12.0 : 1.0 / 8.0;
    const double sd = std::sqrt(expect * (1 - expect) / n);
    CHECK(std::abs(count / double(n) - expect) < 4 * sd);
  }
  RngStream t(41);
  CHECK_THROWS_AS(draw_random_subset(t, SubsetMask::of(4, {1, 2})), DomainError);
}

TEST_CASE("terms are summed with frozen noise") {
  const MvaeModel m(wide_config(3), 7);
  const MultimodalBatch b = gaussian_batch(3, 5, 8);
  ObjectiveOptions opts;
  opts.fixed_epsilon = true;
  opts.beta = 0.6;
  RngStream s(9), replay(9);
  const SubSampledObjective obj = sub_sampled_objective(m, b, opts, s);
  const Tensor noise = standard_normal(replay, {5, 2});

  const ElboOptions eo{0.6, {}};
  double expect = elbo_subset(m, b, SubsetMask::all(3), eo, noise).item();
  for (Index i = 0; i < 3; ++i) expect += elbo_subset(m, b, SubsetMask::of(3, {i}), eo, noise).item();
  CHECK(std::abs(obj.value.item() - expect) < 1e-12 * std::abs(expect));

  double from_terms = 0.0;
  for (const ObjectiveTerm& t : obj.terms) from_terms += t.mean_elbo * static_cast<double>(t.examples) / 5.0;
  CHECK(std::abs(obj.value.item() - from_terms) < 1e-12 * std::abs(expect));
}

TEST_CASE("independent noise per term") {
  const MvaeModel m(wide_config(2), 7);
  const std::vector<Index> rows(4, 0);
  const MultimodalBatch b = gaussian_batch(2, 1, 8).select(rows);
  RngStream s(10);
  const SubSampledObjective obj = sub_sampled_objective(m, b, {}, s);
  CHECK(obj.terms[1].mean_elbo != obj.terms[2].mean_elbo);
  ObjectiveOptions fixed;
  fixed.fixed_epsilon = true;
  RngStream a(10), c(10);
  CHECK(sub_sampled_objective(m, b, fixed, a).value.item() == sub_sampled_objective(m, b, fixed, c).value.item());
}

TEST_CASE("determinism and errors") {
  const MvaeModel m(wide_config(4), 11);
  const MultimodalBatch b = gaussian_batch(4, 6, 12);
  ObjectiveOptions opts;
  opts.k = 3;
  RngStream a(13), c(13), d(14);
  const double va = sub_sampled_objective(m, b, opts, a).value.item();
  CHECK(va == sub_sampled_objective(m, b, opts, c).value.item());
  CHECK(va != sub_sampled_objective(m, b, opts, d).value.item());

  RngStream e(15);
  opts.k = -1;
  CHECK_THROWS_AS(sub_sampled_objective(m, b, opts, e), DomainError);
  opts.k = 0;
  MultimodalBatch empty_mask = b;
  empty_mask.masks[2] = SubsetMask(4);
  CHECK_THROWS_AS(sub_sampled_objective(m, empty_mask, opts, e), DomainError);
  CHECK_THROWS_AS(sub_sampled_objective(m, b.select(std::vector<Index>{}), opts, e), DomainError);
  opts.lambdas = {1.0, 2.0};
  CHECK_THROWS_AS(sub_sampled_objective(m, b, opts, e), DimensionError);
}
