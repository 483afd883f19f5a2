#ifndef MVAE_BATCH_HPP
#define MVAE_BATCH_HPP

#include "mvae/numerics/tensor.hpp"

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mvae {

// Which modalities of an example are observed. Up to 64 modalities.
class SubsetMask {
 public:
  SubsetMask() = default;
  explicit SubsetMask(Index modality_count);

  static SubsetMask all(Index modality_count);
  static SubsetMask of(Index modality_count, std::initializer_list<Index> present);
  static SubsetMask from_indices(Index modality_count, std::span<const Index> present);

  Index modality_count() const noexcept { return count_; }
  bool present(Index i) const;
  void set(Index i, bool value);
  Index count() const;
  bool empty() const noexcept { return bits_ == 0; }
  std::vector<Index> indices() const;
  std::uint64_t bits() const noexcept { return bits_; }
  // True when every modality present here is present in `other`.
  bool subset_of(const SubsetMask& other) const noexcept { return (bits_ & ~other.bits_) == 0; }

  friend bool operator==(const SubsetMask&, const SubsetMask&) = default;

 private:
  Index count_ = 0;
  std::uint64_t bits_ = 0;
};

// "{0,2}" style label, or names when given.
std::string describe(const SubsetMask& mask, std::span<const std::string> names = {});

// Per-modality data (rows are examples) plus the per-example presence mask.
// Entries of absent modalities are never read and may hold anything,
// including NaN. Categorical modalities store the class index in column 0.
struct MultimodalBatch {
  std::vector<RowMatrix> data;
  std::vector<SubsetMask> masks;

  Index size() const noexcept { return static_cast<Index>(masks.size()); }
  Index modality_count() const noexcept { return static_cast<Index>(data.size()); }

  static MultimodalBatch fully_observed(std::vector<RowMatrix> data);
  MultimodalBatch select(std::span<const Index> rows) const;
  // Throws DimensionError if row counts or mask widths disagree.
  void validate() const;
};

MultimodalBatch concatenate(std::span<const MultimodalBatch> parts);

Tensor gather_rows(const RowMatrix& m, std::span<const Index> rows);

}  // namespace mvae

#endif  // MVAE_BATCH_HPP
