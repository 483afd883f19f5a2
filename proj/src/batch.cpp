#include "mvae/batch.hpp"

#include "mvae/error.hpp"

#include <bit>
#include <sstream>

namespace mvae {

SubsetMask::SubsetMask(Index modality_count) : count_(modality_count) {
  if (modality_count < 0 || modality_count > 64) {
    throw DimensionError("SubsetMask supports 0..64 modalities, got " + std::to_string(modality_count));
  }
}

SubsetMask SubsetMask::all(Index modality_count) {
  SubsetMask m(modality_count);
  m.bits_ = modality_count == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << modality_count) - 1);
  return m;
}

SubsetMask SubsetMask::of(Index modality_count, std::initializer_list<Index> present) {
  return from_indices(modality_count, std::span<const Index>(present.begin(), present.size()));
}

SubsetMask SubsetMask::from_indices(Index modality_count, std::span<const Index> present) {
  SubsetMask m(modality_count);
  for (Index i : present) m.set(i, true);
  return m;
}

bool SubsetMask::present(Index i) const {
  if (i < 0 || i >= count_) throw DimensionError("modality index " + std::to_string(i) + " out of range");
  return (bits_ >> i) & 1U;
}

void SubsetMask::set(Index i, bool value) {
  if (i < 0 || i >= count_) throw DimensionError("modality index " + std::to_string(i) + " out of range");
  const std::uint64_t bit = std::uint64_t{1} << i;
  bits_ = value ? (bits_ | bit) : (bits_ & ~bit);
}

Index SubsetMask::count() const { return std::popcount(bits_); }

std::vector<Index> SubsetMask::indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < count_; ++i)
    if ((bits_ >> i) & 1U) out.push_back(i);
  return out;
}

std::string describe(const SubsetMask& mask, std::span<const std::string> names) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (Index i : mask.indices()) {
    if (!first) os << (names.empty() ? "," : "+");
    first = false;
    if (static_cast<std::size_t>(i) < names.size()) {
      os << names[static_cast<std::size_t>(i)];
    } else {
      os << i;
    }
  }
  os << '}';
  return os.str();
}

MultimodalBatch MultimodalBatch::fully_observed(std::vector<RowMatrix> data) {
  MultimodalBatch b;
  const Index n = data.empty() ? 0 : data.front().rows();
  b.masks.assign(static_cast<std::size_t>(n), SubsetMask::all(static_cast<Index>(data.size())));
  b.data = std::move(data);
  b.validate();
  return b;
}

MultimodalBatch MultimodalBatch::select(std::span<const Index> rows) const {
  MultimodalBatch out;
  out.data.reserve(data.size());
  for (const RowMatrix& m : data) {
    RowMatrix sub(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Index>(r)) = m.row(rows[r]);
    out.data.push_back(std::move(sub));
  }
  out.masks.reserve(rows.size());
  for (Index r : rows) out.masks.push_back(masks.at(static_cast<std::size_t>(r)));
  return out;
}

void MultimodalBatch::validate() const {
  for (const RowMatrix& m : data) {
    if (m.rows() != size()) {
      throw DimensionError("modality has " + std::to_string(m.rows()) + " rows but batch has " +
                           std::to_string(size()) + " masks");
    }
  }
  for (const SubsetMask& mask : masks) {
    if (mask.modality_count() != modality_count()) throw DimensionError("mask width does not match modality count");
  }
}

MultimodalBatch concatenate(std::span<const MultimodalBatch> parts) {
  MultimodalBatch out;
  if (parts.empty()) return out;
  const std::size_t n_mod = parts.front().data.size();
  Index total = 0;
  for (const MultimodalBatch& p : parts) {
    if (p.data.size() != n_mod) throw DimensionError("concatenate: modality counts differ");
    total += p.size();
  }
  for (std::size_t i = 0; i < n_mod; ++i) {
    RowMatrix m(total, parts.front().data[i].cols());
    Index row = 0;
    for (const MultimodalBatch& p : parts) {
      if (p.data[i].cols() != m.cols()) throw DimensionError("concatenate: feature widths differ");
      m.middleRows(row, p.size()) = p.data[i];
      row += p.size();
    }
    out.data.push_back(std::move(m));
  }
  for (const MultimodalBatch& p : parts) out.masks.insert(out.masks.end(), p.masks.begin(), p.masks.end());
  return out;
}

Tensor gather_rows(const RowMatrix& m, std::span<const Index> rows) {
  Eigen::VectorXd v(static_cast<Index>(rows.size()) * m.cols());
  Eigen::Map<RowMatrix> out(v.data(), static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return Tensor({static_cast<Index>(rows.size()), m.cols()}, std::move(v));
}

}  // namespace mvae
