#include "mvae/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

namespace mvae {
namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) {
    throw IdxError(IdxError::Kind::truncated, "IDX file truncated inside header", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// Largest element count accepted from a header (fits comfortably in memory
// and in a signed 32-bit extent product).
constexpr std::uint64_t kMaxIdxElements = 0x7fffffffULL;

}  // namespace

Tensor parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw IdxError(IdxError::Kind::truncated, "IDX file shorter than its magic", bytes.size());
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic && magic != kIdxLabelMagic) {
    throw IdxError(IdxError::Kind::bad_magic, "unsupported IDX magic " + std::to_string(magic), 0);
  }
  const std::size_t rank = magic == kIdxImageMagic ? 3 : 1;

  Shape shape;
  std::uint64_t count = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    const std::size_t offset = 4 + 4 * d;
    const std::uint32_t extent = read_be32(bytes, offset);
    count *= extent;
    if (count > kMaxIdxElements) {
      throw IdxError(IdxError::Kind::dimension_overflow, "IDX dimensions exceed the supported element count", offset);
    }
    shape.push_back(static_cast<Index>(extent));
  }

  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header + count) {
    throw IdxError(IdxError::Kind::truncated,
                   "IDX payload needs " + std::to_string(count) + " bytes", bytes.size());
  }
  if (bytes.size() > header + count) {
    throw IdxError(IdxError::Kind::trailing_data, "unexpected bytes after IDX payload", header + count);
  }

  const double scale = rank == 3 ? 1.0 / 255.0 : 1.0;
  Eigen::VectorXd values(static_cast<Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) values[static_cast<Index>(i)] = bytes[header + i] * scale;
  return Tensor(std::move(shape), std::move(values));
}

Tensor load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open IDX file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const Tensor& tensor) {
  if (tensor.rank() != 3 && tensor.rank() != 1) {
    throw DimensionError("IDX encoding supports rank 3 images or rank 1 labels, got " + to_string(tensor.shape()));
  }
  const bool image = tensor.rank() == 3;
  std::vector<std::uint8_t> out;
  write_be32(out, image ? kIdxImageMagic : kIdxLabelMagic);
  for (Index e : tensor.shape()) write_be32(out, static_cast<std::uint32_t>(e));
  for (Index i = 0; i < tensor.size(); ++i) {
    const double v = std::round(image ? tensor[i] * 255.0 : tensor[i]);
    if (!(v >= 0.0 && v <= 255.0)) throw DomainError("value at index " + std::to_string(i) + " does not fit a byte");
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

void write_idx(const Tensor& tensor, const std::string& path) {
  const std::vector<std::uint8_t> bytes = encode_idx(tensor);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write IDX file '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset load_mnist(const std::string& images_path, const std::string& labels_path) {
  const Tensor images = load_idx(images_path);
  const Tensor labels = load_idx(labels_path);
  if (images.rank() != 3 || labels.rank() != 1 || images.shape()[0] != labels.shape()[0]) {
    throw DimensionError("MNIST images " + to_string(images.shape()) + " and labels " + to_string(labels.shape()) +
                         " do not pair up");
  }
  const Index n = images.shape()[0];
  const Index pixels = images.shape()[1] * images.shape()[2];
  Dataset d;
  d.modalities.push_back(Eigen::Map<const RowMatrix>(images.values().data(), n, pixels));
  d.modalities.push_back(Eigen::Map<const RowMatrix>(labels.values().data(), n, 1));
  d.provenance = "idx:" + images_path + "," + labels_path;
  return d;
}

}  // namespace mvae
