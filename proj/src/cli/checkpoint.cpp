#include "mvae/cli/checkpoint.hpp"

#include "mvae/cli/config.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace mvae::cli {

namespace {

std::string shape_token(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string encode_values(const Eigen::VectorXd& values) {
  std::string out(static_cast<std::size_t>(values.size()) * 8, '\0');
  for (Index i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[static_cast<std::size_t>(i) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

Eigen::VectorXd decode_values(std::string_view bytes) {
  Eigen::VectorXd v(static_cast<Index>(bytes.size() / 8));
  for (Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[static_cast<std::size_t>(i) * 8 + b])) << (8 * b);
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

// Cursor over the manifest lines that knows its byte offset for diagnostics.
class LineReader {
 public:
  explicit LineReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view next() {
    const std::size_t end = bytes_.find('\n', pos_);
    if (end == std::string_view::npos) throw CheckpointError("checkpoint manifest is truncated", pos_);
    line_start_ = pos_;
    std::string_view line = bytes_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return line;
  }

  std::size_t line_start() const noexcept { return line_start_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> words;
  std::istringstream in{std::string(line)};
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::uint64_t parse_unsigned(const std::string& s, int base, std::size_t offset) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used, base);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CheckpointError("malformed number '" + s + "' in checkpoint manifest", offset);
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_checkpoint(const MvaeModel& model) {
  std::string manifest = std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion) + "\n";
  manifest += "model " + to_json(model.config()).dump() + "\n";
  std::string blob;
  for (const Parameter& p : model.parameters()) {
    const std::string bytes = encode_values(p.value.values());
    manifest += "param " + p.name + " " + shape_token(p.value.shape()) + " " + std::to_string(blob.size()) + " " +
                std::to_string(bytes.size()) + " " + hex64(fnv1a64(bytes)) + "\n";
    blob += bytes;
  }
  manifest += "end\n";
  return manifest + blob;
}

MvaeModel deserialize_checkpoint(std::string_view bytes) {
  LineReader lines(bytes);
  const std::string expected_header = std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion);
  if (lines.next() != expected_header) {
    throw CheckpointError("not a version " + std::to_string(kCheckpointVersion) + " checkpoint", 0);
  }

  std::string_view model_line = lines.next();
  if (!model_line.starts_with("model ")) throw CheckpointError("expected the model line", lines.line_start());
  ModelConfig config;
  try {
    config = parse_model_config(nlohmann::json::parse(model_line.substr(6)), "checkpoint.model");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("model configuration is not valid JSON: ") + e.what(), lines.line_start() + 6);
  }
  MvaeModel model(std::move(config), 0);

  struct Entry {
    std::size_t line;
    std::string name, shape;
    std::uint64_t offset, nbytes, checksum;
  };
  std::vector<Entry> entries;
  for (;;) {
    std::string_view line = lines.next();
    if (line == "end") break;
    const std::vector<std::string> w = split_words(line);
    if (w.size() != 6 || w[0] != "param") throw CheckpointError("malformed manifest line", lines.line_start());
    const std::size_t at = lines.line_start();
    entries.push_back({at, w[1], w[2], parse_unsigned(w[3], 10, at), parse_unsigned(w[4], 10, at),
                       parse_unsigned(w[5], 16, at)});
  }
  const std::size_t blob_start = lines.position();
  const std::string_view blob = bytes.substr(blob_start);

  const auto& params = model.parameters();
  if (entries.size() != params.size()) {
    throw CheckpointError("checkpoint lists " + std::to_string(entries.size()) + " parameters, the model has " +
                              std::to_string(params.size()),
                          blob_start);
  }
  std::uint64_t expected_offset = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Entry& e = entries[i];
    const Parameter& p = params[i];
    if (e.name != p.name) throw CheckpointError("expected parameter " + p.name + ", found " + e.name, e.line);
    if (e.shape != shape_token(p.value.shape())) {
      throw CheckpointError("parameter " + p.name + " has shape " + e.shape + ", expected " +
                                shape_token(p.value.shape()),
                            e.line);
    }
    if (e.offset != expected_offset || e.nbytes != static_cast<std::uint64_t>(p.value.size()) * 8) {
      throw CheckpointError("parameter " + p.name + " has an inconsistent offset or size", e.line);
    }
    if (e.offset + e.nbytes > blob.size()) {
      throw CheckpointError("parameter " + p.name + " runs past the end of the file", blob_start + blob.size());
    }
    const std::string_view chunk = blob.substr(e.offset, e.nbytes);
    if (fnv1a64(chunk) != e.checksum) {
      throw CheckpointError("checksum mismatch for parameter " + p.name, blob_start + e.offset);
    }
    model.set_parameter(i, Tensor(p.value.shape(), decode_values(chunk)));
    expected_offset += e.nbytes;
  }
  if (expected_offset != blob.size()) {
    throw CheckpointError("unexpected trailing bytes after the last parameter", blob_start + expected_offset);
  }
  return model;
}

void save_checkpoint(const MvaeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

MvaeModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace mvae::cli
