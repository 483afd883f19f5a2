#ifndef MVAE_CLI_CHECKPOINT_HPP
#define MVAE_CLI_CHECKPOINT_HPP

#include "mvae/error.hpp"
#include "mvae/model.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace mvae::cli {

// Text manifest followed by a binary blob:
//
//   MVAECKPT 1
//   model {"latent_dim":...}
//   param <name> <shape, e.g. 64x128> <byte offset> <byte count> <fnv1a64 hex>
//   ...
//   end
//   <little-endian float64 values of every parameter, in manifest order>
//
// Offsets count from the first byte after "end\n".
inline constexpr std::string_view kCheckpointMagic = "MVAECKPT";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public FormatError {
 public:
  using FormatError::FormatError;
};

std::uint64_t fnv1a64(std::string_view bytes);

std::string serialize_checkpoint(const MvaeModel& model);
// Rebuilds the model from the embedded configuration and verifies every
// parameter's name, shape, extent and checksum.
MvaeModel deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const MvaeModel& model, const std::string& path);
MvaeModel load_checkpoint(const std::string& path);

}  // namespace mvae::cli

#endif  // MVAE_CLI_CHECKPOINT_HPP
