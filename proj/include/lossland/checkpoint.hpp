#pragma once

#include <stdexcept>
#include <string>

#include "lossland/models.hpp"

namespace lossland {

enum class CheckpointErrorKind {
    BadMagic,
    VersionMismatch,
    PayloadLengthMismatch,
    ManifestMismatch,
    Io,
};

class CheckpointError : public std::runtime_error {
  public:
    CheckpointError(CheckpointErrorKind kind, const std::string &msg)
        : std::runtime_error(msg), kind_(kind) {}
    CheckpointErrorKind kind() const { return kind_; }

  private:
    CheckpointErrorKind kind_;
};

/// Binary model checkpoint: magic "MSCP", format version, JSON header with the
/// architecture spec and an ordered parameter manifest, then little-endian
/// float32 payload (parameters, then batchnorm running stats). Save -> load ->
/// save is byte-identical.
void save_checkpoint(const ModelState &state, const std::string &path);
ModelState load_checkpoint(const std::string &path);

}  // namespace lossland
