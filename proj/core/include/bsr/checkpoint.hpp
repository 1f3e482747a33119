#pragma once

#include <stdexcept>
#include <string>

#include "bsr/model.hpp"

namespace bsr {

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { BadMagic, VersionMismatch, Truncated, Malformed, Io };
    CheckpointError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Little-endian binary container: magic, format version, architecture id,
// input shape, class count, then each parameter as name + extents + float32
// payload in declaration order. Round trips are bit-exact. Writes go through
// a temp file and rename so a crash never leaves a half-written checkpoint.
void save_checkpoint(const Classifier& model, const std::string& path);
Classifier load_checkpoint(const std::string& path);

}  // namespace bsr
