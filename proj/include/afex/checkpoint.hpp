#pragma once

#include <stdexcept>
#include <string>

#include "afex/trainer.hpp"

namespace afex {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bumped whenever the schema changes; loaders reject anything else by name.
inline constexpr int kCheckpointFormatVersion = 1;

/// Checkpoint JSON text for a trained model: config, bank parameters,
/// optional surrogate and standardizer, optimizer state. Keys are sorted and
/// numbers use shortest round-trip notation, so serialize(parse(s)) == s.
std::string serialize_checkpoint(const TrainedModel& model);

/// Inverse of serialize_checkpoint; validates structure, version, and the
/// column-order tag, and rejects unknown keys.
TrainedModel parse_checkpoint(const std::string& text);

/// File front ends; writes are atomic.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace afex
