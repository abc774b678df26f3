#pragma once

#include <string>

#include "triagelab/training.hpp"

namespace triagelab {

// Versioned binary container: magic, a JSON header (dims, tokenizer hash,
// provenance, tensor directory) and raw little-endian float32 tensor data.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// "step,loss" CSV of the training curve.
void save_loss_history_csv(const Checkpoint& ckpt, const std::string& path);

}  // namespace triagelab
