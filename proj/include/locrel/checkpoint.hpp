#pragma once

#include <string>

#include "locrel/net.hpp"

namespace locrel::checkpoint {

/// Everything needed to rebuild the pipeline around a parameter set.
struct Meta {
  net::NetConfig net;
  double alpha = 0.33;  // frequency-cue filter fraction used in training
};

/// Versioned binary container: magic, format version, architecture header,
/// then named parameter tensors and named running-statistic buffers with raw
/// little-endian doubles. Byte-stable for identical inputs.
void save(const std::string& path, const Meta& meta, const net::ParamStore& store);

/// Reads the architecture header only.
Meta peek(const std::string& path);

/// Loads parameters and buffers into an already-constructed network whose
/// architecture must match the stored header; throws IoError otherwise.
void load_into(const std::string& path, net::TwoStreamNet& network);

}  // namespace locrel::checkpoint
