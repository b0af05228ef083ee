#pragma once

#include "gdrift/affinity.hpp"
#include "gdrift/mgda.hpp"
#include "gdrift/trainer.hpp"
#include "gdrift/transport.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gdrift {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DriftConfig drift;  // drift-field and mgda subcommands
  QpOptions mgda;
  TransportSettings transport;
  TrainConfig train;
  std::size_t checkpoint_every = 50;

  // Pushes the top-level seed and mgda options into the nested configs.
  void propagate();
  void validate() const;
};

// Fully-resolved document, pretty-printed JSON with sorted keys.
std::string config_to_string(const ExperimentConfig& c);

// Defaults, overlaid with `document` (if nonempty), then with dotted
// `key=value` overrides whose values are parsed as JSON when possible.
// Unknown keys and ill-typed values raise ConfigError.
ExperimentConfig resolve_config(std::string_view document, const std::vector<std::string>& overrides = {});

// Stable hash of everything that influences a training trajectory.
std::uint64_t train_config_hash(const ExperimentConfig& c);

}  // namespace gdrift
