#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dmgae/training.hpp"

namespace dmgae {

// Collects every problem found while reading a configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

using KeyValues = std::map<std::string, std::string>;

// Flat "key = value" lines; '#' starts a comment. Later keys win.
KeyValues parse_key_values(std::string_view text, std::vector<std::string>& problems);
KeyValues read_key_value_file(const std::string& path, std::vector<std::string>& problems);

// Applies overrides onto `base`. Unknown keys and unparsable values are
// appended to `problems`.
TrainConfig apply_overrides(const KeyValues& values, TrainConfig base,
                            std::vector<std::string>& problems);

// Every key with its resolved value, in canonical text form.
KeyValues to_key_values(const TrainConfig& cfg);
std::string to_config_text(const TrainConfig& cfg);

const std::vector<std::string>& config_keys();

}  // namespace dmgae
