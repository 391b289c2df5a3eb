#pragma once

#include <string>

#include "json.hpp"
#include "loralab/netcore.hpp"

namespace loralab::io {

// Portable JSON documents for networks and adapters. Doubles are written in
// the shortest decimal form that round-trips exactly.
inline constexpr int kFormatVersion = 1;

nlohmann::json to_json(const net::Architecture& arch);
net::Architecture architecture_from_json(const nlohmann::json& j);

nlohmann::json to_json(const num::Matrix& m);
num::Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const net::PretrainedNet& net);
net::PretrainedNet pretrained_from_json(const nlohmann::json& j);

nlohmann::json to_json(const net::LoraAdapter& adapter);
net::LoraAdapter adapter_from_json(const nlohmann::json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace loralab::io
