#include "loralab/serialize.hpp"

#include <fstream>
#include <sstream>

#include "loralab/errors.hpp"

namespace loralab::io {

using nlohmann::json;

namespace {

void expect_format(const json& j, const char* kind) {
  if (!j.is_object() || j.value("format", "") != kind) {
    throw InvalidInput(std::string("expected a '") + kind + "' document");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw InvalidInput(std::string(kind) + ": unsupported version");
  }
}

template <class T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw InvalidInput(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const net::Architecture& arch) {
  return json{{"d", arch.d},
              {"D", arch.D},
              {"T", arch.T},
              {"W", arch.W},
              {"r", arch.r},
              {"activation", arch.activation.name()}};
}

net::Architecture architecture_from_json(const json& j) {
  net::Architecture a;
  a.d = get_field<std::size_t>(j, "d");
  a.D = get_field<std::size_t>(j, "D");
  a.T = get_field<std::size_t>(j, "T");
  a.W = get_field<std::size_t>(j, "W");
  a.r = get_field<std::size_t>(j, "r");
  a.activation = net::Activation::from_name(get_field<std::string>(j, "activation"));
  a.validate_shapes();
  return a;
}

json to_json(const num::Matrix& m) {
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", std::vector<double>(m.entries().begin(), m.entries().end())}};
}

num::Matrix matrix_from_json(const json& j) {
  num::Matrix m(get_field<std::size_t>(j, "rows"), get_field<std::size_t>(j, "cols"),
                get_field<std::vector<double>>(j, "data"));
  if (!m.all_finite()) throw InvalidInput("matrix entries must be finite");
  return m;
}

json to_json(const net::PretrainedNet& net) {
  json weights = json::array();
  for (const auto& w : net.weights) weights.push_back(to_json(w));
  return json{{"format", "loralab/pretrained-net"},
              {"version", kFormatVersion},
              {"arch", to_json(net.arch)},
              {"weights", weights},
              {"biases", net.biases}};
}

net::PretrainedNet pretrained_from_json(const json& j) {
  expect_format(j, "loralab/pretrained-net");
  net::PretrainedNet net;
  net.arch = architecture_from_json(j.at("arch"));
  for (const auto& w : j.at("weights")) net.weights.push_back(matrix_from_json(w));
  net.biases = get_field<std::vector<std::vector<double>>>(j, "biases");
  net.validate();
  return net;
}

json to_json(const net::LoraAdapter& adapter) {
  json frozen = json::array();
  json trainable = json::array();
  for (const auto& m : adapter.frozen()) frozen.push_back(to_json(m));
  for (const auto& m : adapter.trainable()) trainable.push_back(to_json(m));
  return json{{"format", "loralab/lora-adapter"},
              {"version", kFormatVersion},
              {"arch", to_json(adapter.arch())},
              {"trained_factor", adapter.trained_factor() == net::Factor::A ? "A" : "B"},
              {"box_bound", adapter.box_bound()},
              {"init_scale", adapter.init_scale()},
              {"frozen", frozen},
              {"trainable", trainable}};
}

net::LoraAdapter adapter_from_json(const json& j) {
  expect_format(j, "loralab/lora-adapter");
  const auto factor = get_field<std::string>(j, "trained_factor");
  if (factor != "A" && factor != "B") throw InvalidInput("trained_factor must be A or B");
  std::vector<num::Matrix> frozen;
  std::vector<num::Matrix> trainable;
  for (const auto& m : j.at("frozen")) frozen.push_back(matrix_from_json(m));
  for (const auto& m : j.at("trainable")) trainable.push_back(matrix_from_json(m));
  net::LoraAdapter adapter(architecture_from_json(j.at("arch")), std::move(frozen),
                           std::move(trainable), get_field<double>(j, "box_bound"),
                           get_field<double>(j, "init_scale"),
                           factor == "A" ? net::Factor::A : net::Factor::B);
  if (adapter.max_abs_trainable() > adapter.box_bound()) {
    throw InvalidInput("trainable entries exceed the box bound");
  }
  return adapter;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace loralab::io
