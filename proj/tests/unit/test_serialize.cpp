#include <gtest/gtest.h>

#include <string>

#include "loralab/errors.hpp"
#include "loralab/serialize.hpp"
#include "test_util.hpp"

namespace {

using loralab::InvalidInput;
using loralab::num::RngState;
namespace io = loralab::io;
namespace net = loralab::net;

net::Architecture small_arch() {
  net::Architecture a;
  a.d = 3;
  a.D = 2;
  a.T = 2;
  a.W = 5;
  a.r = 2;
  a.activation = net::Activation::tanh();
  return a;
}

TEST(Serialize, PretrainedRoundTripIsBitExact) {
  RngState rng(1);
  const auto pre = net::random_pretrained(rng, small_arch(), 1.0, 0.7);
  const auto text = io::to_json(pre).dump();
  const auto back = io::pretrained_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.arch, pre.arch);
  EXPECT_EQ(back.weights, pre.weights);
  EXPECT_EQ(back.biases, pre.biases);
}

TEST(Serialize, AdapterRoundTripKeepsFactorAndChecksum) {
  RngState rng(2);
  for (auto factor : {net::Factor::A, net::Factor::B}) {
    auto ad = net::init_adapter(rng, small_arch(), 0.3, 0.5, factor);
    for (std::size_t t = 0; t < ad.layers(); ++t)
      for (double& v : ad.trainable(t).entries()) v = rng.uniform() - 0.5;
    const auto back = io::adapter_from_json(nlohmann::json::parse(io::to_json(ad).dump()));
    EXPECT_EQ(back.trained_factor(), factor);
    EXPECT_EQ(back.frozen_checksum(), ad.frozen_checksum());
    EXPECT_EQ(back.trainable(), ad.trainable());
    EXPECT_EQ(back.box_bound(), 0.5);
    EXPECT_EQ(back.init_scale(), 0.3);
  }
}

TEST(Serialize, AwkwardDoublesRoundTrip) {
  loralab::num::Matrix m(1, 4);
  m(0, 0) = 0.1;
  m(0, 1) = 1.0 / 3.0;
  m(0, 2) = 5e-324;
  m(0, 3) = -1.7976931348623157e308;
  EXPECT_EQ(io::matrix_from_json(nlohmann::json::parse(io::to_json(m).dump())), m);
}

TEST(Serialize, RejectsWrongDocumentsAndOutOfBoxAdapters) {
  RngState rng(3);
  const auto pre = net::random_pretrained(rng, small_arch());
  auto j = io::to_json(pre);
  EXPECT_THROW(io::adapter_from_json(j), InvalidInput);
  j["version"] = 99;
  EXPECT_THROW(io::pretrained_from_json(j), InvalidInput);

  auto ad = net::init_adapter(rng, small_arch(), 1.0, 0.5);
  auto aj = io::to_json(ad);
  aj["trainable"][0]["data"][0] = 2.0;
  EXPECT_THROW(io::adapter_from_json(aj), InvalidInput);
  aj = io::to_json(ad);
  aj["trainable"][0]["data"].erase(0);
  EXPECT_THROW(io::adapter_from_json(aj), InvalidInput);
}

TEST(Serialize, TextFiles) {
  loralab::testing::TempDir dir("serialize");
  const auto path = dir.file("x.txt");
  io::write_text_file(path, "hello\n");
  EXPECT_EQ(io::read_text_file(path), "hello\n");
  EXPECT_THROW(io::read_text_file(dir.file("missing.txt")), InvalidInput);
  EXPECT_THROW(io::write_text_file(dir.file("no/such/dir/x"), "x"), loralab::Error);
}

}  // namespace
