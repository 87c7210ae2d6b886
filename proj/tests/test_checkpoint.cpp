#include <doctest.h>

#include <array>
#include <cstring>
#include <filesystem>
#include <random>

#include "fescycle/checkpoint.hpp"

using namespace fes;

namespace {

PolicyCheckpoint make(env::Mode mode, bool with_critic, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int in = static_cast<int>(env::Observation::dim(mode));
  const std::array actor_dims{in, 32, 32, 6};
  const std::array critic_dims{in + 6, 32, 32, 1};
  PolicyCheckpoint c;
  c.mode = mode;
  c.normalization.cadence_scale = 12.5;
  c.actor = nnet::DenseNet::create(actor_dims, nnet::Activation::Relu,
                                   nnet::Activation::Sigmoid, rng, 0.7);
  if (with_critic) {
    c.critic = nnet::DenseNet::create(critic_dims, nnet::Activation::Relu,
                                      nnet::Activation::Identity, rng);
  }
  c.metadata = R"({"episodes": 3})";
  return c;
}

void reseal(std::vector<std::uint8_t> &bytes) {
  const std::size_t body = bytes.size() - 4;
  const std::uint32_t crc = crc32(bytes.data(), body);
  for (int i = 0; i < 4; ++i) {
    bytes[body + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(crc >> (8 * i));
  }
}

} // namespace

TEST_CASE("crc32 check value") {
  const char *text = "123456789";
  CHECK(crc32(reinterpret_cast<const std::uint8_t *>(text), 9) == 0xCBF43926u);
}

TEST_CASE("round trip preserves forward outputs bit-exactly") {
  for (auto mode : {env::Mode::Starter, env::Mode::Tracker}) {
    const auto original = make(mode, true, 1);
    const auto bytes = original.serialize();
    const auto loaded = PolicyCheckpoint::deserialize(bytes, mode);
    CHECK(loaded.mode == mode);
    CHECK(loaded.normalization.cadence_scale == 12.5);
    CHECK(loaded.metadata == original.metadata);
    REQUIRE(loaded.critic.has_value());
    CHECK(loaded.serialize() == bytes);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd x(original.actor.input_dim());
      for (auto &v : x) {
        v = n01(rng);
      }
      const Eigen::VectorXd a = original.actor.forward(x), b = loaded.actor.forward(x);
      CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 6) == 0);
    }
  }
}

TEST_CASE("actor-only checkpoints round-trip through a file") {
  const auto original = make(env::Mode::Tracker, false, 3);
  const auto path = std::filesystem::temp_directory_path() / "fescycle_test_ckpt.bin";
  original.save(path);
  const auto loaded = PolicyCheckpoint::load(path);
  std::filesystem::remove(path);
  CHECK_FALSE(loaded.critic.has_value());
  CHECK(nnet::max_parameter_distance(original.actor, loaded.actor) == 0.0);
  CHECK_THROWS_AS(PolicyCheckpoint::load(path), CheckpointError);
}

TEST_CASE("byte layout is little-endian with a versioned header") {
  const auto bytes = make(env::Mode::Tracker, false, 4).serialize();
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "FESPOLCY");
  CHECK(bytes[8] == kCheckpointVersion);
  CHECK(bytes[9] == 0);
  CHECK(bytes[10] == 0);
  CHECK(bytes[11] == 0);
  CHECK(bytes[12] == 1);
}

TEST_CASE("truncated or corrupted bytes fail the checksum") {
  const auto bytes = make(env::Mode::Starter, true, 5).serialize();
  auto cut = bytes;
  cut.resize(bytes.size() - 100);
  CHECK_THROWS_AS(PolicyCheckpoint::deserialize(cut), CheckpointError);
  cut.resize(5);
  CHECK_THROWS_AS(PolicyCheckpoint::deserialize(cut), CheckpointError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_WITH_AS(PolicyCheckpoint::deserialize(flipped),
                       doctest::Contains("checksum"), CheckpointError);
}

TEST_CASE("unsupported version is rejected") {
  auto bytes = make(env::Mode::Starter, false, 6).serialize();
  bytes[8] = 99;
  reseal(bytes);
  CHECK_THROWS_WITH_AS(PolicyCheckpoint::deserialize(bytes), doctest::Contains("version"),
                       CheckpointError);
}

TEST_CASE("starter checkpoints refuse to load as tracker") {
  const auto bytes = make(env::Mode::Starter, false, 7).serialize();
  CHECK_NOTHROW(PolicyCheckpoint::deserialize(bytes, env::Mode::Starter));
  CHECK_THROWS_AS(PolicyCheckpoint::deserialize(bytes, env::Mode::Tracker), CheckpointError);

  // A mode tag that disagrees with the actor width is also refused.
  auto lying = bytes;
  lying[12] = 1;
  reseal(lying);
  CHECK_THROWS_AS(PolicyCheckpoint::deserialize(lying, env::Mode::Tracker), CheckpointError);
}

TEST_CASE("policy closure clamps and reads the observation vector") {
  const auto ckpt = make(env::Mode::Tracker, false, 8);
  const auto policy = ckpt.policy();
  mech::RigState s;
  s.theta = 1.0;
  s.theta_dot = 4.0;
  const auto obs = env::Observation::build(env::Mode::Tracker, s, 6.0);
  const auto a = policy(obs);
  const Eigen::VectorXd direct = ckpt.actor.forward(nnet::to_eigen(obs.to_vector()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == direct(static_cast<Eigen::Index>(i)));
    CHECK(a[i] >= 0.0);
    CHECK(a[i] <= 1.0);
  }
}
