#include "fescycle/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace fes {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'E', 'S', 'P', 'O', 'L', 'C', 'Y'};

class Writer {
public:
  void bytes(const void *data, std::size_t n) {
    const auto *p = static_cast<const std::uint8_t *>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
  std::vector<std::uint8_t> &buffer() { return out_; }

private:
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  Reader(const std::uint8_t *data, std::size_t size) : data_(data), size_(size) {}

  void need(std::size_t n) const {
    if (size_ - pos_ < n) {
      throw CheckpointError("checkpoint truncated");
    }
  }
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    }
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    }
    return std::bit_cast<double>(bits);
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char *>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == size_; }

private:
  const std::uint8_t *data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_net(Writer &w, const nnet::DenseNet &net) {
  const auto &layers = net.layers();
  w.u32(static_cast<std::uint32_t>(layers.size()));
  w.u32(static_cast<std::uint32_t>(net.input_dim()));
  for (const auto &l : layers) {
    w.u32(static_cast<std::uint32_t>(l.out_dim()));
    w.u8(static_cast<std::uint8_t>(l.activation));
  }
  for (const auto &l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        w.f64(l.weight(r, c));
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      w.f64(l.bias(r));
    }
  }
}

nnet::DenseNet read_net(Reader &r) {
  constexpr std::uint32_t kMaxLayers = 64;
  constexpr std::uint32_t kMaxWidth = 1u << 16;
  const auto count = r.u32();
  const auto input = r.u32();
  if (count == 0 || count > kMaxLayers || input == 0 || input > kMaxWidth) {
    throw CheckpointError("checkpoint has an implausible network header");
  }
  std::vector<nnet::Layer> layers(count);
  std::uint32_t in = input;
  for (auto &l : layers) {
    const auto out = r.u32();
    const auto act = r.u8();
    if (out == 0 || out > kMaxWidth || act > 2) {
      throw CheckpointError("checkpoint has an invalid layer descriptor");
    }
    l.weight.resize(out, in);
    l.bias.resize(out);
    l.activation = static_cast<nnet::Activation>(act);
    in = out;
  }
  for (auto &l : layers) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
        l.weight(i, j) = r.f64();
      }
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
      l.bias(i) = r.f64();
    }
  }
  return nnet::DenseNet(std::move(layers));
}

} // namespace

std::uint32_t crc32(const std::uint8_t *data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      ::crc32_z(crc, reinterpret_cast<const Bytef *>(data), size));
}

std::vector<std::uint8_t> PolicyCheckpoint::serialize() const {
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(mode));
  w.f64(normalization.theta_scale);
  w.f64(normalization.cadence_scale);
  w.f64(normalization.desired_scale);
  w.f64(normalization.max_entry);
  w.u32(critic ? 2u : 1u);
  write_net(w, actor);
  if (critic) {
    write_net(w, *critic);
  }
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  w.bytes(metadata.data(), metadata.size());
  auto &buf = w.buffer();
  w.u32(crc32(buf.data(), buf.size()));
  return std::move(buf);
}

PolicyCheckpoint PolicyCheckpoint::deserialize(const std::vector<std::uint8_t> &bytes,
                                               std::optional<env::Mode> expected) {
  if (bytes.size() < kMagic.size() + 8) {
    throw CheckpointError("checkpoint truncated");
  }
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc32(bytes.data(), body)) {
    throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated file)");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw CheckpointError("not a policy checkpoint (bad magic)");
  }
  Reader r(bytes.data() + kMagic.size(), body - kMagic.size());
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  PolicyCheckpoint ckpt;
  const auto mode = r.u8();
  if (mode > 1) {
    throw CheckpointError("checkpoint has an unknown mode tag");
  }
  ckpt.mode = static_cast<env::Mode>(mode);
  ckpt.normalization.theta_scale = r.f64();
  ckpt.normalization.cadence_scale = r.f64();
  ckpt.normalization.desired_scale = r.f64();
  ckpt.normalization.max_entry = r.f64();
  const auto nets = r.u32();
  if (nets != 1 && nets != 2) {
    throw CheckpointError("checkpoint must hold one or two networks");
  }
  ckpt.actor = read_net(r);
  if (nets == 2) {
    ckpt.critic = read_net(r);
  }
  ckpt.metadata = r.text(r.u32());
  if (!r.done()) {
    throw CheckpointError("checkpoint has trailing bytes");
  }
  if (expected) {
    const auto want = env::Observation::dim(*expected);
    if (ckpt.mode != *expected ||
        static_cast<std::size_t>(ckpt.actor.input_dim()) != want) {
      throw CheckpointError(std::string("checkpoint is a ") + env::mode_name(ckpt.mode) +
                            " policy with input width " +
                            std::to_string(ckpt.actor.input_dim()) + ", expected a " +
                            env::mode_name(*expected) + " policy with width " +
                            std::to_string(want));
    }
  }
  return ckpt;
}

void PolicyCheckpoint::save(const std::filesystem::path &path) const {
  const auto bytes = serialize();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char *>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) {
    throw CheckpointError("cannot write checkpoint " + path.string());
  }
}

PolicyCheckpoint PolicyCheckpoint::load(const std::filesystem::path &path,
                                        std::optional<env::Mode> expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw CheckpointError("cannot open checkpoint " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes, expected);
}

env::Policy PolicyCheckpoint::policy() const {
  return [net = actor](const env::Observation &obs) {
    const auto v = obs.to_vector();
    const Eigen::VectorXd out = net.forward(nnet::to_eigen(v));
    env::Action a{};
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::clamp(out(static_cast<Eigen::Index>(i)), 0.0, 1.0);
    }
    return a;
  };
}

} // namespace fes
