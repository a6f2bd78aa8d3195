#include "congrad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace congrad {

namespace {

constexpr char kMagic[16] = {'C', 'O', 'N', 'G', 'R', 'A', 'D', 'S',
                             'N', 'A', 'P', 'S', 'H', 'O', 'T', '\0'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i)
      x |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    return x;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
  }
};

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<CheckpointBlock>& blocks) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  out.push_back(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(blocks.size()));
  for (const CheckpointBlock& b : blocks) {
    if (b.data.size() != static_cast<std::size_t>(b.rows) * b.cols)
      throw std::invalid_argument("checkpoint block data size does not match " +
                                  std::to_string(b.rows) + "x" +
                                  std::to_string(b.cols));
    out.push_back(static_cast<char>(b.role));
    put_u32(out, b.rows);
    put_u32(out, b.cols);
  }
  for (const CheckpointBlock& b : blocks)
    for (double x : b.data) put_f64(out, x);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint file '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint file '" + path + "'");
}

std::vector<CheckpointBlock> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint file '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  Reader r{buf};
  r.need(sizeof(kMagic));
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic)");
  r.pos = sizeof(kMagic);
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<CheckpointBlock> blocks(count);
  for (auto& b : blocks) {
    const std::uint8_t role = r.u8();
    if (role > 3)
      throw std::runtime_error("unknown checkpoint block role " +
                               std::to_string(role));
    b.role = static_cast<BlockRole>(role);
    b.rows = r.u32();
    b.cols = r.u32();
  }
  for (auto& b : blocks) {
    b.data.resize(static_cast<std::size_t>(b.rows) * b.cols);
    for (double& x : b.data) x = r.f64();
  }
  if (r.pos != buf.size())
    throw std::runtime_error("trailing bytes after checkpoint payload");
  return blocks;
}

std::vector<CheckpointBlock> checkpoint_blocks(const PolicyParams& policy,
                                               const CriticParams& critic) {
  std::vector<CheckpointBlock> blocks;
  const PolicyLayout& l = policy.layout;
  if (l.kind == PolicyKind::Mlp) {
    CheckpointBlock b;
    b.role = BlockRole::Backbone;
    b.rows = static_cast<std::uint32_t>(l.hidden);
    b.cols = static_cast<std::uint32_t>(l.obs_dim + 1);
    b.data = policy.backbone;
    blocks.push_back(std::move(b));
  }
  for (const Vec& head : policy.heads) {
    CheckpointBlock b;
    b.role = BlockRole::Head;
    if (l.kind == PolicyKind::Tabular) {
      b.rows = static_cast<std::uint32_t>(l.obs_count);
      b.cols = static_cast<std::uint32_t>(l.num_actions);
    } else {
      b.rows = static_cast<std::uint32_t>(l.num_actions);
      b.cols = static_cast<std::uint32_t>(l.hidden + 1);
    }
    b.data = head;
    blocks.push_back(std::move(b));
  }
  CheckpointBlock c;
  c.role = BlockRole::Critic;
  c.rows = 1;
  c.cols = static_cast<std::uint32_t>(critic.w.size());
  c.data = critic.w;
  blocks.push_back(std::move(c));
  return blocks;
}

std::vector<CheckpointBlock> checkpoint_blocks(const Vec& theta) {
  CheckpointBlock b;
  b.role = BlockRole::RawTheta;
  b.rows = 1;
  b.cols = static_cast<std::uint32_t>(theta.size());
  b.data = theta;
  return {b};
}

}  // namespace congrad
