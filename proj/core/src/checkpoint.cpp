#include "safemarl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "safemarl/errors.hpp"
#include "safemarl/maddpg.hpp"

namespace safemarl {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'A', 'R', 'L', 'C', 'K', '\0'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ArtifactError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  bool match(const char* p, std::size_t n) {
    need(n);
    const bool ok = std::memcmp(bytes_.data() + pos_, p, n) == 0;
    pos_ += n;
    return ok;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::string dims_string(const std::vector<int>& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  return os.str();
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::vector<const Mlp*> nets;
  for (int i = 0; i < kNumAgents; ++i) {
    nets.push_back(&checkpoint.actors[i]);
    nets.push_back(&checkpoint.critics[i]);
  }
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(nets.size()));
  for (const Mlp* n : nets) {
    w.u32(static_cast<std::uint32_t>(n->hidden_activation()));
    w.u32(static_cast<std::uint32_t>(n->head_activation()));
    w.f64(n->head_scale());
    w.u32(static_cast<std::uint32_t>(n->dims().size()));
    for (int d : n->dims()) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const Mlp* n : nets) {
    const auto& p = n->parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) w.f64(p(i));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("checkpoint: cannot open " + path.string() + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw ArtifactError("checkpoint: write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("checkpoint: cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (!r.match(kMagic, sizeof kMagic)) throw ArtifactError("checkpoint: bad magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ArtifactError("checkpoint: unsupported version " + std::to_string(version) +
                        " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = r.u32();
  if (count != 2 * kNumAgents) {
    throw ArtifactError("checkpoint: expected " + std::to_string(2 * kNumAgents) +
                        " networks, found " + std::to_string(count));
  }
  std::vector<Mlp> nets;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto hidden = r.u32();
    const auto head = r.u32();
    const double scale = r.f64();
    if (hidden > 2 || head > 2) throw ArtifactError("checkpoint: unknown activation code");
    const std::uint32_t n_dims = r.u32();
    if (n_dims < 2 || n_dims > 64) throw ArtifactError("checkpoint: implausible layer count");
    std::vector<int> dims;
    for (std::uint32_t i = 0; i < n_dims; ++i) {
      const std::uint32_t d = r.u32();
      if (d == 0 || d > (1u << 20)) throw ArtifactError("checkpoint: implausible layer size");
      dims.push_back(static_cast<int>(d));
    }
    nets.emplace_back(dims, static_cast<Activation>(hidden), static_cast<Activation>(head), scale);
  }
  for (auto& n : nets) {
    auto& p = n.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = r.f64();
  }
  if (!r.at_end()) throw ArtifactError("checkpoint: trailing bytes in " + path.string());
  Checkpoint c;
  for (int i = 0; i < kNumAgents; ++i) {
    c.actors[i] = std::move(nets[2 * i]);
    c.critics[i] = std::move(nets[2 * i + 1]);
  }
  return c;
}

void check_architecture(const Checkpoint& checkpoint, int obs_dim, int hidden) {
  const std::vector<int> actor = {obs_dim, hidden, hidden, 2};
  const std::vector<int> critic = {obs_dim * kNumAgents + 2 * kNumAgents, hidden, hidden, 1};
  for (int i = 0; i < kNumAgents; ++i) {
    if (checkpoint.actors[i].dims() != actor) {
      throw ArtifactError("checkpoint: actor " + std::to_string(i) + " expected dims " +
                          dims_string(actor) + ", found " +
                          dims_string(checkpoint.actors[i].dims()));
    }
    if (checkpoint.critics[i].dims() != critic) {
      throw ArtifactError("checkpoint: critic " + std::to_string(i) + " expected dims " +
                          dims_string(critic) + ", found " +
                          dims_string(checkpoint.critics[i].dims()));
    }
  }
}

}  // namespace safemarl
