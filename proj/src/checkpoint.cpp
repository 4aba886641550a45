#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "engine_state.hpp"

// Internal, host-endian format:
//   magic[8] "EMCLTCK1" | u32 version | str hash | u64 first | u64 chains | u64 done
//   then per chain: state block, accumulator block.
namespace emclt::detail {

namespace {
constexpr char kMagic[8] = {'E', 'M', 'C', 'L', 'T', 'C', 'K', '1'};
constexpr std::uint32_t kFormat = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& o) : out_(o) {}
  template <class T>
  void pod(const T& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void vec(const std::vector<double>& v) {
    pod<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  }
  void sum(const CompensatedSum& s) { pod(s.raw_sum()); pod(s.raw_comp()); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& i) : in_(i) {}
  template <class T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw std::runtime_error("truncated checkpoint");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 20)) throw std::runtime_error("corrupt checkpoint string");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    return s;
  }
  std::vector<double> vec() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ull << 32)) throw std::runtime_error("corrupt checkpoint vector");
    std::vector<double> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
    if (!in_) throw std::runtime_error("truncated checkpoint");
    return v;
  }
  CompensatedSum sum() {
    CompensatedSum s;
    const double a = pod<double>(), b = pod<double>();
    s.restore(a, b);
    return s;
  }

 private:
  std::ifstream& in_;
};
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                     const std::vector<ChainState>& states,
                     const std::vector<ChainAccumulator>& accs) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.pod(kFormat);
    w.str(header.config_hash);
    w.pod(header.first_chain);
    w.pod(header.chains);
    w.pod(header.steps_done);
    for (std::size_t c = 0; c < states.size(); ++c) {
      const auto& s = states[c];
      for (double x : s.theta) w.pod(x);
      w.pod<std::uint64_t>(s.k);
      w.pod<std::uint64_t>(s.sums.size());
      for (const auto& x : s.sums) w.sum(x);
      for (const auto* x : {&s.stat, &s.martingale, &s.r0, &s.r1, &s.r2, &s.z_sq}) w.sum(*x);
      w.pod(s.z_abs_max);
      w.pod<std::uint8_t>(s.stopped);

      const auto& a = accs[c];
      w.pod(a.chain_id);
      w.vec(a.sum_h);
      w.vec(a.snapshots);
      w.vec(a.terminal);
      w.vec(a.moments);
      w.pod<std::uint64_t>(a.phi.size());
      for (const auto& t : a.phi) w.pod(t);
      w.pod<std::uint8_t>(a.diverged);
      w.pod(a.diverged_at);
    }
    if (!out) throw std::runtime_error("checkpoint write failed");
  }
  std::filesystem::rename(tmp, path);
}

bool load_checkpoint(const std::filesystem::path& path, const CheckpointHeader& expect,
                     std::vector<ChainState>& states, std::vector<ChainAccumulator>& accs,
                     std::uint64_t& steps_done) {
  if (!std::filesystem::exists(path)) return false;
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  Reader r(in);
  if (r.pod<std::uint32_t>() != kFormat) throw std::runtime_error("checkpoint format mismatch");
  CheckpointHeader h;
  h.config_hash = r.str();
  h.first_chain = r.pod<std::uint64_t>();
  h.chains = r.pod<std::uint64_t>();
  h.steps_done = r.pod<std::uint64_t>();
  if (h.config_hash != expect.config_hash || h.first_chain != expect.first_chain ||
      h.chains != expect.chains)
    throw std::runtime_error(
        fmt::format("checkpoint {} belongs to a different run", path.string()));
  states.assign(h.chains, {});
  accs.assign(h.chains, {});
  for (std::size_t c = 0; c < h.chains; ++c) {
    auto& s = states[c];
    for (double& x : s.theta) x = r.pod<double>();
    s.k = r.pod<std::uint64_t>();
    s.sums.resize(r.pod<std::uint64_t>());
    for (auto& x : s.sums) x = r.sum();
    for (auto* x : {&s.stat, &s.martingale, &s.r0, &s.r1, &s.r2, &s.z_sq}) *x = r.sum();
    s.z_abs_max = r.pod<double>();
    s.stopped = r.pod<std::uint8_t>() != 0;

    auto& a = accs[c];
    a.chain_id = r.pod<std::uint64_t>();
    a.sum_h = r.vec();
    a.snapshots = r.vec();
    a.terminal = r.vec();
    a.moments = r.vec();
    a.phi.resize(r.pod<std::uint64_t>());
    for (auto& t : a.phi) t = r.pod<PhiTally>();
    a.diverged = r.pod<std::uint8_t>() != 0;
    a.diverged_at = r.pod<std::uint64_t>();
  }
  steps_done = h.steps_done;
  return true;
}

}  // namespace emclt::detail
