#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace emclt {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter apply(Counter ctr, Key key) noexcept;
};

enum class StreamTag : std::uint8_t {
  Step = 1,
  Init = 2,
  Bridge = 3,
  Reference = 4,
  CouplingA = 5,
  CouplingB = 6,
  Probe = 7,
  Test = 8,
};

/// Random variates addressed by (seed, stream, tag, index); no hidden state
/// other than a one-block cache, so results never depend on call order.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream, StreamTag tag) noexcept;

  double normal(std::uint64_t index) const noexcept;
  /// Uniform on the open interval (0,1).
  double uniform(std::uint64_t index) const noexcept;
  void normals(std::uint64_t first, std::span<double> out) const noexcept;

 private:
  Philox4x32::Counter block(std::uint64_t b) const noexcept;
  Philox4x32::Key key_;
  std::uint32_t stream_lo_, stream_hi_;

  mutable std::uint64_t cached_block_ = ~std::uint64_t{0};
  mutable double cached_[2] = {0.0, 0.0};
};

}  // namespace emclt
