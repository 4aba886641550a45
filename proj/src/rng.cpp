#include "emclt/rng.hpp"

#include <cmath>
#include <numbers>

namespace emclt {

namespace {
constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;

inline std::uint32_t mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi) noexcept {
  const std::uint64_t p = std::uint64_t{a} * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  return static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t x = (std::uint64_t{hi} << 32) | lo;
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}
}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter c, Key k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, hi1;
    const std::uint32_t lo0 = mulhilo(kMul0, c[0], hi0);
    const std::uint32_t lo1 = mulhilo(kMul1, c[2], hi1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream, StreamTag tag) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(stream)),
      stream_hi_((static_cast<std::uint32_t>(stream >> 32) & 0x00FFFFFFu) |
                 (std::uint32_t{static_cast<std::uint8_t>(tag)} << 24)) {}

Philox4x32::Counter RandomStream::block(std::uint64_t b) const noexcept {
  return Philox4x32::apply({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                            stream_lo_, stream_hi_},
                           key_);
}

double RandomStream::normal(std::uint64_t index) const noexcept {
  const std::uint64_t b = index >> 1;
  if (b != cached_block_) {
    const auto w = block(b);
    const double u1 = to_open_unit(w[0], w[1]);
    const double u2 = to_open_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_[0] = r * std::cos(a);
    cached_[1] = r * std::sin(a);
    cached_block_ = b;
  }
  return cached_[index & 1];
}

double RandomStream::uniform(std::uint64_t index) const noexcept {
  // Offset into a disjoint half of the counter space from normal().
  const auto w = block((index >> 1) | (std::uint64_t{1} << 63));
  return (index & 1) ? to_open_unit(w[2], w[3]) : to_open_unit(w[0], w[1]);
}

void RandomStream::normals(std::uint64_t first, std::span<double> out) const noexcept {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal(first + i);
}

}  // namespace emclt
