#include "skipfree/rng.hpp"

#include <cmath>

namespace skipfree {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

ReplicateStream::ReplicateStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t replicate)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_{static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32), 0u,
           static_cast<std::uint32_t>(stream_id)} {}

void ReplicateStream::refill() {
  buf_ = Philox4x32::block(ctr_, key_);
  ++ctr_[2];
  used_ = 0;
}

double ReplicateStream::uniform() {
  if (used_ > 2) refill();
  const std::uint64_t bits = (static_cast<std::uint64_t>(buf_[used_]) << 32) | buf_[used_ + 1];
  used_ += 2;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double ReplicateStream::exponential(double rate) { return -std::log(uniform()) / rate; }

}  // namespace skipfree
