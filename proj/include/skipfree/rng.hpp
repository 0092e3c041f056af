#pragma once

#include <array>
#include <cstdint>

namespace skipfree {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// Uniform and exponential draws for one replicate. The counter is
/// (replicate, draw block, stream), the key is the seed, so a replicate's
/// draws do not depend on which worker runs it or in which order.
class ReplicateStream {
 public:
  ReplicateStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t replicate);

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double exponential(double rate);

 private:
  void refill();

  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  Philox4x32::Counter buf_{};
  int used_ = 4;
};

}  // namespace skipfree
