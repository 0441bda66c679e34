#pragma once

#include <cstdint>

namespace rkd {

//! Counter-based generator: draw i of a stream is a bijective mix of
//! (key + i * golden), so any (seed, stream, row) triple addresses an
//! independent, reproducible sequence regardless of which worker runs it.
class CounterRng
{
public:
  explicit CounterRng(std::uint64_t key) noexcept
    : key_(key)
  {
  }

  //! Stream for `row` of the process identified by (seed, stream_id).
  static CounterRng stream(std::uint64_t seed, std::uint64_t stream_id,
                           std::uint64_t row) noexcept;

  std::uint64_t next_u64() noexcept;
  //! Uniform on the open interval (0, 1).
  double uniform() noexcept;
  //! Standard normal via Box-Muller.
  double normal() noexcept;

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

//! Stream identifiers used across the library.
namespace streams {
inline constexpr std::uint64_t multiplier = 0x6d756c7469ULL;
inline constexpr std::uint64_t pivotal = 0x7069766f74ULL;
inline constexpr std::uint64_t dgp = 0x646770ULL;
inline constexpr std::uint64_t replication = 0x7265706cULL;
} // namespace streams

} // namespace rkd
