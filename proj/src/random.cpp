#include "rkd/random.hpp"

#include <cmath>
#include <numbers>

namespace rkd {

namespace {
constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t
mix64(std::uint64_t z) noexcept
{
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CounterRng
CounterRng::stream(std::uint64_t seed, std::uint64_t stream_id,
                   std::uint64_t row) noexcept
{
  std::uint64_t k = mix64(seed + golden);
  k = mix64(k ^ (stream_id * 0xd1342543de82ef95ULL + 1));
  k = mix64(k ^ (row * golden + 0x632be59bd9b4e019ULL));
  return CounterRng(k);
}

std::uint64_t
CounterRng::next_u64() noexcept
{
  ++counter_;
  return mix64(key_ + counter_ * golden);
}

double
CounterRng::uniform() noexcept
{
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double
CounterRng::normal() noexcept
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

} // namespace rkd
