#include "flowbind/rng.hpp"

namespace flowbind {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

StreamKey StreamKey::child(std::uint64_t tag) const {
  return {splitmix64(value ^ splitmix64(tag + 0x632be59bd9b4e019ULL))};
}

StreamKey StreamKey::child(std::string_view tag) const {
  // FNV-1a over the tag bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return child(h);
}

Random::Random(StreamKey key) : engine_(splitmix64(key.value)) {}

std::size_t Random::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double Random::gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

double Random::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

}  // namespace flowbind
