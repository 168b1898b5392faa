#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mstack {

// All simulation randomness flows from one root seed through named streams so
// any subsystem can be re-seeded in isolation.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }

  // Deterministic child seed for a named stream.
  std::uint64_t derive(std::string_view name) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    for (const char c : name) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 1099511628211ull;
    }
    return splitmix(root_ ^ h);
  }

  std::mt19937_64 stream(std::string_view name) const {
    return std::mt19937_64(derive(name));
  }

  // Unit-normal draw scaled by sigma. A fresh distribution per call keeps the
  // engine-to-value mapping deterministic (no cached spare) and makes
  // sigma = 0 exact.
  static double draw_normal(std::mt19937_64& rng, double sigma) {
    std::normal_distribution<double> unit(0.0, 1.0);
    return sigma * unit(rng);
  }

  static double draw_uniform(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng);
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t root_;
};

}  // namespace mstack
