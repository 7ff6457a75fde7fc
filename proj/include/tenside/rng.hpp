#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tenside::rng {

// splitmix64 finalizer, used to mix stream path words into a seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic generator addressed by (seed, path). Streams with distinct
// paths are independent, so parallel draws never share generator state and
// results do not depend on the thread count.
class Stream {
 public:
  Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(seed ^ 0x6a09e667f3bcc908ull);
    for (auto w : path) s = mix64(s ^ mix64(w));
    engine_.seed(s);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> d(shape, 1.0 / rate);
    return d(engine_);
  }
  double chisq(double dof) {
    std::chi_squared_distribution<double> d(dof);
    return d(engine_);
  }
  std::uint64_t bits() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

enum class Purpose : std::uint64_t {
  Init = 1,
  Hyper = 2,
  Link = 3,
  LambdaBeta = 4,
  Latent = 5,
  Alpha = 6,
  Gen = 7,
};

inline Stream stream(std::uint64_t seed, Purpose purpose, std::uint64_t sweep,
                     std::uint64_t mode = 0, std::uint64_t entity = 0) {
  return Stream(seed, {static_cast<std::uint64_t>(purpose), sweep, mode, entity});
}

}  // namespace tenside::rng
