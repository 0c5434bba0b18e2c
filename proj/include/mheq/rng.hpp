#pragma once

#include <cstdint>
#include <random>

namespace mheq {

// Seeded Gaussian noise source. Each physical noise channel (process,
// measurement, exploration) gets its own stream so that runs with the same
// seed consume identical draws regardless of what else happens in between.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  // One standard-normal draw.
  double sample() { return normal_(engine_); }

  // One N(0, stddev^2) draw. stddev == 0 still consumes a draw so that
  // noise-free runs stay aligned with noisy ones.
  double sample(double stddev) { return stddev * sample(); }

  std::uint64_t uniform_index(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
    return d(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// splitmix64; used to derive independent stream seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mheq
