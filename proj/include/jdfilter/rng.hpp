#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace jdf {

// Counter-based stream (Philox-4x32-10, Salmon et al. 2011). A stream is
// identified by (seed, stream id); streams with distinct ids are independent,
// so workers can draw concurrently without sharing state. All draw paths are
// implemented here rather than via <random> distributions so that sequences
// are identical across standard libraries.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on (0,1), 53-bit mantissa, never exactly 0 or 1.
  double uniform();
  // Standard normal via Box-Muller; second draw of each pair is cached.
  double normal();
  double exponential();  // rate 1
  // Exact Poisson sampler (exponential race); valid for any lambda >= 0.
  long poisson(double lambda);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_, stream_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> block_;
  int block_pos_;
  double cached_normal_;
  bool has_cached_normal_;
};

// Mixes an index into a stream id (SplitMix64 finalizer). Used to key
// hierarchical streams: substream(substream(base, path), particle).
std::uint64_t substream(std::uint64_t base, std::uint64_t index);

// Inverse standard normal CDF (Acklam's rational approximation plus one
// Halley refinement); max relative error below 1e-13 on (1e-300, 1-1e-16).
double inverse_normal_cdf(double p);

// Halton sequence point, index >= 0, dimension <= 16.
std::vector<double> halton_point(std::uint64_t index, int dim);

}  // namespace jdf
