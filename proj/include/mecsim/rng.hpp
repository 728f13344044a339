#ifndef MECSIM_RNG_HPP_
#define MECSIM_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace mecsim {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named substream ("env", "fading",
/// "policy", "init", ...) of a master seed. Indexing lets one name fan out to
/// per-agent or per-episode streams.
std::uint64_t substream_seed(std::uint64_t master, std::string_view name,
                             std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view name,
                    std::uint64_t index = 0) {
  return Rng(substream_seed(master, name, index));
}

// Portable draws. The std distributions are implementation-defined, so the
// simulator uses these to keep runs reproducible across standard libraries.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
std::size_t uniform_index(Rng& rng, std::size_t n);
double standard_normal(Rng& rng);
bool bernoulli(Rng& rng, double p);

}  // namespace mecsim

#endif  // MECSIM_RNG_HPP_
