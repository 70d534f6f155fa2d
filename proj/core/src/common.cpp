#include "seqrl/common.hpp"

#include <limits>

namespace seqrl {

const char* to_string(Algo algo) {
  return algo == Algo::kPpo ? "ppo" : "grpo";
}

Algo parse_algo(const std::string& text) {
  if (text == "ppo") return Algo::kPpo;
  if (text == "grpo") return Algo::kGrpo;
  throw ConfigError("algo", "expected 'ppo' or 'grpo', got '" + text + "'");
}

UnknownSymbolError::UnknownSymbolError(char symbol, std::size_t position)
    : Error("unknown symbol '" + std::string(1, symbol) + "' at position " +
            std::to_string(position)),
      symbol_(symbol),
      position_(position) {}

ConfigError::ConfigError(std::string key, const std::string& reason)
    : Error("config key '" + key + "': " + reason), key_(std::move(key)) {}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ContractError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return lo + static_cast<std::int64_t>(draw % span);
}

}  // namespace seqrl
