#ifndef SEQRL_COMMON_HPP_
#define SEQRL_COMMON_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqrl {

// Ragged per-token tensor: one row per trajectory, one entry per response
// token.
using TokenTensor = std::vector<std::vector<double>>;

enum class Algo { kPpo, kGrpo };

const char* to_string(Algo algo);
Algo parse_algo(const std::string& text);

// ---------------------------------------------------------------------------
// Errors. Every library error derives from seqrl::Error so callers can catch
// one type; the CLI maps the concrete kinds onto exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnknownSymbolError : public Error {
 public:
  UnknownSymbolError(char symbol, std::size_t position);
  char symbol() const { return symbol_; }
  std::size_t position() const { return position_; }

 private:
  char symbol_;
  std::size_t position_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& reason);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Random numbers. mt19937_64 output is fixed by the standard; the conversions
// below are ours so results do not depend on the standard library's
// distribution implementations.

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  std::mt19937_64 engine_;
};

}  // namespace seqrl

#endif  // SEQRL_COMMON_HPP_
