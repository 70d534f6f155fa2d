#ifndef SEQRL_TOYTASK_HPP_
#define SEQRL_TOYTASK_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqrl/common.hpp"

namespace seqrl {

using TokenId = std::uint8_t;
using TokenSeq = std::vector<TokenId>;

// Fixed single-character vocabulary shared by the policy and the exploration
// networks. Ids are dense in [0, size()).
class Vocabulary {
 public:
  static constexpr char kSeparator = ' ';
  static constexpr char kAnswerOpen = '<';
  static constexpr char kAnswerClose = '>';
  static constexpr char kEos = '$';
  static constexpr char kPad = '_';

  static const Vocabulary& standard();

  int size() const { return static_cast<int>(symbols_.size()); }
  char symbol(TokenId id) const { return symbols_.at(id); }
  std::optional<TokenId> find(char symbol) const;

  TokenId id(char symbol) const;  // throws UnknownSymbolError at position 0
  TokenId eos() const { return eos_; }
  TokenId pad() const { return pad_; }
  TokenId answer_open() const { return open_; }
  TokenId answer_close() const { return close_; }

  TokenSeq tokenize(std::string_view text) const;
  std::string detokenize(std::span<const TokenId> tokens) const;

 private:
  Vocabulary();

  std::string symbols_;
  std::array<int, 256> lookup_{};
  TokenId eos_, pad_, open_, close_;
};

struct Problem {
  std::vector<int> operands;
  int target = 0;
  std::uint64_t id = 0;

  bool operator==(const Problem&) const = default;
};

struct OutcomeLabel {
  double reward = 0.0;
  bool correct = false;
  bool well_formed = false;
};

inline constexpr double kCorrectReward = 1.0;
inline constexpr double kFormatReward = 0.1;

enum class DatasetMode { kCountdown34, kCountdown4 };

DatasetMode parse_dataset_mode(const std::string& text);
const char* to_string(DatasetMode mode);

struct DatasetLimits {
  int max_operand = 20;
  int max_target = 100;
  std::size_t max_count = 100000;
};

// Deterministic in (seed, count, mode, limits). Ids are 0..count-1.
std::vector<Problem> generate_dataset(std::uint64_t seed, std::size_t count,
                                      DatasetMode mode,
                                      const DatasetLimits& limits = {});

// Every value in [1, max_value] reachable by combining all operands exactly
// once with + - * and exact division. Sorted ascending.
std::vector<int> reachable_targets(std::span<const int> operands,
                                   int max_value);

bool is_solvable(const Problem& problem);

// One expression that solves the problem, if any. Operand orders are tried
// in lexicographic permutation order starting with the given order, and
// left-nested forms first, so the result is canonical: "((a+b)*c)-d".
std::optional<std::string> find_solution(const Problem& problem);

// Question prompt, e.g. "3 7 12 5=41".
std::string question_text(const Problem& problem);
TokenSeq question_tokens(const Problem& problem);

// Scores a response. Anything after the first end-of-sequence token is
// ignored. Never throws on malformed input.
OutcomeLabel verify(std::span<const TokenId> response, const Problem& problem);

// Parses a bare arithmetic expression over non-negative integer literals,
// + - * / and parentheses. Returns the literal values in order of
// appearance and the exact value, or nullopt when the text does not parse.
// value is empty when evaluation divides by zero or inexactly.
struct ParsedExpression {
  std::vector<std::int64_t> literals;
  std::optional<std::int64_t> value;
};
std::optional<ParsedExpression> parse_expression(std::string_view text);

// Dataset files: one JSON object per line {"id": u64, "nums": [..],
// "target": int}.
void write_dataset(const std::string& path, std::span<const Problem> problems);
std::vector<Problem> read_dataset(const std::string& path);

}  // namespace seqrl

#endif  // SEQRL_TOYTASK_HPP_
