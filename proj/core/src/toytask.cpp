#include "seqrl/toytask.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"

namespace seqrl {

namespace {

constexpr std::string_view kSymbols = "0123456789+-*/()= <>$_";

bool is_expression_symbol(char c) {
  return (c >= '0' && c <= '9') || c == '+' || c == '-' || c == '*' ||
         c == '/' || c == '(' || c == ')';
}

std::optional<std::int64_t> apply(char op, std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  switch (op) {
    case '+':
      if (__builtin_add_overflow(a, b, &out)) return std::nullopt;
      return out;
    case '-':
      if (__builtin_sub_overflow(a, b, &out)) return std::nullopt;
      return out;
    case '*':
      if (__builtin_mul_overflow(a, b, &out)) return std::nullopt;
      return out;
    case '/':
      if (b == 0 || a % b != 0) return std::nullopt;
      if (a == std::numeric_limits<std::int64_t>::min() && b == -1) {
        return std::nullopt;
      }
      return a / b;
    default:
      return std::nullopt;
  }
}

// expr   := term (('+' | '-') term)*
// term   := factor (('*' | '/') factor)*
// factor := number | '(' expr ')'
class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  std::optional<ParsedExpression> run() {
    ParsedExpression out;
    auto value = expr(out);
    if (!ok_ || pos_ != text_.size()) return std::nullopt;
    out.value = value;
    return out;
  }

 private:
  // Returns the value, nullopt when evaluation failed. Syntax errors clear
  // ok_.
  std::optional<std::int64_t> expr(ParsedExpression& out) {
    auto acc = term(out);
    while (ok_ && pos_ < text_.size() &&
           (text_[pos_] == '+' || text_[pos_] == '-')) {
      const char op = text_[pos_++];
      auto rhs = term(out);
      acc = (acc && rhs) ? apply(op, *acc, *rhs) : std::nullopt;
    }
    return acc;
  }

  std::optional<std::int64_t> term(ParsedExpression& out) {
    auto acc = factor(out);
    while (ok_ && pos_ < text_.size() &&
           (text_[pos_] == '*' || text_[pos_] == '/')) {
      const char op = text_[pos_++];
      auto rhs = factor(out);
      acc = (acc && rhs) ? apply(op, *acc, *rhs) : std::nullopt;
    }
    return acc;
  }

  std::optional<std::int64_t> factor(ParsedExpression& out) {
    if (pos_ >= text_.size()) {
      ok_ = false;
      return std::nullopt;
    }
    if (text_[pos_] == '(') {
      ++pos_;
      auto inner = expr(out);
      if (!ok_ || pos_ >= text_.size() || text_[pos_] != ')') {
        ok_ = false;
        return std::nullopt;
      }
      ++pos_;
      return inner;
    }
    if (text_[pos_] < '0' || text_[pos_] > '9') {
      ok_ = false;
      return std::nullopt;
    }
    std::int64_t literal = 0;
    bool overflow = false;
    while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
      const int digit = text_[pos_++] - '0';
      if (__builtin_mul_overflow(literal, 10, &literal) ||
          __builtin_add_overflow(literal, digit, &literal)) {
        overflow = true;
        literal = std::numeric_limits<std::int64_t>::max();
      }
    }
    out.literals.push_back(literal);
    if (overflow) return std::nullopt;
    return literal;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

void collect_reachable(std::vector<std::int64_t>& nums,
                       std::set<std::int64_t>& out) {
  if (nums.size() == 1) {
    out.insert(nums[0]);
    return;
  }
  const std::size_t n = nums.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::int64_t a = nums[i];
      const std::int64_t b = nums[j];
      std::vector<std::int64_t> rest;
      rest.reserve(n - 1);
      for (std::size_t k = 0; k < n; ++k) {
        if (k != i && k != j) rest.push_back(nums[k]);
      }
      for (char op : {'+', '-', '*', '/'}) {
        // + and * are commutative; visit each unordered pair once.
        if ((op == '+' || op == '*') && j < i) continue;
        auto v = apply(op, a, b);
        if (!v) continue;
        rest.push_back(*v);
        collect_reachable(rest, out);
        rest.pop_back();
      }
    }
  }
}

struct Node {
  std::int64_t value;
  std::string text;
  bool compound;  // needs parentheses when nested
};

// Every expression over nums[lo, hi) keeping the operand order, root split
// points from right to left so left-nested forms come first.
std::vector<Node> ordered_expressions(std::span<const int> nums, std::size_t lo,
                                      std::size_t hi) {
  if (hi - lo == 1) {
    return {{nums[lo], std::to_string(nums[lo]), false}};
  }
  std::vector<Node> out;
  for (std::size_t split = hi - 1; split > lo; --split) {
    const auto left = ordered_expressions(nums, lo, split);
    const auto right = ordered_expressions(nums, split, hi);
    for (const Node& a : left) {
      for (const Node& b : right) {
        for (char op : {'+', '-', '*', '/'}) {
          auto v = apply(op, a.value, b.value);
          if (!v) continue;
          const std::string lt = a.compound ? "(" + a.text + ")" : a.text;
          const std::string rt = b.compound ? "(" + b.text + ")" : b.text;
          out.push_back({*v, lt + op + rt, true});
        }
      }
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() : symbols_(kSymbols) {
  lookup_.fill(-1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    lookup_[static_cast<unsigned char>(symbols_[i])] = static_cast<int>(i);
  }
  eos_ = id(kEos);
  pad_ = id(kPad);
  open_ = id(kAnswerOpen);
  close_ = id(kAnswerClose);
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab;
  return vocab;
}

std::optional<TokenId> Vocabulary::find(char symbol) const {
  const int id = lookup_[static_cast<unsigned char>(symbol)];
  if (id < 0) return std::nullopt;
  return static_cast<TokenId>(id);
}

TokenId Vocabulary::id(char symbol) const {
  auto found = find(symbol);
  if (!found) throw UnknownSymbolError(symbol, 0);
  return *found;
}

TokenSeq Vocabulary::tokenize(std::string_view text) const {
  TokenSeq out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto found = find(text[i]);
    if (!found) throw UnknownSymbolError(text[i], i);
    out.push_back(*found);
  }
  return out;
}

std::string Vocabulary::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) out.push_back(symbol(t));
  return out;
}

// ---------------------------------------------------------------------------

DatasetMode parse_dataset_mode(const std::string& text) {
  if (text == "countdown34") return DatasetMode::kCountdown34;
  if (text == "countdown4") return DatasetMode::kCountdown4;
  throw ConfigError("mode", "expected 'countdown34' or 'countdown4', got '" +
                                text + "'");
}

const char* to_string(DatasetMode mode) {
  return mode == DatasetMode::kCountdown4 ? "countdown4" : "countdown34";
}

std::vector<int> reachable_targets(std::span<const int> operands,
                                   int max_value) {
  std::vector<std::int64_t> nums(operands.begin(), operands.end());
  std::set<std::int64_t> all;
  if (!nums.empty()) collect_reachable(nums, all);
  std::vector<int> out;
  for (std::int64_t v : all) {
    if (v >= 1 && v <= max_value) out.push_back(static_cast<int>(v));
  }
  return out;
}

bool is_solvable(const Problem& problem) {
  return find_solution(problem).has_value();
}

std::optional<std::string> find_solution(const Problem& problem) {
  if (problem.operands.empty()) return std::nullopt;
  std::vector<std::size_t> perm(problem.operands.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<int> nums(perm.size());
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) {
      nums[i] = problem.operands[perm[i]];
    }
    for (const Node& n : ordered_expressions(nums, 0, nums.size())) {
      if (n.value == problem.target) return n.text;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::nullopt;
}

std::vector<Problem> generate_dataset(std::uint64_t seed, std::size_t count,
                                      DatasetMode mode,
                                      const DatasetLimits& limits) {
  if (count == 0) throw ContractError("generate_dataset: count must be >= 1");
  if (count > limits.max_count) {
    throw CapacityError("generate_dataset: count " + std::to_string(count) +
                        " exceeds cap " + std::to_string(limits.max_count));
  }
  if (limits.max_operand < 1 || limits.max_target < 1) {
    throw ContractError("generate_dataset: limits must be positive");
  }
  Rng rng(derive_seed(seed, 0x7461736bULL));
  std::vector<Problem> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Problem p;
    p.id = i;
    const int k = mode == DatasetMode::kCountdown4
                      ? 4
                      : static_cast<int>(rng.uniform_int(3, 4));
    std::vector<int> targets;
    while (targets.empty()) {
      p.operands.clear();
      for (int j = 0; j < k; ++j) {
        p.operands.push_back(
            static_cast<int>(rng.uniform_int(1, limits.max_operand)));
      }
      targets = reachable_targets(p.operands, limits.max_target);
    }
    p.target = targets[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(targets.size()) - 1))];
    out.push_back(std::move(p));
  }
  return out;
}

std::string question_text(const Problem& problem) {
  std::string out;
  for (std::size_t i = 0; i < problem.operands.size(); ++i) {
    if (i > 0) out.push_back(Vocabulary::kSeparator);
    out += std::to_string(problem.operands[i]);
  }
  out.push_back('=');
  out += std::to_string(problem.target);
  return out;
}

TokenSeq question_tokens(const Problem& problem) {
  return Vocabulary::standard().tokenize(question_text(problem));
}

std::optional<ParsedExpression> parse_expression(std::string_view text) {
  if (text.empty()) return std::nullopt;
  for (char c : text) {
    if (!is_expression_symbol(c)) return std::nullopt;
  }
  return ExpressionParser(text).run();
}

OutcomeLabel verify(std::span<const TokenId> response, const Problem& problem) {
  const Vocabulary& vocab = Vocabulary::standard();
  auto end = std::find(response.begin(), response.end(), vocab.eos());
  std::span<const TokenId> body(response.begin(), end);

  std::size_t opens = 0, closes = 0, open_at = 0, close_at = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == vocab.answer_open()) {
      ++opens;
      open_at = i;
    } else if (body[i] == vocab.answer_close()) {
      ++closes;
      close_at = i;
    }
  }
  OutcomeLabel label;
  if (opens != 1 || closes != 1 || close_at < open_at) return label;

  std::string content;
  for (std::size_t i = open_at + 1; i < close_at; ++i) {
    if (body[i] >= vocab.size()) return label;
    content.push_back(vocab.symbol(body[i]));
  }
  auto parsed = parse_expression(content);
  if (!parsed) return label;
  label.well_formed = true;
  label.reward = kFormatReward;

  std::vector<std::int64_t> used = parsed->literals;
  std::vector<std::int64_t> wanted(problem.operands.begin(),
                                   problem.operands.end());
  std::sort(used.begin(), used.end());
  std::sort(wanted.begin(), wanted.end());
  if (parsed->value && *parsed->value == problem.target && used == wanted) {
    label.correct = true;
    label.reward = kCorrectReward;
  }
  return label;
}

// ---------------------------------------------------------------------------

void write_dataset(const std::string& path, std::span<const Problem> problems) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open dataset for writing: " + path);
  for (const Problem& p : problems) {
    nlohmann::ordered_json row;
    row["id"] = p.id;
    row["nums"] = p.operands;
    row["target"] = p.target;
    out << row.dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset: " + path);
}

std::vector<Problem> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<Problem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      Problem p;
      p.id = row.at("id").get<std::uint64_t>();
      p.operands = row.at("nums").get<std::vector<int>>();
      p.target = row.at("target").get<int>();
      if (p.operands.empty()) throw Error("empty nums");
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": bad dataset row: " + e.what());
    }
  }
  return out;
}

}  // namespace seqrl
