// Reference implementations used only by the tests. They are written
// independently of the library code they check.
#ifndef SEQRL_TESTS_ORACLES_HPP_
#define SEQRL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "seqrl/common.hpp"

namespace seqrl::testing {

inline std::optional<std::int64_t> apply_op(char op, std::int64_t a,
                                            std::int64_t b) {
  switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    case '*': return a * b;
    case '/':
      if (b == 0 || a % b != 0) return std::nullopt;
      return a / b;
  }
  return std::nullopt;
}

// All values of binary expression trees whose leaves are `xs` in this order.
inline std::set<std::int64_t> ordered_values(const std::vector<std::int64_t>& xs,
                                             std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return {xs[lo]};
  std::set<std::int64_t> out;
  for (std::size_t mid = lo + 1; mid < hi; ++mid) {
    const auto left = ordered_values(xs, lo, mid);
    const auto right = ordered_values(xs, mid, hi);
    for (std::int64_t a : left) {
      for (std::int64_t b : right) {
        for (char op : {'+', '-', '*', '/'}) {
          if (auto v = apply_op(op, a, b)) out.insert(*v);
        }
      }
    }
  }
  return out;
}

// Every exact value of every expression using each operand once: all
// permutations x all tree shapes x all operator choices.
inline std::set<std::int64_t> brute_force_values(std::vector<int> operands) {
  std::vector<std::int64_t> xs(operands.begin(), operands.end());
  std::sort(xs.begin(), xs.end());
  std::set<std::int64_t> out;
  do {
    const auto vals = ordered_values(xs, 0, xs.size());
    out.insert(vals.begin(), vals.end());
  } while (std::next_permutation(xs.begin(), xs.end()));
  return out;
}

// Random expression tree rendered fully parenthesised, with its exact value
// (nullopt on a bad division) and its leaves.
struct RandomExpr {
  std::string text;
  std::optional<std::int64_t> value;
  std::vector<std::int64_t> leaves;
};

inline RandomExpr random_expr(Rng& rng, std::vector<std::int64_t> leaves) {
  // Shuffle, then fold random adjacent pairs until one node remains.
  for (std::size_t i = leaves.size(); i > 1; --i) {
    std::swap(leaves[i - 1],
              leaves[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
  }
  struct Node {
    std::string text;
    std::optional<std::int64_t> value;
  };
  std::vector<Node> nodes;
  for (auto v : leaves) nodes.push_back({std::to_string(v), v});
  static const char kOps[] = {'+', '-', '*', '/'};
  while (nodes.size() > 1) {
    const auto i = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(nodes.size()) - 2));
    const char op = kOps[rng.uniform_int(0, 3)];
    Node merged;
    merged.text = "(" + nodes[i].text + op + nodes[i + 1].text + ")";
    if (nodes[i].value && nodes[i + 1].value) {
      merged.value = apply_op(op, *nodes[i].value, *nodes[i + 1].value);
    }
    nodes[i] = merged;
    nodes.erase(nodes.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  }
  return {nodes[0].text, nodes[0].value, leaves};
}

}  // namespace seqrl::testing

#endif  // SEQRL_TESTS_ORACLES_HPP_
