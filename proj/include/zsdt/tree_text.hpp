#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zsdt/error.hpp"
#include "zsdt/schema.hpp"
#include "zsdt/text.hpp"
#include "zsdt/tree.hpp"

// Text format (one node per line, see prompts/tree_grammar.ebnf):
//
//   |- petal width (cm) <= 0.80
//   | |- class: setosa
//   |- petal width (cm) > 0.80
//   | |- class: virginica
//
// A split is written as two sibling lines, the condition and its complement,
// each followed by its subtree one level deeper.

namespace zsdt {

struct TreeText {
  std::vector<std::string> lines;

  static TreeText from_string(std::string_view s) { return TreeText{text::split_lines(s)}; }

  std::string str() const {
    std::string out;
    for (const auto& l : lines) {
      out += l;
      out += '\n';
    }
    return out;
  }

  friend bool operator==(const TreeText&, const TreeText&) = default;
};

enum class ParseErrorKind {
  bad_indent,
  bad_comparator,
  missing_sibling,
  non_complementary_sibling,
  dangling_branch,
  bad_leaf,
};

inline std::string_view to_string(ParseErrorKind kind) noexcept {
  switch (kind) {
    case ParseErrorKind::bad_indent: return "bad-indent";
    case ParseErrorKind::bad_comparator: return "bad-comparator";
    case ParseErrorKind::missing_sibling: return "missing-sibling";
    case ParseErrorKind::non_complementary_sibling: return "non-complementary-sibling";
    case ParseErrorKind::dangling_branch: return "dangling-branch";
    case ParseErrorKind::bad_leaf: return "bad-leaf";
  }
  return "bad-indent";
}

struct ParseError {
  std::size_t line_number = 0;  // 1-based; 0 when the input has no lines
  ParseErrorKind kind = ParseErrorKind::bad_indent;
  std::string message;

  std::string describe() const {
    return "line " + std::to_string(line_number) + ": " + std::string(to_string(kind)) + ": " + message;
  }
};

using ParseResult = Expected<DecisionTree, ParseError>;

namespace detail {

inline constexpr std::size_t kMaxTextDepth = 256;

struct TreeLine {
  std::size_t number = 0;  // 1-based line number in the input
  std::size_t depth = 0;
  bool is_leaf = false;
  std::string label;    // leaf
  Predicate predicate;  // split
};

/// Position of the first comparator outside brackets, with its length.
inline std::optional<std::pair<std::size_t, std::size_t>> find_comparator(std::string_view body) {
  int nesting = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '(' || c == '[') ++nesting;
    if ((c == ')' || c == ']') && nesting > 0) --nesting;
    if (nesting > 0) continue;
    if (i + 1 < body.size()) {
      auto two = body.substr(i, 2);
      if (two == "<=" || two == ">=" || two == "==" || two == "!=") return std::pair{i, std::size_t{2}};
    }
    if (c == '<' || c == '>' || c == '=') return std::pair{i, std::size_t{1}};
  }
  return std::nullopt;
}

inline std::string_view strip_quotes(std::string_view s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return text::trim(s.substr(1, s.size() - 2));
  }
  return s;
}

inline bool starts_with_class_keyword(std::string_view body) {
  auto folded = text::fold(body);
  return folded.rfind("class", 0) == 0;
}

inline Expected<TreeLine, ParseError> lex_line(std::string_view raw, std::size_t number,
                                               const DatasetSchema* schema) {
  auto fail = [number](ParseErrorKind kind, std::string msg) {
    return ParseError{number, kind, std::move(msg)};
  };
  std::string_view s = text::trim(raw);
  TreeLine line;
  line.number = number;
  std::size_t pos = 0;
  for (;;) {
    if (pos >= s.size() || s[pos] != '|') return fail(ParseErrorKind::bad_indent, "expected '|'");
    ++pos;
    if (pos < s.size() && s[pos] == '-') {
      std::size_t dashes = 0;
      while (pos < s.size() && s[pos] == '-') {
        ++dashes;
        ++pos;
      }
      if (dashes > 3) return fail(ParseErrorKind::bad_indent, "too many dashes in branch marker");
      if (pos < s.size() && !text::is_space(s[pos])) {
        return fail(ParseErrorKind::bad_indent, "branch marker must be followed by a space");
      }
      break;
    }
    if (pos < s.size() && s[pos] == ' ') {
      while (pos < s.size() && s[pos] == ' ') ++pos;
      if (++line.depth > kMaxTextDepth) return fail(ParseErrorKind::bad_indent, "nesting too deep");
      continue;
    }
    return fail(ParseErrorKind::bad_indent, "expected '-' or ' ' after '|'");
  }

  std::string_view body = text::trim(s.substr(pos));
  if (body.empty()) return fail(ParseErrorKind::bad_leaf, "empty node");

  auto cmp = find_comparator(body);
  if (starts_with_class_keyword(body)) {
    auto rest = text::trim(body.substr(5));
    if (!rest.empty() && rest.front() == ':') {
      auto label = strip_quotes(text::trim(rest.substr(1)));
      if (label.empty()) return fail(ParseErrorKind::bad_leaf, "leaf without a class label");
      line.is_leaf = true;
      line.label = std::string(label);
      if (schema) {
        if (auto li = schema->find_label(label)) line.label = schema->labels()[*li];
      }
      return line;
    }
    if (!cmp) return fail(ParseErrorKind::bad_leaf, "expected 'class: <label>'");
  }
  if (!cmp) return fail(ParseErrorKind::bad_comparator, "no comparator in condition");

  auto [at, len] = *cmp;
  auto feature = text::trim(body.substr(0, at));
  auto op = parse_comparator(body.substr(at, len));
  auto value = strip_quotes(text::trim(body.substr(at + len)));
  if (feature.empty()) return fail(ParseErrorKind::bad_comparator, "condition without a feature name");
  if (value.empty()) return fail(ParseErrorKind::bad_comparator, "condition without a value");
  if (!op) return fail(ParseErrorKind::bad_comparator, "unknown comparator");

  line.predicate.op = *op;
  line.predicate.feature = std::string(feature);
  const FeatureSpec* spec = nullptr;
  if (schema) {
    if (auto fi = schema->find_feature(feature)) {
      spec = &schema->feature(*fi);
      line.predicate.feature = spec->display_name();
    }
  }
  if (auto number = text::parse_decimal(value)) {
    line.predicate.value = *number;
  } else {
    if (is_ordering(*op)) {
      return fail(ParseErrorKind::bad_comparator,
                  "'" + std::string(to_string(*op)) + "' needs a numeric value, got '" + std::string(value) + "'");
    }
    std::string category(value);
    if (spec) {
      if (auto ci = spec->find_category(category)) category = spec->categories[*ci];
    }
    line.predicate.value = std::move(category);
  }
  return line;
}

inline bool complementary(const Predicate& a, const Predicate& b) {
  return text::feature_key(a.feature) == text::feature_key(b.feature) && b.op == complement(a.op) &&
         same_literal(a.value, b.value);
}

class StructureParser {
 public:
  explicit StructureParser(const std::vector<TreeLine>& lines) : lines_(lines) {}

  Expected<DecisionTree, ParseError> run() {
    if (lines_.empty()) return ParseError{0, ParseErrorKind::dangling_branch, "no tree lines"};
    auto tree = node(0, 0);
    if (!tree) return tree;
    if (pos_ < lines_.size()) {
      return ParseError{lines_[pos_].number, ParseErrorKind::bad_indent, "line after a complete tree"};
    }
    return tree;
  }

 private:
  Expected<DecisionTree, ParseError> node(std::size_t depth, std::size_t parent_line) {
    if (pos_ >= lines_.size() || lines_[pos_].depth < depth) {
      return ParseError{parent_line, ParseErrorKind::dangling_branch, "branch has no subtree"};
    }
    const TreeLine& first = lines_[pos_];
    if (first.depth > depth) {
      return ParseError{first.number, ParseErrorKind::bad_indent,
                        "expected depth " + std::to_string(depth) + ", got " + std::to_string(first.depth)};
    }
    ++pos_;
    if (first.is_leaf) return DecisionTree::leaf(first.label);

    auto when_true = node(depth + 1, first.number);
    if (!when_true) return when_true;

    if (pos_ >= lines_.size() || lines_[pos_].depth < depth) {
      return ParseError{first.number, ParseErrorKind::missing_sibling, "condition has no complement line"};
    }
    const TreeLine& second = lines_[pos_];
    if (second.depth > depth) {
      return ParseError{second.number, ParseErrorKind::bad_indent,
                        "expected depth " + std::to_string(depth) + ", got " + std::to_string(second.depth)};
    }
    if (second.is_leaf) {
      return ParseError{second.number, ParseErrorKind::missing_sibling, "expected the complement condition, got a leaf"};
    }
    if (!complementary(first.predicate, second.predicate)) {
      return ParseError{second.number, ParseErrorKind::non_complementary_sibling,
                        "sibling condition is not the complement of line " + std::to_string(first.number)};
    }
    ++pos_;
    auto when_false = node(depth + 1, second.number);
    if (!when_false) return when_false;
    return DecisionTree::split(first.predicate, *when_true, *when_false);
  }

  const std::vector<TreeLine>& lines_;
  std::size_t pos_ = 0;
};

inline ParseResult parse_tree_impl(const TreeText& input, const DatasetSchema* schema) {
  std::vector<TreeLine> lines;
  for (std::size_t i = 0; i < input.lines.size(); ++i) {
    if (text::trim(input.lines[i]).empty()) continue;
    auto lexed = lex_line(input.lines[i], i + 1, schema);
    if (!lexed) return lexed.error();
    lines.push_back(*lexed);
  }
  return StructureParser(lines).run();
}

inline void render_node(const DecisionTree& tree, std::size_t i, std::size_t depth, std::vector<std::string>& out) {
  std::string prefix;
  for (std::size_t d = 0; d < depth; ++d) prefix += "| ";
  prefix += "|- ";
  const auto& node = tree.node(i);
  if (const auto* leaf = std::get_if<DecisionTree::Leaf>(&node)) {
    out.push_back(prefix + "class: " + leaf->label);
    return;
  }
  const auto& s = std::get<DecisionTree::Split>(node);
  const auto& p = s.predicate;
  std::string value;
  if (const auto* d = std::get_if<double>(&p.value)) {
    value = text::format_threshold(*d);
  } else {
    value = std::get<std::string>(p.value);
  }
  out.push_back(prefix + p.feature + " " + std::string(to_string(p.op)) + " " + value);
  render_node(tree, s.true_child, depth + 1, out);
  out.push_back(prefix + p.feature + " " + std::string(to_string(complement(p.op))) + " " + value);
  render_node(tree, s.false_child, depth + 1, out);
}

}  // namespace detail

/// Parses tree text. Feature and label tokens that match the schema are
/// replaced by the schema's spelling; unknown names are kept verbatim and left
/// for validate() to report.
inline ParseResult parse_tree(const TreeText& input, const DatasetSchema& schema) {
  return detail::parse_tree_impl(input, &schema);
}

/// Schema-less variant: tokens are kept exactly as written.
inline ParseResult parse_tree(const TreeText& input) { return detail::parse_tree_impl(input, nullptr); }

/// Canonical rendering: "| " per level, "|- " marker, thresholds with at least
/// two decimals.
inline TreeText render_tree(const DecisionTree& tree) {
  TreeText out;
  detail::render_node(tree, 0, 0, out.lines);
  return out;
}

/// Pulls the tree block out of a chat response: the first run of lines that
/// start with '|', ignoring blank lines inside the run.
inline TreeText extract_tree_text(std::string_view response) {
  TreeText out;
  bool started = false;
  for (auto& line : text::split_lines(response)) {
    auto t = text::trim(line);
    if (!t.empty() && t.front() == '|') {
      started = true;
      out.lines.push_back(line);
    } else if (started && !t.empty()) {
      break;
    }
  }
  return out;
}

}  // namespace zsdt
