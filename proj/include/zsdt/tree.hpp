#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "zsdt/error.hpp"
#include "zsdt/schema.hpp"
#include "zsdt/text.hpp"

namespace zsdt {

/// A cell value: missing, numeric, or a category.
using Value = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Value& v) noexcept { return std::holds_alternative<std::monostate>(v); }

/// Right-hand side of a split condition.
using Literal = std::variant<double, std::string>;

enum class Comparator { le, lt, ge, gt, eq, ne };

inline std::string_view to_string(Comparator op) noexcept {
  switch (op) {
    case Comparator::le: return "<=";
    case Comparator::lt: return "<";
    case Comparator::ge: return ">=";
    case Comparator::gt: return ">";
    case Comparator::eq: return "==";
    case Comparator::ne: return "!=";
  }
  return "==";
}

/// Accepts "=" as a spelling of "==".
inline std::optional<Comparator> parse_comparator(std::string_view s) noexcept {
  if (s == "<=") return Comparator::le;
  if (s == "<") return Comparator::lt;
  if (s == ">=") return Comparator::ge;
  if (s == ">") return Comparator::gt;
  if (s == "==" || s == "=") return Comparator::eq;
  if (s == "!=") return Comparator::ne;
  return std::nullopt;
}

/// The comparator that holds exactly when `op` does not.
inline Comparator complement(Comparator op) noexcept {
  switch (op) {
    case Comparator::le: return Comparator::gt;
    case Comparator::gt: return Comparator::le;
    case Comparator::lt: return Comparator::ge;
    case Comparator::ge: return Comparator::lt;
    case Comparator::eq: return Comparator::ne;
    case Comparator::ne: return Comparator::eq;
  }
  return Comparator::ne;
}

inline bool is_ordering(Comparator op) noexcept { return op != Comparator::eq && op != Comparator::ne; }

inline std::string literal_text(const Literal& value) {
  if (const auto* d = std::get_if<double>(&value)) return text::format_number(*d);
  return std::get<std::string>(value);
}

/// Literal equality as used when comparing sibling conditions and trees:
/// numbers exactly, categories case-insensitively after trimming.
inline bool same_literal(const Literal& a, const Literal& b) {
  if (a.index() != b.index()) return false;
  if (const auto* d = std::get_if<double>(&a)) return *d == std::get<double>(b);
  return text::fold(std::get<std::string>(a)) == text::fold(std::get<std::string>(b));
}

struct Predicate {
  std::string feature;
  Comparator op = Comparator::le;
  Literal value = 0.0;

  /// Evaluates against one value. Ordering comparators involving a category
  /// on either side never hold.
  bool holds(const Value& v) const {
    if (is_missing(v)) throw MissingValue(feature);
    const auto* num = std::get_if<double>(&v);
    const auto* lit = std::get_if<double>(&value);
    if (is_ordering(op)) {
      if (!num || !lit) return false;
      switch (op) {
        case Comparator::le: return *num <= *lit;
        case Comparator::lt: return *num < *lit;
        case Comparator::ge: return *num >= *lit;
        case Comparator::gt: return *num > *lit;
        default: return false;
      }
    }
    bool equal = false;
    if (num && lit) {
      equal = *num == *lit;
    } else {
      auto lhs = num ? text::format_number(*num) : std::get<std::string>(v);
      equal = text::fold(lhs) == text::fold(literal_text(value));
    }
    return op == Comparator::eq ? equal : !equal;
  }

  friend bool operator==(const Predicate& a, const Predicate& b) {
    return a.feature == b.feature && a.op == b.op && a.value == b.value;
  }
};

/// Name-to-column mapping shared by every sample of a dataset.
class FeatureIndex {
 public:
  explicit FeatureIndex(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) keys_.emplace(text::feature_key(names_[i]), i);
  }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = keys_.find(text::feature_key(name));
    if (it == keys_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> keys_;
};

/// One observation: a value per feature, addressed by feature name.
class Sample {
 public:
  Sample(std::shared_ptr<const FeatureIndex> index, std::vector<Value> values)
      : index_(std::move(index)), values_(std::move(values)) {
    if (!index_ || index_->size() != values_.size()) {
      throw DimensionMismatch("sample has " + std::to_string(values_.size()) +
                              " values for " + std::to_string(index_ ? index_->size() : 0) + " features");
    }
  }

  Sample(std::initializer_list<std::pair<std::string, Value>> entries) {
    std::vector<std::string> names;
    for (const auto& [name, value] : entries) {
      names.push_back(name);
      values_.push_back(value);
    }
    index_ = std::make_shared<const FeatureIndex>(std::move(names));
  }

  /// Value for `feature`, or nullptr when the sample has no such feature.
  const Value* find(std::string_view feature) const {
    auto i = index_->find(feature);
    return i ? &values_[*i] : nullptr;
  }

  const Value& at(std::string_view feature) const {
    const auto* v = find(feature);
    if (!v) throw UnknownFeature(std::string(feature));
    return *v;
  }

  const std::vector<Value>& values() const noexcept { return values_; }
  const FeatureIndex& index() const noexcept { return *index_; }

 private:
  std::shared_ptr<const FeatureIndex> index_;
  std::vector<Value> values_;
};

/// Immutable binary decision tree stored as a flat pre-order node array
/// (each split is followed by its true subtree, then its false subtree).
class DecisionTree {
 public:
  struct Leaf {
    std::string label;
    friend bool operator==(const Leaf&, const Leaf&) = default;
  };
  struct Split {
    Predicate predicate;
    std::size_t true_child = 0;
    std::size_t false_child = 0;
    friend bool operator==(const Split&, const Split&) = default;
  };
  using Node = std::variant<Split, Leaf>;

  static DecisionTree leaf(std::string label) {
    DecisionTree t;
    t.nodes_.emplace_back(Leaf{std::move(label)});
    t.finish();
    return t;
  }

  static DecisionTree split(Predicate predicate, const DecisionTree& when_true,
                            const DecisionTree& when_false) {
    DecisionTree t;
    t.nodes_.reserve(1 + when_true.nodes_.size() + when_false.nodes_.size());
    t.nodes_.emplace_back(Split{std::move(predicate), 1, 1 + when_true.nodes_.size()});
    t.append(when_true, 1);
    t.append(when_false, 1 + when_true.nodes_.size());
    t.finish();
    return t;
  }

  const Node& root() const noexcept { return nodes_.front(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  /// Indices (into nodes()) of the inner nodes, pre-order, true branch first.
  const std::vector<std::size_t>& node_order() const noexcept { return inner_; }

  std::size_t inner_node_count() const noexcept { return inner_.size(); }
  std::size_t leaf_count() const noexcept { return nodes_.size() - inner_.size(); }

  /// Longest root-to-leaf edge count; a lone leaf has depth 0.
  std::size_t depth() const noexcept { return depth_; }

  /// Distinct feature names referenced by splits, in first-use order.
  std::vector<std::string> features() const {
    std::vector<std::string> out;
    for (auto i : inner_) {
      const auto& f = std::get<Split>(nodes_[i]).predicate.feature;
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    return out;
  }

  /// Leaf indices in pre-order.
  std::vector<std::size_t> leaves() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (std::holds_alternative<Leaf>(nodes_[i])) out.push_back(i);
    }
    return out;
  }

  /// Depth of node i (root = 0).
  std::size_t node_depth(std::size_t i) const { return node_depth_.at(i); }

  friend bool operator==(const DecisionTree& a, const DecisionTree& b) { return a.nodes_ == b.nodes_; }

 private:
  DecisionTree() = default;

  void append(const DecisionTree& sub, std::size_t offset) {
    for (const auto& n : sub.nodes_) {
      if (const auto* s = std::get_if<Split>(&n)) {
        nodes_.emplace_back(Split{s->predicate, s->true_child + offset, s->false_child + offset});
      } else {
        nodes_.push_back(n);
      }
    }
  }

  void finish() {
    inner_.clear();
    node_depth_.assign(nodes_.size(), 0);
    depth_ = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      depth_ = std::max(depth_, node_depth_[i]);
      if (const auto* s = std::get_if<Split>(&nodes_[i])) {
        inner_.push_back(i);
        node_depth_[s->true_child] = node_depth_[i] + 1;
        node_depth_[s->false_child] = node_depth_[i] + 1;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> inner_;
  std::vector<std::size_t> node_depth_;
  std::size_t depth_ = 0;
};

namespace detail {
inline bool evaluate(const Predicate& p, const Sample& sample) {
  const auto* v = sample.find(p.feature);
  if (!v) throw UnknownFeature(p.feature);
  return p.holds(*v);
}
}  // namespace detail

/// Index of the leaf reached by `sample`.
inline std::size_t predict_leaf(const DecisionTree& tree, const Sample& sample) {
  std::size_t i = 0;
  while (const auto* s = std::get_if<DecisionTree::Split>(&tree.node(i))) {
    i = detail::evaluate(s->predicate, sample) ? s->true_child : s->false_child;
  }
  return i;
}

inline const std::string& predict(const DecisionTree& tree, const Sample& sample) {
  return std::get<DecisionTree::Leaf>(tree.node(predict_leaf(tree, sample))).label;
}

/// One entry per inner node in node_order(): 1 iff its condition holds.
/// Every inner node is evaluated, including those off the decision path.
inline std::vector<std::uint8_t> truth_vector(const DecisionTree& tree, const Sample& sample) {
  std::vector<std::uint8_t> bits;
  bits.reserve(tree.inner_node_count());
  for (auto i : tree.node_order()) {
    bits.push_back(detail::evaluate(std::get<DecisionTree::Split>(tree.node(i)).predicate, sample) ? 1 : 0);
  }
  return bits;
}

enum class ViolationKind { unknown_feature, unknown_label, depth_exceeded, kind_mismatch, unknown_category };

inline std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::unknown_feature: return "unknown-feature";
    case ViolationKind::unknown_label: return "unknown-label";
    case ViolationKind::depth_exceeded: return "depth-exceeded";
    case ViolationKind::kind_mismatch: return "kind-mismatch";
    case ViolationKind::unknown_category: return "unknown-category";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool valid() const noexcept { return violations.empty(); }
  bool has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [kind](const Violation& v) { return v.kind == kind; });
  }
  std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += std::string(to_string(v.kind)) + ": " + v.detail;
    }
    return out.empty() ? "valid" : out;
  }
};

/// Checks a tree against a schema. Violations are reported, never thrown.
inline ValidationReport validate(const DecisionTree& tree, const DatasetSchema& schema,
                                 std::optional<std::size_t> max_depth = std::nullopt) {
  ValidationReport report;
  if (max_depth && tree.depth() > *max_depth) {
    report.violations.push_back({ViolationKind::depth_exceeded, "depth " + std::to_string(tree.depth()) +
                                                                    " exceeds " + std::to_string(*max_depth)});
  }
  for (const auto& node : tree.nodes()) {
    if (const auto* leaf = std::get_if<DecisionTree::Leaf>(&node)) {
      if (!schema.find_label(leaf->label)) {
        report.violations.push_back({ViolationKind::unknown_label, "'" + leaf->label + "'"});
      }
      continue;
    }
    const auto& p = std::get<DecisionTree::Split>(node).predicate;
    auto fi = schema.find_feature(p.feature);
    if (!fi) {
      report.violations.push_back({ViolationKind::unknown_feature, "'" + p.feature + "'"});
      continue;
    }
    const auto& spec = schema.feature(*fi);
    const bool numeric_value = std::holds_alternative<double>(p.value);
    if (spec.kind == FeatureKind::nominal) {
      if (is_ordering(p.op)) {
        report.violations.push_back({ViolationKind::kind_mismatch, "ordering comparator '" +
                                                                       std::string(to_string(p.op)) +
                                                                       "' on nominal feature '" + spec.name + "'"});
      } else if (!spec.find_category(literal_text(p.value))) {
        report.violations.push_back({ViolationKind::unknown_category,
                                     "'" + literal_text(p.value) + "' is not a category of '" + spec.name + "'"});
      }
    } else if (!numeric_value) {
      report.violations.push_back({ViolationKind::kind_mismatch, "category value '" + literal_text(p.value) +
                                                                     "' on numeric feature '" + spec.name + "'"});
    }
  }
  return report;
}

// JSON: {"predicate": {"feature", "op", "value"}, "true": node, "false": node} | {"class": label}

inline nlohmann::json to_json(const DecisionTree& tree) {
  // Built iteratively so arbitrarily deep trees cannot exhaust the stack.
  std::vector<nlohmann::json> built(tree.nodes().size());
  for (std::size_t i = tree.nodes().size(); i-- > 0;) {
    const auto& node = tree.node(i);
    if (const auto* leaf = std::get_if<DecisionTree::Leaf>(&node)) {
      built[i] = nlohmann::json{{"class", leaf->label}};
      continue;
    }
    const auto& s = std::get<DecisionTree::Split>(node);
    nlohmann::json pred{{"feature", s.predicate.feature}, {"op", std::string(to_string(s.predicate.op))}};
    if (const auto* d = std::get_if<double>(&s.predicate.value)) {
      pred["value"] = *d;
    } else {
      pred["value"] = std::get<std::string>(s.predicate.value);
    }
    built[i] = nlohmann::json{{"predicate", std::move(pred)},
                              {"true", std::move(built[s.true_child])},
                              {"false", std::move(built[s.false_child])}};
  }
  return std::move(built.front());
}

namespace detail {
inline DecisionTree tree_from_json(const nlohmann::json& j, std::size_t level) {
  constexpr std::size_t kMaxLevel = 512;
  if (level > kMaxLevel) throw SchemaError("tree JSON nested too deeply");
  if (!j.is_object()) throw SchemaError("tree node must be a JSON object");
  if (j.contains("class")) {
    if (!j.at("class").is_string()) throw SchemaError("leaf 'class' must be a string");
    return DecisionTree::leaf(j.at("class").get<std::string>());
  }
  if (!j.contains("predicate") || !j.contains("true") || !j.contains("false")) {
    throw SchemaError("tree node needs either 'class' or 'predicate'/'true'/'false'");
  }
  const auto& pj = j.at("predicate");
  if (!pj.is_object() || !pj.contains("feature") || !pj.contains("op") || !pj.contains("value")) {
    throw SchemaError("predicate needs 'feature', 'op' and 'value'");
  }
  Predicate p;
  if (!pj.at("feature").is_string() || !pj.at("op").is_string()) throw SchemaError("bad predicate field types");
  p.feature = pj.at("feature").get<std::string>();
  auto op = parse_comparator(pj.at("op").get<std::string>());
  if (!op) throw SchemaError("unknown comparator '" + pj.at("op").get<std::string>() + "'");
  p.op = *op;
  const auto& v = pj.at("value");
  if (v.is_number()) {
    p.value = v.get<double>();
  } else if (v.is_string()) {
    p.value = v.get<std::string>();
  } else {
    throw SchemaError("predicate value must be a number or string");
  }
  return DecisionTree::split(std::move(p), tree_from_json(j.at("true"), level + 1),
                             tree_from_json(j.at("false"), level + 1));
}
}  // namespace detail

inline DecisionTree tree_from_json(const nlohmann::json& j) { return detail::tree_from_json(j, 0); }

}  // namespace zsdt
