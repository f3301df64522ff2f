#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "zsdt/schema.hpp"
#include "zsdt/text.hpp"

namespace zsdt {

// Defaults mirror the files under prompts/ byte for byte (checked by tests).
namespace builtin_prompts {

inline constexpr std::string_view k_induction = R"zsdt(I want you to induce a decision tree classifier based on features. I first give an example below. Then, I provide you with new features and want you to build a decision tree with a maximum depth of {max_depth} using the most important features.
The tree should classify {target}.

{example}

Features:
{features}

Decision tree:
)zsdt";

inline constexpr std::string_view k_induction_unconstrained = R"zsdt(I want you to induce a decision tree classifier based on features. I first give an example below. Then, I provide you with new features and want you to build a decision tree using the most important features.
The tree should classify {target}.

{example}

Features:
{features}

Decision tree:
)zsdt";

inline constexpr std::string_view k_iris_example = R"zsdt(Features:
sepal length (cm), sepal width (cm), petal length (cm), petal width (cm)

Decision tree:
|- petal width (cm) <= 0.80
| |- class: setosa
|- petal width (cm) > 0.80
| |- petal width (cm) <= 1.75
| | |- class: versicolor
| |- petal width (cm) > 1.75
| | |- class: virginica
)zsdt";

inline constexpr std::string_view k_repair = R"zsdt(The text below describes a decision tree classifier, but it does not follow the required layout. Rewrite it so that it matches the grammar exactly. Keep every condition, threshold and class label; change only the layout. Answer with the decision tree only.

Grammar (EBNF):
{grammar}

Example of the required layout:
{example}

Text to rewrite:
{raw}

Decision tree:
)zsdt";

inline constexpr std::string_view k_tree_grammar = R"zsdt((* Decision-tree text exchanged with chat-completion providers.          *)
(* One node per line. A split at depth d is written as two sibling lines *)
(* at depth d: a condition and its complement, each followed by its own  *)
(* subtree at depth d + 1. A leaf is a single "class:" line.             *)

tree          = node(0) ;
node(d)       = leaf(d) | split(d) ;
split(d)      = condition(d) , node(d + 1) , complement(d) , node(d + 1) ;
leaf(d)       = indent(d) , "class" , ":" , label , newline ;
condition(d)  = indent(d) , feature , comparator , value , newline ;
complement(d) = indent(d) , feature , comparator , value , newline ;
              (* same feature and value as the condition, with the       *)
              (* complementary comparator: <= / >, < / >=, == / !=       *)

indent(d)     = { "|" , space , { space } } (* exactly d times *) ,
                "|" , dashes , space ;
dashes        = "-" | "--" | "---" ;
comparator    = "<=" | "<" | ">=" | ">" | "==" | "=" | "!=" ;
                (* "=" is read as "=="; ordering comparators take a number *)
feature       = name , [ space , "(" , annotation , ")" ] ;
                (* the bracketed unit or category list is optional and     *)
                (* ignored when matching against the dataset's features    *)
value         = number | category ;
number        = [ "+" | "-" ] , ( digits , [ "." , { digit } ] | "." , digits ) ;
                (* no exponents, no thousands separators *)
category      = text ;            (* optionally wrapped in ' or " quotes *)
label         = text ;            (* matched case-insensitively *)
digits        = digit , { digit } ;
digit         = "0" | "1" | "2" | "3" | "4" | "5" | "6" | "7" | "8" | "9" ;
space         = " " ;
newline       = "\n" ;

(* Canonical rendering: "| " per level, "|- " marker, one space around  *)
(* the comparator, "==" for equality, thresholds with >= 2 decimals.     *)
)zsdt";

}  // namespace builtin_prompts

struct PromptTemplates {
  std::string induction{builtin_prompts::k_induction};
  std::string induction_unconstrained{builtin_prompts::k_induction_unconstrained};
  std::string iris_example{builtin_prompts::k_iris_example};
  std::string repair{builtin_prompts::k_repair};
  std::string tree_grammar{builtin_prompts::k_tree_grammar};

  /// Reads the five template files from a directory laid out like prompts/.
  static PromptTemplates load(const std::filesystem::path& dir) {
    PromptTemplates t;
    t.induction = read_file(dir / "induction.txt");
    t.induction_unconstrained = read_file(dir / "induction_unconstrained.txt");
    t.iris_example = read_file(dir / "iris_example.txt");
    t.repair = read_file(dir / "repair.txt");
    t.tree_grammar = read_file(dir / "tree_grammar.ebnf");
    return t;
  }
};

/// Single-pass "{name}" substitution; text inserted for one placeholder is
/// never rescanned. Unknown placeholders are left as written.
inline std::string substitute(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

/// Removes trailing newlines so file-backed blocks splice cleanly.
inline std::string chomp(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace zsdt
