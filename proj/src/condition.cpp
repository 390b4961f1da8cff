#include "mutmod/condition.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <variant>

#include "mutmod/error.hpp"

namespace mutmod {

enum class Cmp { Lt, Le, Gt, Ge, Eq, Ne };

struct Condition::Node {
  struct Prob {
    SlotKey slot;
    std::string label;
    Cmp cmp;
    double bound;
  };
  struct Value {
    SlotKey slot;
    std::string label;
    bool equal;
  };
  struct Not {
    std::shared_ptr<const Node> operand;
  };
  struct Binary {
    bool is_and;
    std::shared_ptr<const Node> lhs, rhs;
  };
  std::variant<Prob, Value, Not, Binary> v;
};

namespace {

using NodePtr = std::shared_ptr<const Condition::Node>;

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  NodePtr parse() {
    auto node = parse_or();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::ConditionSyntax,
                "condition '" + std::string(s_) + "' at column " + std::to_string(pos_ + 1) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek_keyword(std::string_view kw) {
    skip_ws();
    if (s_.substr(pos_, kw.size()) != kw) return false;
    auto end = pos_ + kw.size();
    return end == s_.size() || !is_word_char(s_[end]);
  }

  bool accept_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) return false;
    pos_ += kw.size();
    return true;
  }

  bool accept(std::string_view sym) {
    skip_ws();
    if (s_.substr(pos_, sym.size()) != sym) return false;
    pos_ += sym.size();
    return true;
  }

  void expect(std::string_view sym) {
    if (!accept(sym)) fail("expected '" + std::string(sym) + "'");
  }

  std::string word() {
    skip_ws();
    auto start = pos_;
    while (pos_ < s_.size() && is_word_char(s_[pos_])) ++pos_;
    if (start == pos_) fail("expected a label");
    return std::string(s_.substr(start, pos_ - start));
  }

  SlotKey slot() {
    skip_ws();
    auto start = pos_;
    if (pos_ >= s_.size() || s_[pos_] != '[') fail("expected a node reference like [child].var");
    auto close = s_.find(']', pos_);
    if (close == std::string_view::npos) fail("missing ']'");
    pos_ = close + 1;
    if (pos_ >= s_.size() || s_[pos_] != '.') fail("expected '.' after chain");
    ++pos_;
    while (pos_ < s_.size() && is_word_char(s_[pos_])) ++pos_;
    try {
      return SlotKey::parse(s_.substr(start, pos_ - start));
    } catch (const Error& e) {
      fail(e.what());
    }
  }

  double number() {
    skip_ws();
    auto start = pos_;
    while (pos_ < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
            s_[pos_] == 'e' || s_[pos_] == 'E' ||
            ((s_[pos_] == '-' || s_[pos_] == '+') && pos_ > start &&
             (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, value);
    if (start == pos_ || ec != std::errc{} || ptr != s_.data() + pos_) fail("expected a number");
    if (!(value >= 0.0 && value <= 1.0)) fail("probability bound outside [0,1]");
    return value;
  }

  NodePtr parse_or() {
    auto lhs = parse_and();
    while (accept_keyword("or"))
      lhs = std::make_shared<Condition::Node>(Condition::Node{Condition::Node::Binary{false, lhs, parse_and()}});
    return lhs;
  }

  NodePtr parse_and() {
    auto lhs = parse_unary();
    while (accept_keyword("and"))
      lhs = std::make_shared<Condition::Node>(Condition::Node{Condition::Node::Binary{true, lhs, parse_unary()}});
    return lhs;
  }

  NodePtr parse_unary() {
    if (accept_keyword("not"))
      return std::make_shared<Condition::Node>(Condition::Node{Condition::Node::Not{parse_unary()}});
    return parse_primary();
  }

  NodePtr parse_primary() {
    if (accept("(")) {
      auto inner = parse_or();
      expect(")");
      return inner;
    }
    if (accept_keyword("P")) {
      expect("(");
      auto ref = slot();
      expect("=");
      auto label = word();
      expect(")");
      Cmp cmp;
      if (accept("<=")) cmp = Cmp::Le;
      else if (accept(">=")) cmp = Cmp::Ge;
      else if (accept("<")) cmp = Cmp::Lt;
      else if (accept(">")) cmp = Cmp::Gt;
      else fail("expected one of < <= > >=");
      auto bound = number();
      return std::make_shared<Condition::Node>(Condition::Node{Condition::Node::Prob{ref, label, cmp, bound}});
    }
    if (accept_keyword("value")) {
      expect("(");
      auto ref = slot();
      expect(")");
      bool equal;
      if (accept("!=")) equal = false;
      else if (accept("=")) equal = true;
      else fail("expected '=' or '!='");
      auto label = word();
      return std::make_shared<Condition::Node>(Condition::Node{Condition::Node::Value{ref, label, equal}});
    }
    fail("expected P(...), value(...), not, or '('");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

bool eval(const Condition::Node& node, const ModelSnapshot& snap) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Condition::Node::Prob>) {
          const auto* d = snap.posterior(n.slot);
          if (!d) return false;
          double p = d->probability(n.label);
          switch (n.cmp) {
            case Cmp::Lt: return p < n.bound;
            case Cmp::Le: return p <= n.bound;
            case Cmp::Gt: return p > n.bound;
            case Cmp::Ge: return p >= n.bound;
            default: return false;
          }
        } else if constexpr (std::is_same_v<T, Condition::Node::Value>) {
          const auto* v = snap.value(n.slot);
          if (!v) return false;
          return (v->value == n.label) == n.equal;
        } else if constexpr (std::is_same_v<T, Condition::Node::Not>) {
          return !eval(*n.operand, snap);
        } else {
          return n.is_and ? (eval(*n.lhs, snap) && eval(*n.rhs, snap))
                          : (eval(*n.lhs, snap) || eval(*n.rhs, snap));
        }
      },
      node.v);
}

template <typename F>
void walk(const Condition::Node& node, F&& f) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Condition::Node::Not>) {
          walk(*n.operand, f);
        } else if constexpr (std::is_same_v<T, Condition::Node::Binary>) {
          walk(*n.lhs, f);
          walk(*n.rhs, f);
        } else {
          f(n);
        }
      },
      node.v);
}

}  // namespace

Condition Condition::parse(std::string_view text) {
  Condition c;
  c.root_ = Parser(text).parse();
  c.text_ = std::string(text);
  return c;
}

bool Condition::evaluate(const ModelSnapshot& snapshot) const {
  return root_ && eval(*root_, snapshot);
}

void Condition::validate(const SpecLookup& lookup) const {
  if (!root_) return;
  walk(*root_, [&](const auto& leaf) {
    const auto* spec = lookup(leaf.slot);
    if (!spec)
      throw Error(ErrorCode::UnknownVariableInCondition,
                  "condition '" + text_ + "' references undeclared " + leaf.slot.to_string());
    if (!spec->index_of(leaf.label))
      throw Error(ErrorCode::ValueOutOfDomain, "condition '" + text_ + "': label '" + leaf.label +
                                                   "' outside " + leaf.slot.to_string());
    using T = std::decay_t<decltype(leaf)>;
    if constexpr (std::is_same_v<T, Node::Prob>) {
      if (spec->kind != VariableKind::Abstract)
        throw Error(ErrorCode::ValidationError, "condition '" + text_ + "': P() needs an abstract variable, " +
                                                    leaf.slot.to_string() + " is perceived");
    }
  });
}

std::vector<SlotKey> Condition::references() const {
  std::vector<SlotKey> out;
  if (root_) walk(*root_, [&](const auto& leaf) { out.push_back(leaf.slot); });
  return out;
}

}  // namespace mutmod
