#pragma once
// BundleSpec describes the underlying bundle: named independent directions
// (with a time flag), dependent fields, parameters and input symbols. Density
// couples a bundle with a polynomial density of jet order <= 2.

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "varicart/expr.hpp"

namespace varicart {

class model_error : public std::runtime_error {
 public:
  explicit model_error(const std::string& what) : std::runtime_error(what) {}
};

struct IndependentVar {
  std::string name;
  bool is_time = false;
};

class BundleSpec {
 public:
  BundleSpec() = default;
  BundleSpec(std::vector<IndependentVar> independent, std::vector<std::string> dependent,
             std::vector<std::string> parameters = {}, std::vector<std::string> inputs = {})
      : independent_(std::move(independent)), dependent_(std::move(dependent)) {
    for (auto& p : parameters) parameters_.push_back(Symbol::parameter(p));
    for (auto& u : inputs) inputs_.push_back(Symbol::input(u));
    validate();
  }

  std::size_t r() const { return independent_.size(); }
  std::size_t m() const { return dependent_.size(); }

  const std::vector<IndependentVar>& independent() const { return independent_; }
  const std::vector<std::string>& dependent() const { return dependent_; }
  const std::vector<Symbol>& parameters() const { return parameters_; }
  const std::vector<Symbol>& inputs() const { return inputs_; }

  bool is_time(std::size_t dir) const { return independent_.at(dir).is_time; }

  std::size_t direction(const std::string& name) const {
    for (std::size_t i = 0; i < independent_.size(); ++i)
      if (independent_[i].name == name) return i;
    throw model_error("unknown independent variable '" + name + "'");
  }

  std::size_t dependent_index(const std::string& name) const {
    for (std::size_t i = 0; i < dependent_.size(); ++i)
      if (dependent_[i] == name) return i;
    throw model_error("unknown dependent variable '" + name + "'");
  }

  Symbol parameter(const std::string& name) const {
    for (const auto& p : parameters_)
      if (p.name() == name) return p;
    throw model_error("unknown parameter '" + name + "'");
  }

  Symbol jet(std::size_t alpha, const MultiIndex& j) const {
    if (alpha >= m()) throw model_error("dependent index out of range");
    if (j.size() != r()) throw model_error("jet multi-index length must equal r");
    return Symbol::jet(dependent_[alpha], static_cast<int>(alpha), j);
  }
  Symbol jet(const std::string& dep, const MultiIndex& j) const {
    return jet(dependent_index(dep), j);
  }
  Symbol field(std::size_t alpha) const { return jet(alpha, MultiIndex(r())); }

  /// Auxiliary variation/evolution slot symbol for dependent `alpha`;
  /// `prefix` is typically "eta" or "v".
  Symbol slot(std::size_t alpha, const MultiIndex& j, const std::string& prefix = "eta") const {
    if (alpha >= m()) throw model_error("dependent index out of range");
    if (j.size() != r()) throw model_error("slot multi-index length must equal r");
    return Symbol::slot(prefix + "[" + dependent_[alpha] + "]", static_cast<int>(alpha), j);
  }

 private:
  void validate() const {
    if (independent_.empty()) throw model_error("bundle needs at least one independent variable");
    if (dependent_.empty()) throw model_error("bundle needs at least one dependent variable");
    std::set<std::string> names;
    auto check = [&](const std::string& n) {
      if (!names.insert(n).second) throw model_error("duplicate symbol name '" + n + "'");
    };
    for (const auto& v : independent_) check(v.name);
    for (const auto& v : dependent_) check(v);
    for (const auto& p : parameters_) check(p.name());
    for (const auto& u : inputs_) check(u.name());
    // Time-flagged directions must form one contiguous block.
    int blocks = 0;
    bool in_block = false;
    for (const auto& v : independent_) {
      if (v.is_time && !in_block) ++blocks;
      in_block = v.is_time;
    }
    if (blocks > 1) throw model_error("time-flagged independent variables must be contiguous");
  }

  std::vector<IndependentVar> independent_;
  std::vector<std::string> dependent_;
  std::vector<Symbol> parameters_;
  std::vector<Symbol> inputs_;
};

class unsupported_order_error : public model_error {
 public:
  explicit unsupported_order_error(const std::string& what) : model_error(what) {}
};

/// Maximum #J over jet-like symbols occurring in the expression; 0 if none.
inline int jet_order(const ScalarExpr& e) {
  int order = 0;
  for (const auto& s : to_polynomial(e).symbols())
    if (s.is_jet_like() && s.jet_index().order() > order) order = s.jet_index().order();
  return order;
}

struct Density {
  BundleSpec bundle;
  ScalarExpr expr;
  int max_order = 2;

  Density() = default;
  Density(BundleSpec b, ScalarExpr e, int order) : bundle(std::move(b)), expr(std::move(e)), max_order(order) {
    validate();
  }

  void validate() const {
    if (max_order < 0 || max_order > 2)
      throw unsupported_order_error("unsupported-order: densities are limited to jet order <= 2");
    for (const auto& s : to_polynomial(expr).symbols()) {
      switch (s.kind()) {
        case SymbolKind::jet:
          if (s.jet_index().size() != bundle.r())
            throw model_error("jet variable '" + s.str() + "' has wrong multi-index length");
          if (s.jet_index().order() > max_order)
            throw unsupported_order_error("unsupported-order: jet variable '" + s.str() +
                                          "' exceeds declared order " + std::to_string(max_order));
          break;
        case SymbolKind::parameter:
          break;
        case SymbolKind::independent:
          throw model_error("densities may not depend explicitly on independent variable '" +
                            s.name() + "' (constant-coefficient models only)");
        case SymbolKind::input:
          throw model_error("input symbol '" + s.name() + "' is not allowed inside a density");
        case SymbolKind::slot:
          throw model_error("variation slot '" + s.str() + "' is not allowed inside a density");
      }
    }
  }
};

}  // namespace varicart
