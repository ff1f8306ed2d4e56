#pragma once
// Symbols are lightweight value types. Jet variables and variation slots carry
// a dependent index and a derivative multi-index; every other kind is a bare
// name. Ordering is (name, multi-index, kind) so canonical forms are stable.

#include <string>
#include <utility>

#include "varicart/multi_index.hpp"

namespace varicart {

enum class SymbolKind {
  parameter,
  independent,
  jet,    // x^alpha_J
  input,  // u^xi
  slot,   // variation/evolution slot eta^alpha_J or v^alpha_J
};

class Symbol {
 public:
  Symbol() : kind_(SymbolKind::parameter) {}

  static Symbol parameter(std::string name) { return Symbol(SymbolKind::parameter, std::move(name)); }
  static Symbol independent(std::string name) { return Symbol(SymbolKind::independent, std::move(name)); }
  static Symbol input(std::string name) { return Symbol(SymbolKind::input, std::move(name)); }

  static Symbol jet(std::string dep_name, int alpha, MultiIndex j) {
    Symbol s(SymbolKind::jet, std::move(dep_name));
    s.index_ = alpha;
    s.ji_ = std::move(j);
    return s;
  }

  /// Slot symbols share the jet mechanism: an auxiliary dependent variable
  /// over the same base. `label` is the display base, e.g. "eta[w]" or "v[w]".
  static Symbol slot(std::string label, int alpha, MultiIndex j) {
    Symbol s(SymbolKind::slot, std::move(label));
    s.index_ = alpha;
    s.ji_ = std::move(j);
    return s;
  }

  SymbolKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  int dep_index() const { return index_; }
  const MultiIndex& jet_index() const { return ji_; }

  bool is_jet_like() const { return kind_ == SymbolKind::jet || kind_ == SymbolKind::slot; }

  /// Same symbol with the derivative index raised in direction `dir`.
  Symbol raised(std::size_t dir) const {
    Symbol s = *this;
    s.ji_ = ji_.raised(dir);
    return s;
  }

  std::string str() const {
    if (!is_jet_like() || ji_.is_zero()) return name_;
    return name_ + ji_.str();
  }

  friend bool operator==(const Symbol& a, const Symbol& b) {
    return a.kind_ == b.kind_ && a.name_ == b.name_ && a.index_ == b.index_ && a.ji_ == b.ji_;
  }
  friend bool operator!=(const Symbol& a, const Symbol& b) { return !(a == b); }
  friend bool operator<(const Symbol& a, const Symbol& b) {
    if (a.name_ != b.name_) return a.name_ < b.name_;
    if (a.ji_ != b.ji_) return a.ji_ < b.ji_;
    return static_cast<int>(a.kind_) < static_cast<int>(b.kind_);
  }

 private:
  Symbol(SymbolKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  SymbolKind kind_;
  std::string name_;
  int index_ = -1;
  MultiIndex ji_;
};

}  // namespace varicart
