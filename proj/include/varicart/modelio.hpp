#pragma once
// Model-definition language, report documents and renderers.
//
// Model files are line-oriented, `;`-terminated statements:
//   independent t time, X;      dependent w, phi;
//   parameter rho, E, I;        input u1;
//   lagrangian L = <expr>;   or   hamiltonian H = <expr>;
//   structure J = [[0,1],[-1,0]]; R = [[0,0],[0,0]]; G = [];
//   boundary X;
// Jet variables are written w[1,0] (derivative counts per independent
// direction, in declaration order); a bare dependent name means the zeroth
// jet. Operators: + - * / ^ with / restricted to nonzero rational constants
// and ^ to positive integer literals.

#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "varicart/porthamil.hpp"

namespace varicart {

class parse_error : public model_error {
 public:
  parse_error(const std::string& msg, int line, int col)
      : model_error(msg + " (line " + std::to_string(line) + ", column " + std::to_string(col) + ")"),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace dsl {

struct Token {
  enum class Type { ident, number, punct, end };
  Type type = Type::end;
  std::string text;
  int line = 0;
  int col = 0;
};

inline std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  const std::string punct = ",;=[]()+-*/^";
  while (i < src.size()) {
    char c = src[i];
    if (c == '#') {  // comment to end of line
      std::size_t j = i;
      while (j < src.size() && src[j] != '\n') ++j;
      advance(j - i);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      out.push_back({Token::Type::ident, src.substr(i, j - i), line, col});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Token::Type::number, src.substr(i, j - i), line, col});
      advance(j - i);
      continue;
    }
    if (punct.find(c) != std::string::npos) {
      out.push_back({Token::Type::punct, std::string(1, c), line, col});
      advance(1);
      continue;
    }
    throw parse_error(std::string("unexpected character '") + c + "'", line, col);
  }
  out.push_back({Token::Type::end, "", line, col});
  return out;
}

class Cursor {
 public:
  explicit Cursor(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_ == tokens_.size() - 1 ? pos_ : pos_++]; }
  bool at_end() const { return peek().type == Token::Type::end; }

  bool accept(const std::string& punct_or_ident) {
    if (peek().text == punct_or_ident && peek().type != Token::Type::end) {
      next();
      return true;
    }
    return false;
  }
  Token expect(const std::string& text, const std::string& what) {
    if (peek().text != text || peek().type == Token::Type::end)
      throw parse_error("expected '" + text + "' " + what + ", found '" +
                            (at_end() ? "<end>" : peek().text) + "'",
                        peek().line, peek().col);
    return next();
  }
  Token expect_ident(const std::string& what) {
    if (peek().type != Token::Type::ident)
      throw parse_error("expected identifier " + what, peek().line, peek().col);
    return next();
  }
  Token expect_number(const std::string& what) {
    if (peek().type != Token::Type::number)
      throw parse_error("expected integer " + what, peek().line, peek().col);
    return next();
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

/// Resolves a plain identifier to a symbol, or a dependent name to its index
/// for jet syntax. Returning nullopt flags the name as undeclared.
struct SymbolResolver {
  std::function<std::optional<Symbol>(const std::string&)> plain;
  std::function<std::optional<std::size_t>(const std::string&)> dependent;
  std::size_t r = 0;
  int max_jet_order = 2;  // model sources are limited to 2; reports carry derived jets up to 4
};

inline long long parse_int_token(Cursor& cur, const std::string& what) {
  bool neg = cur.accept("-");
  Token t = cur.expect_number(what);
  long long v = 0;
  for (char c : t.text) {
    v = v * 10 + (c - '0');
    if (v > (1ll << 40)) throw parse_error("integer literal too large", t.line, t.col);
  }
  return neg ? -v : v;
}

ScalarExpr parse_expr(Cursor& cur, const SymbolResolver& rs);

inline ScalarExpr parse_primary(Cursor& cur, const SymbolResolver& rs) {
  const Token& t = cur.peek();
  if (cur.accept("(")) {
    ScalarExpr e = parse_expr(cur, rs);
    cur.expect(")", "to close parenthesis");
    return e;
  }
  if (t.type == Token::Type::number) {
    return ScalarExpr(Rational(parse_int_token(cur, "literal")));
  }
  if (t.type == Token::Type::ident) {
    Token name = cur.next();
    if (auto dep = rs.dependent(name.text)) {
      MultiIndex j(rs.r);
      if (cur.accept("[")) {
        std::vector<int> counts;
        if (!cur.accept("]")) {
          do {
            long long c = parse_int_token(cur, "derivative count");
            if (c < 0) throw parse_error("derivative counts must be nonnegative", name.line, name.col);
            counts.push_back(static_cast<int>(c));
          } while (cur.accept(","));
          cur.expect("]", "to close jet index");
        }
        if (counts.size() != rs.r)
          throw parse_error("jet index of '" + name.text + "' must have one count per independent variable",
                            name.line, name.col);
        j = MultiIndex(counts);
        if (j.order() > rs.max_jet_order)
          throw parse_error("unsupported-order: jet variable '" + name.text + j.str() +
                                "' exceeds order " + std::to_string(rs.max_jet_order),
                            name.line, name.col);
      }
      return ScalarExpr(Symbol::jet(name.text, static_cast<int>(*dep), j));
    }
    if (auto sym = rs.plain(name.text)) return ScalarExpr(*sym);
    throw parse_error("undeclared symbol '" + name.text + "'", name.line, name.col);
  }
  throw parse_error("expected expression, found '" + (cur.at_end() ? "<end>" : t.text) + "'",
                    t.line, t.col);
}

inline ScalarExpr parse_factor(Cursor& cur, const SymbolResolver& rs) {
  bool neg = false;
  while (cur.peek().text == "-" || cur.peek().text == "+") {
    if (cur.next().text == "-") neg = !neg;
  }
  ScalarExpr e = parse_primary(cur, rs);
  if (cur.peek().text == "^") {
    Token caret = cur.next();
    long long exp = parse_int_token(cur, "exponent");
    if (exp < 1) throw parse_error("exponents must be positive integers", caret.line, caret.col);
    e = ScalarExpr::power(e, static_cast<int>(exp));
  }
  return neg ? -e : e;
}

inline ScalarExpr parse_term(Cursor& cur, const SymbolResolver& rs) {
  ScalarExpr e = parse_factor(cur, rs);
  for (;;) {
    if (cur.peek().text == "*") {
      cur.next();
      e = e * parse_factor(cur, rs);
    } else if (cur.peek().text == "/") {
      Token slash = cur.next();
      ScalarExpr divisor = parse_factor(cur, rs);
      Polynomial dp = to_polynomial(divisor);
      if (!dp.is_constant() || dp.constant_value().is_zero())
        throw parse_error("division is restricted to nonzero rational constants", slash.line,
                          slash.col);
      e = e / dp.constant_value();
    } else {
      return e;
    }
  }
}

inline ScalarExpr parse_expr(Cursor& cur, const SymbolResolver& rs) {
  ScalarExpr e = parse_term(cur, rs);
  for (;;) {
    if (cur.peek().text == "+") {
      cur.next();
      e = e + parse_term(cur, rs);
    } else if (cur.peek().text == "-") {
      cur.next();
      e = e - parse_term(cur, rs);
    } else {
      return e;
    }
  }
}

}  // namespace dsl

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

enum class ModelKind { lagrangian, hamiltonian };

struct ModelSpec {
  std::string name;  // density identifier from the source
  ModelKind kind = ModelKind::lagrangian;
  BundleSpec bundle;
  Density density;
  std::optional<PHSystem> ph;       // present for hamiltonian models with a structure block
  std::vector<std::size_t> faces;   // declared boundary faces, non-time
};

/// Parses a model source. Throws parse_error with position information on
/// syntax errors and model_error on semantic ones; never crashes on malformed
/// input.
inline ModelSpec parse_model(const std::string& text) {
  using dsl::Cursor;
  using dsl::Token;
  Cursor cur(dsl::tokenize(text));

  std::vector<IndependentVar> independent;
  std::vector<std::string> dependent, parameters, inputs;
  std::optional<std::pair<std::string, ModelKind>> density_decl;
  ScalarExpr density_expr;
  std::map<std::string, ExprMatrix> structure;
  std::vector<std::string> boundary_names;
  std::vector<std::pair<int, int>> boundary_pos;

  auto declared = [&](const std::string& n) {
    for (const auto& v : independent)
      if (v.name == n) return true;
    for (const auto& v : dependent)
      if (v == n) return true;
    for (const auto& v : parameters)
      if (v == n) return true;
    for (const auto& v : inputs)
      if (v == n) return true;
    return false;
  };
  auto check_fresh = [&](const Token& t) {
    if (declared(t.text))
      throw parse_error("symbol '" + t.text + "' is already declared", t.line, t.col);
  };

  dsl::SymbolResolver rs;
  rs.plain = [&](const std::string& n) -> std::optional<Symbol> {
    for (const auto& v : parameters)
      if (v == n) return Symbol::parameter(n);
    for (const auto& v : inputs)
      if (v == n) return Symbol::input(n);
    for (const auto& v : independent)
      if (v.name == n) return Symbol::independent(n);  // rejected later by Density
    return std::nullopt;
  };
  rs.dependent = [&](const std::string& n) -> std::optional<std::size_t> {
    for (std::size_t a = 0; a < dependent.size(); ++a)
      if (dependent[a] == n) return a;
    return std::nullopt;
  };

  auto parse_matrix = [&](Cursor& c) {
    ExprMatrix m;
    c.expect("[", "to open matrix");
    if (c.accept("]")) return m;
    do {
      c.expect("[", "to open matrix row");
      std::vector<ScalarExpr> row;
      if (!c.accept("]")) {
        do {
          row.push_back(dsl::parse_expr(c, rs));
        } while (c.accept(","));
        c.expect("]", "to close matrix row");
      }
      m.push_back(std::move(row));
    } while (c.accept(","));
    c.expect("]", "to close matrix");
    for (const auto& row : m)
      if (row.size() != m.front().size())
        throw parse_error("matrix rows have unequal lengths", c.peek().line, c.peek().col);
    return m;
  };

  auto parse_structure_assignment = [&](Cursor& c, const Token& slot) {
    if (slot.text != "J" && slot.text != "R" && slot.text != "G")
      throw parse_error("unknown structure matrix '" + slot.text + "' (expected J, R or G)",
                        slot.line, slot.col);
    for (const auto& p : parameters)
      if (p == slot.text)
        throw parse_error("'" + slot.text + "' is declared as a parameter and cannot name a structure matrix",
                          slot.line, slot.col);
    c.expect("=", "in structure assignment");
    if (structure.count(slot.text))
      throw parse_error("structure matrix '" + slot.text + "' assigned twice", slot.line, slot.col);
    structure[slot.text] = parse_matrix(c);
    c.expect(";", "to end statement");
  };

  while (!cur.at_end()) {
    Token head = cur.expect_ident("at start of statement");
    rs.r = independent.size();
    if (head.text == "independent") {
      do {
        Token name = cur.expect_ident("in independent list");
        check_fresh(name);
        bool time = cur.accept("time");
        independent.push_back({name.text, time});
      } while (cur.accept(","));
      cur.expect(";", "to end statement");
    } else if (head.text == "dependent") {
      do {
        Token name = cur.expect_ident("in dependent list");
        check_fresh(name);
        dependent.push_back(name.text);
      } while (cur.accept(","));
      cur.expect(";", "to end statement");
    } else if (head.text == "parameter") {
      do {
        Token name = cur.expect_ident("in parameter list");
        check_fresh(name);
        parameters.push_back(name.text);
      } while (cur.accept(","));
      cur.expect(";", "to end statement");
    } else if (head.text == "input") {
      do {
        Token name = cur.expect_ident("in input list");
        check_fresh(name);
        inputs.push_back(name.text);
      } while (cur.accept(","));
      cur.expect(";", "to end statement");
    } else if (head.text == "lagrangian" || head.text == "hamiltonian") {
      if (density_decl)
        throw parse_error("model already has a density; only one is allowed", head.line, head.col);
      Token name = cur.expect_ident("naming the density");
      cur.expect("=", "in density definition");
      rs.r = independent.size();
      density_expr = dsl::parse_expr(cur, rs);
      cur.expect(";", "to end statement");
      density_decl = {name.text,
                      head.text == "lagrangian" ? ModelKind::lagrangian : ModelKind::hamiltonian};
    } else if (head.text == "structure") {
      Token slot = cur.expect_ident("naming a structure matrix");
      parse_structure_assignment(cur, slot);
    } else if (head.text == "J" || head.text == "R" || head.text == "G") {
      parse_structure_assignment(cur, head);
    } else if (head.text == "boundary") {
      Token name = cur.expect_ident("naming a boundary face");
      boundary_names.push_back(name.text);
      boundary_pos.emplace_back(name.line, name.col);
      cur.expect(";", "to end statement");
    } else {
      throw parse_error("unknown statement '" + head.text + "'", head.line, head.col);
    }
  }

  if (independent.empty()) throw model_error("model declares no independent variables");
  if (dependent.empty()) throw model_error("model declares no dependent variables");
  if (!density_decl) throw model_error("model declares no lagrangian or hamiltonian density");

  ModelSpec spec;
  spec.name = density_decl->first;
  spec.kind = density_decl->second;
  spec.bundle = BundleSpec(independent, dependent, parameters, inputs);
  spec.density = Density(spec.bundle, density_expr, std::max(jet_order(density_expr), 1));

  for (std::size_t i = 0; i < boundary_names.size(); ++i) {
    std::size_t face;
    try {
      face = spec.bundle.direction(boundary_names[i]);
    } catch (const model_error&) {
      throw parse_error("boundary face '" + boundary_names[i] + "' is not an independent variable",
                        boundary_pos[i].first, boundary_pos[i].second);
    }
    if (spec.bundle.is_time(face))
      throw parse_error("boundary face '" + boundary_names[i] +
                            "' is time-flagged: no variation on the time boundary",
                        boundary_pos[i].first, boundary_pos[i].second);
    spec.faces.push_back(face);
  }

  if (!structure.empty()) {
    if (spec.kind != ModelKind::hamiltonian)
      throw model_error("structure matrices require a hamiltonian density");
    const std::size_t m = spec.bundle.m();
    auto zero_mm = [&] {
      return ExprMatrix(m, std::vector<ScalarExpr>(m, ScalarExpr(Rational(0))));
    };
    ExprMatrix Jm = structure.count("J") ? structure["J"] : zero_mm();
    ExprMatrix Rm = structure.count("R") ? structure["R"] : zero_mm();
    ExprMatrix Gm = structure.count("G") ? structure["G"] : ExprMatrix{};
    std::vector<Symbol> input_syms = spec.bundle.inputs();
    if (!Gm.empty() && Gm.front().empty()) Gm.clear();  // G = [] or [[]]
    spec.ph = PHSystem(spec.bundle, spec.density, Jm, Rm, Gm, input_syms);
  } else if (spec.kind == ModelKind::hamiltonian && !inputs.empty()) {
    throw model_error("inputs declared but no structure block provides the input map G");
  }
  return spec;
}

inline ModelSpec parse_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw model_error("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

// ---------------------------------------------------------------------------
// Report document
// ---------------------------------------------------------------------------

enum class ReportFormat { text, latex, json };

struct Equation {
  std::string lhs;                     // rendered label ("dot(w)", "delta[w]", or a canonical string)
  ScalarExpr rhs;
  std::optional<ScalarExpr> lhs_expr;  // set when the lhs is itself an expression
};

struct PortPair {
  ScalarExpr output;
  std::string input;
};

struct PowerBalanceDoc {
  ScalarExpr dissipation;
  std::vector<PortPair> ports;
  BoundaryReport boundary;
};

struct ReportDocument {
  std::string model_name;
  ModelKind kind = ModelKind::lagrangian;
  BundleSpec bundle;
  std::vector<std::size_t> faces;
  std::vector<Equation> equations;
  std::optional<CartanCoefficients> cartan;
  std::vector<BoundaryReport> boundary;
  std::optional<PowerBalanceDoc> power_balance;
  std::optional<bool> residual_zero;
};

/// Omega_d = d_face _| Omega written over the remaining coordinate
/// differentials, e.g. "-dt" for the X face of (t, X).
inline std::string omega_boundary_string(const BundleSpec& bundle, std::size_t face) {
  std::string wedge;
  for (std::size_t i = 0; i < bundle.r(); ++i) {
    if (i == face) continue;
    if (!wedge.empty()) wedge += "^";
    wedge += "d" + bundle.independent()[i].name;
  }
  if (wedge.empty()) wedge = "1";
  return (face_volume_sign(face) < 0 ? "-" : "") + wedge;
}

// ---------------------------------------------------------------------------
// Report builders
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> report_faces(const ModelSpec& model,
                                             const std::optional<std::string>& face_name) {
  if (face_name) {
    std::size_t face = model.bundle.direction(*face_name);  // throws on unknown name
    for (std::size_t f : model.faces)
      if (f == face) return {face};
    throw model_error("face '" + *face_name + "' is not declared as a boundary of this model");
  }
  if (model.faces.empty()) throw model_error("model declares no boundary faces");
  return model.faces;
}

}  // namespace detail

/// Domain equations: delta_a L = 0 for Lagrangian models, the evolution
/// equations dot(x) = v for Hamiltonian models with structure, and the bare
/// variational derivatives otherwise.
inline ReportDocument build_equations_report(const ModelSpec& model) {
  ReportDocument doc;
  doc.model_name = model.name;
  doc.kind = model.kind;
  doc.bundle = model.bundle;
  doc.faces = model.faces;
  if (model.kind == ModelKind::lagrangian) {
    auto delta = euler_lagrange(model.density);
    for (std::size_t a = 0; a < model.bundle.m(); ++a) {
      ScalarExpr lhs = normalize_equation_sign(delta[a]);
      doc.equations.push_back({canonical_string(lhs), ScalarExpr(Rational(0)), lhs});
    }
  } else if (model.ph) {
    auto v = evolution_field(*model.ph);
    for (std::size_t a = 0; a < model.bundle.m(); ++a)
      doc.equations.push_back({"dot(" + model.bundle.dependent()[a] + ")", v[a], std::nullopt});
  } else {
    auto delta = variational_derivative(model.density);
    for (std::size_t a = 0; a < model.bundle.m(); ++a)
      doc.equations.push_back({"delta[" + model.bundle.dependent()[a] + "]", delta[a], std::nullopt});
  }
  return doc;
}

inline ReportDocument build_boundary_report(const ModelSpec& model,
                                            const std::optional<std::string>& face_name,
                                            bool naive_split) {
  ReportDocument doc = build_equations_report(model);
  for (std::size_t face : detail::report_faces(model, face_name)) {
    BoundaryReport report = naive_split
                                ? boundary_terms_naive(model.density, face, SplitChoice::symmetric())
                                : boundary_terms(model.density, face);
    doc.boundary.push_back(std::move(report));
    if (doc.boundary.size() == 1 && !naive_split)
      doc.cartan = cartan_coefficients(model.density, face);
  }
  return doc;
}

inline ReportDocument build_ports_report(const ModelSpec& model,
                                         const std::optional<std::string>& face_name) {
  if (!model.ph) throw model_error("boundary ports require a hamiltonian model with a structure block");
  ReportDocument doc = build_equations_report(model);
  auto faces = detail::report_faces(model, face_name);
  PowerBalance pb = power_balance(*model.ph, faces.front());
  PowerBalanceDoc pbd;
  pbd.dissipation = pb.domain_dissipation;
  for (std::size_t xi = 0; xi < pb.collocated_outputs.size(); ++xi)
    pbd.ports.push_back({pb.collocated_outputs[xi], model.ph->inputs[xi].name()});
  pbd.boundary = pb.boundary;
  doc.power_balance = std::move(pbd);
  for (std::size_t i = 1; i < faces.size(); ++i)
    doc.boundary.push_back(power_balance(*model.ph, faces[i]).boundary);
  return doc;
}

inline ReportDocument build_verify_report(const ModelSpec& model) {
  ReportDocument doc = build_equations_report(model);
  bool all_zero = true;
  for (std::size_t face : model.faces.empty() ? std::vector<std::size_t>{} : model.faces)
    for (const auto& split : {SplitChoice::adapted(), SplitChoice::symmetric()})
      all_zero = all_zero && is_zero(verify_decomposition(model.density, face, split));
  if (model.faces.empty()) {
    // No declared boundary: verify against every spatial direction.
    for (std::size_t dir = 0; dir < model.bundle.r(); ++dir) {
      if (model.bundle.is_time(dir)) continue;
      for (const auto& split : {SplitChoice::adapted(), SplitChoice::symmetric()})
        all_zero = all_zero && is_zero(verify_decomposition(model.density, dir, split));
    }
  }
  doc.residual_zero = all_zero;
  return doc;
}

// ---------------------------------------------------------------------------
// LaTeX rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string latex_name(const std::string& name) {
  static const std::set<std::string> greek = {
      "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta",   "theta", "iota",
      "kappa", "lambda", "mu",  "nu",    "xi",      "pi",   "rho",   "sigma", "tau",
      "upsilon", "phi", "chi", "psi", "omega"};
  if (greek.count(name)) return "\\" + name;
  return name;
}

inline std::string latex_symbol(const Symbol& s) {
  switch (s.kind()) {
    case SymbolKind::jet: {
      std::string sub;
      for (int c : s.jet_index().counts()) sub += std::to_string(c);
      if (s.jet_index().is_zero()) return latex_name(s.name());
      return latex_name(s.name()) + "_{" + sub + "}";
    }
    case SymbolKind::slot: {
      // name is "eta[w]" or "v[w]": render as \eta^{w}_{J} / v^{w}_{J}.
      std::string base = s.name().substr(0, s.name().find('['));
      std::string dep = s.name().substr(s.name().find('[') + 1);
      dep.pop_back();
      std::string sub;
      for (int c : s.jet_index().counts()) sub += std::to_string(c);
      std::string head = (base == "eta" ? "\\eta" : base) + "^{" + latex_name(dep) + "}";
      return s.jet_index().is_zero() ? head : head + "_{" + sub + "}";
    }
    default:
      return latex_name(s.name());
  }
}

inline std::string latex_rational(const Rational& c) {
  if (c.is_integer()) return std::to_string(c.num());
  std::string sign = c.is_negative() ? "-" : "";
  long long n = c.num() < 0 ? -c.num() : c.num();
  return sign + "\\tfrac{" + std::to_string(n) + "}{" + std::to_string(c.den()) + "}";
}

}  // namespace detail

inline std::string latex_string(const ScalarExpr& e) {
  Polynomial p = to_polynomial(e);
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    Rational a = c.is_negative() ? -c : c;
    if (first) {
      if (c.is_negative()) out += "-";
      first = false;
    } else {
      out += c.is_negative() ? " - " : " + ";
    }
    std::string body;
    if (!a.is_one() || m.empty()) body += detail::latex_rational(a);
    for (const auto& [sym, exp] : m.factors()) {
      if (!body.empty()) body += "\\,";
      body += detail::latex_symbol(sym);
      if (exp > 1) body += "^{" + std::to_string(exp) + "}";
    }
    out += body;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Renderers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string kind_string(ModelKind k) {
  return k == ModelKind::lagrangian ? "lagrangian" : "hamiltonian";
}

inline nlohmann::ordered_json boundary_to_json(const BundleSpec& bundle,
                                               const BoundaryReport& report) {
  nlohmann::ordered_json j;
  j["face"] = bundle.independent()[report.face].name;
  j["side_sign"] = report.orientation_sign;
  j["omega_sign"] = report.face_volume_sign;
  j["omega"] = omega_boundary_string(bundle, report.face);
  j["slots"] = nlohmann::ordered_json::array();
  for (const auto& entry : report.entries) {
    nlohmann::ordered_json slot;
    slot["slot"] = entry.slot.str();
    slot["coeff"] = grouped_string(entry.coeff);
    j["slots"].push_back(slot);
  }
  return j;
}

inline void render_boundary_text(std::ostream& os, const BundleSpec& bundle,
                                 const BoundaryReport& report) {
  os << "boundary face " << bundle.independent()[report.face].name
     << " (Omega_d = " << omega_boundary_string(bundle, report.face)
     << ", side sign " << (report.orientation_sign > 0 ? "+1" : "-1") << "):\n";
  if (report.entries.empty()) {
    os << "  (no boundary terms)\n";
    return;
  }
  for (const auto& entry : report.entries)
    os << "  " << entry.slot.str() << " : " << grouped_string(entry.coeff) << "\n";
}

}  // namespace detail

inline std::string render_report(const ReportDocument& doc, ReportFormat fmt) {
  using nlohmann::ordered_json;
  const BundleSpec& b = doc.bundle;

  if (fmt == ReportFormat::json) {
    ordered_json j;
    ordered_json model;
    model["name"] = doc.model_name;
    model["kind"] = detail::kind_string(doc.kind);
    model["independent"] = ordered_json::array();
    for (const auto& v : b.independent())
      model["independent"].push_back({{"name", v.name}, {"time", v.is_time}});
    model["dependent"] = b.dependent();
    ordered_json params = ordered_json::array(), ins = ordered_json::array();
    for (const auto& p : b.parameters()) params.push_back(p.name());
    for (const auto& u : b.inputs()) ins.push_back(u.name());
    model["parameters"] = params;
    model["inputs"] = ins;
    ordered_json faces = ordered_json::array();
    for (std::size_t f : doc.faces) faces.push_back(b.independent()[f].name);
    model["faces"] = faces;
    j["model"] = model;

    j["equations"] = ordered_json::array();
    for (const auto& eq : doc.equations)
      j["equations"].push_back({{"lhs", eq.lhs}, {"rhs", canonical_string(eq.rhs)}});

    if (doc.cartan) {
      ordered_json cj;
      cj["face"] = b.independent()[doc.cartan->face].name;
      ordered_json rho1 = ordered_json::object(), rho2 = ordered_json::object();
      for (std::size_t a = 0; a < b.m(); ++a) {
        ordered_json r1 = ordered_json::object(), r2 = ordered_json::object();
        for (std::size_t l = 0; l < b.r(); ++l)
          if (!is_zero(doc.cartan->rho1[a][l]))
            r1[b.independent()[l].name] = grouped_string(doc.cartan->rho1[a][l]);
        for (std::size_t k = 0; k < b.r(); ++k)
          for (std::size_t jdir = 0; jdir < b.r(); ++jdir)
            if (!is_zero(doc.cartan->rho2[a][k][jdir]))
              r2[b.independent()[k].name + "," + b.independent()[jdir].name] =
                  grouped_string(doc.cartan->rho2[a][k][jdir]);
        if (!r1.empty()) rho1[b.dependent()[a]] = r1;
        if (!r2.empty()) rho2[b.dependent()[a]] = r2;
      }
      cj["rho1"] = rho1;
      cj["rho2"] = rho2;
      j["cartan"] = cj;
    } else {
      j["cartan"] = nullptr;
    }

    j["boundary"] = ordered_json::array();
    for (const auto& report : doc.boundary)
      j["boundary"].push_back(detail::boundary_to_json(b, report));

    if (doc.power_balance) {
      ordered_json pj;
      pj["dissipation"] = canonical_string(doc.power_balance->dissipation);
      pj["ports"] = ordered_json::array();
      for (const auto& port : doc.power_balance->ports)
        pj["ports"].push_back(
            {{"output", canonical_string(port.output)}, {"input", port.input}});
      pj["boundary"] = detail::boundary_to_json(b, doc.power_balance->boundary);
      j["power_balance"] = pj;
    } else {
      j["power_balance"] = nullptr;
    }

    j["verifier"] = doc.residual_zero ? ordered_json{{"residual_zero", *doc.residual_zero}}
                                      : ordered_json(nullptr);
    return j.dump(2) + "\n";
  }

  if (fmt == ReportFormat::latex) {
    std::ostringstream os;
    os << "% model " << doc.model_name << " (" << detail::kind_string(doc.kind) << ")\n";
    if (!doc.equations.empty()) {
      os << "\\begin{align*}\n";
      for (std::size_t i = 0; i < doc.equations.size(); ++i) {
        const auto& eq = doc.equations[i];
        std::string lhs = eq.lhs;
        if (eq.lhs_expr)
          lhs = latex_string(*eq.lhs_expr);
        else if (lhs.rfind("dot(", 0) == 0)
          lhs = "\\dot{" + detail::latex_name(lhs.substr(4, lhs.size() - 5)) + "}";
        else if (lhs.rfind("delta[", 0) == 0)
          lhs = "\\delta_{" + detail::latex_name(lhs.substr(6, lhs.size() - 7)) + "}";
        os << "  " << lhs << " &= " << latex_string(eq.rhs)
           << (i + 1 < doc.equations.size() ? " \\\\" : "") << "\n";
      }
      os << "\\end{align*}\n";
    }
    for (const auto& report : doc.boundary) {
      os << "% boundary face " << b.independent()[report.face].name << ", $\\Omega_\\partial = "
         << omega_boundary_string(b, report.face) << "$\n";
      os << "\\begin{align*}\n";
      for (std::size_t i = 0; i < report.entries.size(); ++i)
        os << "  " << detail::latex_symbol(report.entries[i].slot) << " &:\\; "
           << latex_string(report.entries[i].coeff)
           << (i + 1 < report.entries.size() ? " \\\\" : "") << "\n";
      os << "\\end{align*}\n";
    }
    if (doc.power_balance) {
      os << "% power balance\n\\begin{align*}\n";
      os << "  \\dot{H}_{\\mathcal{D}} &= " << latex_string(doc.power_balance->dissipation);
      for (const auto& port : doc.power_balance->ports)
        os << " + \\left(" << latex_string(port.output) << "\\right)" << port.input;
      os << " \\\\\n";
      const auto& report = doc.power_balance->boundary;
      os << "  \\dot{H}_{\\partial\\mathcal{D}} &: ";
      for (std::size_t i = 0; i < report.entries.size(); ++i) {
        if (i) os << " + ";
        os << detail::latex_symbol(report.entries[i].slot) << "\\left("
           << latex_string(report.entries[i].coeff) << "\\right)";
      }
      os << "\\,\\Omega_\\partial\n\\end{align*}\n";
    }
    if (doc.residual_zero)
      os << "% decomposition residual zero: " << (*doc.residual_zero ? "true" : "false") << "\n";
    return os.str();
  }

  // Plain text.
  std::ostringstream os;
  os << "model " << doc.model_name << " (" << detail::kind_string(doc.kind) << ")\n";
  os << "independent:";
  for (const auto& v : b.independent()) os << " " << v.name << (v.is_time ? " (time)" : "");
  os << "\ndependent:";
  for (const auto& v : b.dependent()) os << " " << v;
  os << "\n";
  if (!doc.equations.empty()) {
    os << "\nequations:\n";
    for (const auto& eq : doc.equations) {
      if (eq.lhs.rfind("dot(", 0) == 0 || eq.lhs.rfind("delta[", 0) == 0)
        os << "  " << eq.lhs << " = " << grouped_string(eq.rhs) << "\n";
      else
        os << "  " << eq.lhs << " = " << canonical_string(eq.rhs) << "\n";
    }
  }
  for (const auto& report : doc.boundary) {
    os << "\n";
    detail::render_boundary_text(os, b, report);
  }
  if (doc.power_balance) {
    os << "\npower balance:\n";
    os << "  domain dissipation: " << grouped_string(doc.power_balance->dissipation) << "\n";
    if (doc.power_balance->ports.empty()) {
      os << "  domain ports: none\n";
    } else {
      for (const auto& port : doc.power_balance->ports)
        os << "  domain port: y = " << grouped_string(port.output) << " collocated with "
           << port.input << "\n";
    }
    os << "  ";
    detail::render_boundary_text(os, b, doc.power_balance->boundary);
    // Flux density against the positive face measure, with the volume-form
    // sign absorbed: this is the physically signed effort per slot.
    const auto& report = doc.power_balance->boundary;
    std::string measure;
    for (std::size_t i = 0; i < b.r(); ++i)
      if (i != report.face) measure += (measure.empty() ? "d" : "^d") + b.independent()[i].name;
    if (measure.empty()) measure = "1";
    os << "  flux density (per " << measure << ", outward at max side):";
    if (report.entries.empty()) os << " 0";
    for (const auto& entry : report.entries) {
      ScalarExpr effort = report.face_volume_sign < 0 ? canonicalize(-entry.coeff)
                                                      : canonicalize(entry.coeff);
      os << "\n    " << entry.slot.str() << " * (" << grouped_string(effort) << ")";
    }
    os << "\n";
  }
  if (doc.residual_zero)
    os << "\nverifier: residual_zero = " << (*doc.residual_zero ? "true" : "false") << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON parse-back (reports round-trip losslessly through the JSON schema)
// ---------------------------------------------------------------------------

/// Parses a canonical expression string over the bundle's symbols. Jet
/// variables up to order 4 are accepted (derived quantities exceed the model
/// grammar's order-2 bound).
inline ScalarExpr parse_canonical_expr(const std::string& text, const BundleSpec& bundle) {
  dsl::SymbolResolver rs;
  rs.r = bundle.r();
  rs.max_jet_order = 8;
  rs.plain = [&](const std::string& n) -> std::optional<Symbol> {
    for (const auto& p : bundle.parameters())
      if (p.name() == n) return p;
    for (const auto& u : bundle.inputs())
      if (u.name() == n) return u;
    return std::nullopt;
  };
  rs.dependent = [&](const std::string& n) -> std::optional<std::size_t> {
    for (std::size_t a = 0; a < bundle.m(); ++a)
      if (bundle.dependent()[a] == n) return a;
    return std::nullopt;
  };
  dsl::Cursor cur(dsl::tokenize(text));
  ScalarExpr e = dsl::parse_expr(cur, rs);
  if (!cur.at_end())
    throw parse_error("trailing input after expression", cur.peek().line, cur.peek().col);
  return e;
}

namespace detail {

/// Parses a slot label of the form "eta[w]", "v[w]" or "eta[w][0,0,1]".
inline Symbol parse_slot_label(const std::string& text, const BundleSpec& bundle) {
  auto open = text.find('[');
  auto close = text.find(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw model_error("malformed slot label '" + text + "'");
  std::string prefix = text.substr(0, open);
  std::string dep = text.substr(open + 1, close - open - 1);
  MultiIndex j(bundle.r());
  if (close + 1 < text.size()) {
    std::string rest = text.substr(close + 1);
    if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']')
      throw model_error("malformed slot label '" + text + "'");
    std::vector<int> counts;
    std::stringstream ss(rest.substr(1, rest.size() - 2));
    std::string piece;
    while (std::getline(ss, piece, ',')) counts.push_back(std::stoi(piece));
    if (counts.size() != bundle.r())
      throw model_error("slot label '" + text + "' has the wrong index length");
    j = MultiIndex(counts);
  }
  return bundle.slot(bundle.dependent_index(dep), j, prefix);
}

inline BoundaryReport boundary_from_json(const nlohmann::ordered_json& j,
                                         const BundleSpec& bundle) {
  BoundaryReport report;
  report.face = bundle.direction(j.at("face").get<std::string>());
  report.orientation_sign = j.at("side_sign").get<int>();
  report.face_volume_sign = j.at("omega_sign").get<int>();
  for (const auto& slot : j.at("slots"))
    report.entries.push_back({parse_slot_label(slot.at("slot").get<std::string>(), bundle),
                              parse_canonical_expr(slot.at("coeff").get<std::string>(), bundle)});
  return report;
}

}  // namespace detail

inline ReportDocument parse_report_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw model_error(std::string("malformed report JSON: ") + err.what());
  }
  ReportDocument doc;
  const auto& model = j.at("model");
  doc.model_name = model.at("name").get<std::string>();
  doc.kind = model.at("kind").get<std::string>() == "hamiltonian" ? ModelKind::hamiltonian
                                                                  : ModelKind::lagrangian;
  std::vector<IndependentVar> indep;
  for (const auto& v : model.at("independent"))
    indep.push_back({v.at("name").get<std::string>(), v.at("time").get<bool>()});
  std::vector<std::string> deps = model.at("dependent").get<std::vector<std::string>>();
  std::vector<std::string> params = model.at("parameters").get<std::vector<std::string>>();
  std::vector<std::string> ins = model.at("inputs").get<std::vector<std::string>>();
  doc.bundle = BundleSpec(indep, deps, params, ins);
  for (const auto& f : model.at("faces"))
    doc.faces.push_back(doc.bundle.direction(f.get<std::string>()));

  for (const auto& eq : j.at("equations")) {
    Equation e;
    e.lhs = eq.at("lhs").get<std::string>();
    e.rhs = parse_canonical_expr(eq.at("rhs").get<std::string>(), doc.bundle);
    if (e.lhs.rfind("dot(", 0) != 0 && e.lhs.rfind("delta[", 0) != 0)
      e.lhs_expr = parse_canonical_expr(e.lhs, doc.bundle);
    doc.equations.push_back(std::move(e));
  }

  if (j.contains("cartan") && !j.at("cartan").is_null()) {
    const auto& cj = j.at("cartan");
    CartanCoefficients cc;
    cc.face = doc.bundle.direction(cj.at("face").get<std::string>());
    const std::size_t r = doc.bundle.r(), m = doc.bundle.m();
    cc.rho1.assign(m, std::vector<ScalarExpr>(r, ScalarExpr()));
    cc.rho2.assign(m, std::vector<std::vector<ScalarExpr>>(r, std::vector<ScalarExpr>(r, ScalarExpr())));
    for (const auto& [dep, row] : cj.at("rho1").items()) {
      std::size_t a = doc.bundle.dependent_index(dep);
      for (const auto& [dir, coeff] : row.items())
        cc.rho1[a][doc.bundle.direction(dir)] =
            parse_canonical_expr(coeff.get<std::string>(), doc.bundle);
    }
    for (const auto& [dep, row] : cj.at("rho2").items()) {
      std::size_t a = doc.bundle.dependent_index(dep);
      for (const auto& [pair, coeff] : row.items()) {
        auto comma = pair.find(',');
        std::size_t k = doc.bundle.direction(pair.substr(0, comma));
        std::size_t jd = doc.bundle.direction(pair.substr(comma + 1));
        cc.rho2[a][k][jd] = parse_canonical_expr(coeff.get<std::string>(), doc.bundle);
      }
    }
    doc.cartan = std::move(cc);
  }

  for (const auto& bj : j.at("boundary"))
    doc.boundary.push_back(detail::boundary_from_json(bj, doc.bundle));

  if (j.contains("power_balance") && !j.at("power_balance").is_null()) {
    const auto& pj = j.at("power_balance");
    PowerBalanceDoc pbd;
    pbd.dissipation = parse_canonical_expr(pj.at("dissipation").get<std::string>(), doc.bundle);
    for (const auto& port : pj.at("ports"))
      pbd.ports.push_back({parse_canonical_expr(port.at("output").get<std::string>(), doc.bundle),
                           port.at("input").get<std::string>()});
    pbd.boundary = detail::boundary_from_json(pj.at("boundary"), doc.bundle);
    doc.power_balance = std::move(pbd);
  }

  if (j.contains("verifier") && !j.at("verifier").is_null())
    doc.residual_zero = j.at("verifier").at("residual_zero").get<bool>();
  return doc;
}

}  // namespace varicart
