#include "mscrn/parser.hpp"
#include "mscrn/reduced.hpp"
#include "mscrn/scale.hpp"

#include "mscrn/error.hpp"
#include "mscrn/format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mscrn {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }

/// A piece of a line together with its 1-based starting column.
struct Piece {
  std::string_view text;
  std::size_t column = 1;

  bool empty() const { return text.empty(); }
  Piece sub(std::size_t pos, std::size_t len = std::string_view::npos) const {
    pos = std::min(pos, text.size());
    return {text.substr(pos, len), column + pos};
  }
  Piece trim() const {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return sub(b, e - b);
  }
};

class LineParser {
 public:
  LineParser(Model& model, std::size_t line) : m_(model), line_(line) {}

  [[noreturn]] void syntax(const Piece& at, const std::string& msg) const {
    throw ParseError(msg, SourceSpan{line_, at.column, std::max<std::size_t>(at.text.size(), 1)});
  }
  [[noreturn]] void invalid(const Piece& at, const std::string& msg) const {
    throw ValidationError(std::to_string(line_) + ":" + std::to_string(at.column) + ": " + msg);
  }

  /// Splits on whitespace.
  static std::vector<Piece> words(const Piece& p) {
    std::vector<Piece> out;
    std::size_t i = 0;
    while (i < p.text.size()) {
      while (i < p.text.size() && std::isspace(static_cast<unsigned char>(p.text[i]))) ++i;
      std::size_t start = i;
      while (i < p.text.size() && !std::isspace(static_cast<unsigned char>(p.text[i]))) ++i;
      if (i > start) out.push_back(p.sub(start, i - start));
    }
    return out;
  }

  std::string identifier(const Piece& p) const {
    if (p.empty() || !is_ident_start(p.text[0])) syntax(p, "expected a name");
    for (char c : p.text)
      if (!is_ident_char(c)) syntax(p, "invalid character in name '" + std::string(p.text) + "'");
    return std::string(p.text);
  }

  double number(const Piece& p) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(p.text.data(), p.text.data() + p.text.size(), v);
    if (p.empty() || ec != std::errc{} || ptr != p.text.data() + p.text.size()) syntax(p, "expected a number");
    return v;
  }

  Exponent exponent(const Piece& p) const {
    auto e = parse_exponent(p.text);
    if (!e) syntax(p, "expected a rational exponent");
    return *e;
  }

  /// `key=value` option; returns the value piece.
  std::optional<Piece> option(const Piece& p, std::string_view key) const {
    if (p.text.size() > key.size() && p.text.substr(0, key.size()) == key && p.text[key.size()] == '=')
      return p.sub(key.size() + 1);
    return std::nullopt;
  }

  int species_ref(const Piece& p) const {
    std::string name = identifier(p);
    int i = m_.find_species(name);
    if (i < 0) invalid(p, "undeclared species '" + name + "'");
    return i;
  }

  int compartment_ref(const Piece& p) const {
    std::string name = identifier(p);
    int d = m_.find_compartment(name);
    if (d < 0) invalid(p, "undeclared compartment '" + name + "'");
    return d;
  }

  RateConstant constant(const Piece& raw) const {
    Piece p = raw.trim();
    if (!p.empty() && is_ident_start(p.text[0])) {
      std::string name = identifier(p);
      int k = m_.find_param(name);
      if (k < 0) invalid(p, "undeclared parameter '" + name + "'");
      return RateConstant::of_param(k);
    }
    double v = number(p);
    if (v < 0) invalid(p, "negative rate constant");
    return RateConstant::of_literal(v);
  }

  ExpressionPtr expression(const Piece& raw) const {
    Piece p = raw.trim();
    try {
      return parse_expression(p.text, [&](std::string_view id) { return resolve_identifier(m_, id); },
                              SourceSpan{line_, p.column, 0});
    } catch (const ParseError& e) {
      std::string what = e.what();
      if (what.find("unknown identifier") != std::string::npos) throw ValidationError(what);
      throw;
    }
  }

  void param(const Piece& rest) {
    auto eq = rest.text.find('=');
    if (eq == std::string_view::npos) syntax(rest, "expected 'param NAME = VALUE'");
    Piece name = rest.sub(0, eq).trim();
    Piece value = rest.sub(eq + 1).trim();
    m_.params.push_back({identifier(name), number(value)});
  }

  void species(const Piece& rest) {
    auto w = words(rest);
    if (w.empty()) syntax(rest, "expected a species name");
    Species s{identifier(w[0]), Exponent(0), std::nullopt};
    for (std::size_t j = 1; j < w.size(); ++j) {
      if (auto v = option(w[j], "alpha"))
        s.alpha = exponent(*v);
      else if (auto e = option(w[j], "eta"))
        s.eta = exponent(*e);
      else
        syntax(w[j], "unknown species option");
    }
    if (s.alpha < Exponent(0)) invalid(w[0], "alpha must be nonnegative");
    if (s.eta && *s.eta <= Exponent(0)) invalid(w[0], "eta must be positive");
    m_.species.push_back(std::move(s));
  }

  void compartments(const Piece& rest) {
    auto w = words(rest);
    if (w.empty()) syntax(rest, "expected compartment names");
    for (const auto& c : w) {
      std::string name = identifier(c);
      if (m_.find_compartment(name) >= 0) invalid(c, "duplicate compartment '" + name + "'");
      m_.compartments.push_back(name);
    }
  }

  void scaling(const Piece& rest) {
    for (const auto& w : words(rest)) {
      if (auto g = option(w, "gamma"))
        m_.gamma = exponent(*g);
      else
        syntax(w, "unknown scaling option");
    }
  }

  Complex complex(const Piece& raw) const {
    Piece side = raw.trim();
    Complex out;
    if (side.empty() || side.text == "0") return out;
    std::size_t start = 0;
    while (start <= side.text.size()) {
      auto plus = side.text.find('+', start);
      if (plus == std::string_view::npos) plus = side.text.size();
      Piece term = side.sub(start, plus - start).trim();
      if (term.empty()) syntax(side.sub(start, 1), "missing species in complex");
      std::size_t digits = 0;
      while (digits < term.text.size() && std::isdigit(static_cast<unsigned char>(term.text[digits]))) ++digits;
      int mult = 1;
      if (digits > 0) {
        mult = static_cast<int>(number(term.sub(0, digits)));
        term = term.sub(digits).trim();
        if (!term.empty() && term.text[0] == '*') term = term.sub(1).trim();
      }
      int i = species_ref(term);
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == i; });
      if (it == out.end())
        out.emplace_back(i, mult);
      else
        it->second += mult;
      start = plus + 1;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::remove_if(out.begin(), out.end(), [](const auto& e) { return e.second == 0; }), out.end());
    return out;
  }

  RateLaw rate_law(const Piece& raw) const {
    Piece law = raw.trim();
    if (law.empty()) syntax(raw, "missing rate law");
    const std::string_view ma = "mass_action(";
    if (law.text.substr(0, ma.size()) == ma) {
      if (law.text.back() != ')') syntax(law, "expected ')'");
      Piece args = law.sub(ma.size(), law.text.size() - ma.size() - 1);
      MassAction out;
      if (args.text.find('=') == std::string_view::npos) {
        out.kappa.push_back(constant(args));
        return out;
      }
      out.kappa.resize(m_.compartments.size(), RateConstant::of_literal(0.0));
      for (const auto& [key, value] : keyed_list(args)) out.kappa[static_cast<std::size_t>(compartment_ref(key))] = constant(value);
      return out;
    }
    if (law.text[0] == '{') {
      if (law.text.back() != '}') syntax(law, "expected '}'");
      ExpressionLaw out;
      out.per_compartment.resize(m_.compartments.size(), Expression::number(0.0));
      for (const auto& [key, value] : keyed_list(law.sub(1, law.text.size() - 2), ':'))
        out.per_compartment[static_cast<std::size_t>(compartment_ref(key))] = expression(value);
      return out;
    }
    return ExpressionLaw{{expression(law)}};
  }

  std::vector<std::pair<Piece, Piece>> keyed_list(const Piece& p, char sep = '=') const {
    if (m_.compartments.empty()) syntax(p, "per-compartment rates need a compartments line");
    std::vector<std::pair<Piece, Piece>> out;
    std::size_t start = 0;
    while (start < p.text.size()) {
      auto comma = p.text.find(',', start);
      if (comma == std::string_view::npos) comma = p.text.size();
      Piece entry = p.sub(start, comma - start);
      auto at = entry.text.find(sep);
      if (at == std::string_view::npos) syntax(entry.trim(), std::string("expected 'compartment") + sep + "value'");
      out.emplace_back(entry.sub(0, at).trim(), entry.sub(at + 1));
      start = comma + 1;
    }
    return out;
  }

  void reaction(const Piece& rest) {
    Reaction r;
    Piece body = rest;
    auto arrow = body.text.find("->");
    if (arrow == std::string_view::npos) syntax(rest, "expected '->'");
    auto colon = body.text.find(':');
    if (colon != std::string_view::npos && colon < arrow) {
      r.name = identifier(body.sub(0, colon).trim());
      body = body.sub(colon + 1);
      arrow = body.text.find("->");
    } else {
      r.name = "r" + std::to_string(m_.reactions.size() + 1);
    }
    auto at = body.text.find('@', arrow);
    if (at == std::string_view::npos) syntax(body.sub(arrow, 2), "expected '@ rate_law' after the products");
    r.reactants = complex(body.sub(0, arrow));
    r.products = complex(body.sub(arrow + 2, at - arrow - 2));

    // Trailing options are peeled off the right end of the rate text.
    Piece law = body.sub(at + 1).trim();
    for (;;) {
      auto space = law.text.find_last_of(" \t");
      if (space == std::string_view::npos) break;
      Piece last = law.sub(space + 1);
      if (auto b = option(last, "beta"))
        r.beta = exponent(*b);
      else if (last.text == "catalytic")
        r.catalytic = true;
      else
        break;
      law = law.sub(0, space).trim();
    }
    if (r.reactants.empty() && r.products.empty()) invalid(rest, "reaction has no reactants or products");
    r.rate = rate_law(law);
    m_.reactions.push_back(std::move(r));
  }

  void move(const Piece& rest) {
    auto w = words(rest);
    if (w.size() != 7 || w[1].text != "from" || w[3].text != "to" || w[5].text != "rate")
      syntax(rest, "expected 'move SPECIES from C to C rate VALUE'");
    Movement mv{species_ref(w[0]), compartment_ref(w[2]), compartment_ref(w[4]), number(w[6])};
    if (mv.rate < 0) invalid(w[6], "negative movement rate");
    if (mv.from == mv.to) invalid(w[4], "movement within one compartment");
    m_.movements.push_back(mv);
  }

  void init(const Piece& rest) {
    auto eq = rest.text.find('=');
    if (eq == std::string_view::npos) syntax(rest, "expected 'init SPECIES = VALUE'");
    Piece target = rest.sub(0, eq).trim();
    InitialValue iv;
    auto at = target.text.find('@');
    iv.species = species_ref(at == std::string_view::npos ? target : target.sub(0, at).trim());
    if (at != std::string_view::npos) iv.compartment = compartment_ref(target.sub(at + 1).trim());
    iv.value = number(rest.sub(eq + 1).trim());
    if (iv.value < 0) invalid(rest.sub(eq + 1).trim(), "negative initial value");
    m_.init.push_back(iv);
  }

 private:
  Model& m_;
  std::size_t line_;
};

struct Line {
  std::size_t number;
  Piece keyword;
  Piece rest;
};

}  // namespace

Model parse_model(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0, pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view raw = text.substr(pos, end - pos);
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    Piece line = Piece{raw, 1}.trim();
    if (!line.empty()) {
      std::size_t k = 0;
      while (k < line.text.size() && !std::isspace(static_cast<unsigned char>(line.text[k]))) ++k;
      lines.push_back({number, line.sub(0, k), line.sub(k).trim()});
    }
    pos = end + 1;
  }

  // Declarations first so that reactions may refer to names declared later.
  Model m;
  for (const auto& l : lines) {
    LineParser p(m, l.number);
    if (l.keyword.text == "param")
      p.param(l.rest);
    else if (l.keyword.text == "species")
      p.species(l.rest);
    else if (l.keyword.text == "compartments")
      p.compartments(l.rest);
    else if (l.keyword.text == "scaling")
      p.scaling(l.rest);
    else if (l.keyword.text != "reaction" && l.keyword.text != "move" && l.keyword.text != "init")
      p.syntax(l.keyword, "unknown statement '" + std::string(l.keyword.text) + "'");
  }
  for (const auto& l : lines) {
    LineParser p(m, l.number);
    if (l.keyword.text == "reaction")
      p.reaction(l.rest);
    else if (l.keyword.text == "move")
      p.move(l.rest);
    else if (l.keyword.text == "init")
      p.init(l.rest);
  }
  validate(m);
  return m;
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

namespace {

std::string complex_text(const Model& m, const Complex& c) {
  std::string out;
  for (const auto& [i, n] : c) {
    if (!out.empty()) out += " + ";
    if (n != 1) out += std::to_string(n) + " ";
    out += m.species[static_cast<std::size_t>(i)].name;
  }
  return out;
}

std::string constant_text(const Model& m, const RateConstant& c) {
  return c.param >= 0 ? m.params[static_cast<std::size_t>(c.param)].name : format_number(c.literal);
}

}  // namespace

std::string serialize_model(const Model& m) {
  std::ostringstream out;
  auto namer = [&](const algebra::Symbol& s) { return symbol_name(m, s); };
  for (const auto& p : m.params) out << "param " << p.name << " = " << format_number(p.value) << "\n";
  for (const auto& s : m.species) {
    out << "species " << s.name << " alpha=" << format_exponent(s.alpha);
    if (s.eta) out << " eta=" << format_exponent(*s.eta);
    out << "\n";
  }
  if (m.spatial()) {
    out << "compartments";
    for (const auto& c : m.compartments) out << " " << c;
    out << "\n";
  }
  out << "scaling gamma=" << format_exponent(m.gamma) << "\n";
  for (const auto& r : m.reactions) {
    out << "reaction " << r.name << ": " << complex_text(m, r.reactants) << " -> " << complex_text(m, r.products)
        << " @ ";
    if (const auto* ma = std::get_if<MassAction>(&r.rate)) {
      out << "mass_action(";
      if (ma->kappa.size() == 1) {
        out << constant_text(m, ma->kappa[0]);
      } else {
        for (std::size_t d = 0; d < ma->kappa.size(); ++d)
          out << (d ? ", " : "") << m.compartments[d] << "=" << constant_text(m, ma->kappa[d]);
      }
      out << ")";
    } else {
      const auto& ex = std::get<ExpressionLaw>(r.rate);
      if (ex.per_compartment.size() == 1) {
        out << ex.per_compartment[0]->to_string(namer);
      } else {
        out << "{";
        for (std::size_t d = 0; d < ex.per_compartment.size(); ++d)
          out << (d ? ", " : "") << m.compartments[d] << ": " << ex.per_compartment[d]->to_string(namer);
        out << "}";
      }
    }
    out << " beta=" << format_exponent(r.beta);
    if (r.catalytic) out << " catalytic";
    out << "\n";
  }
  for (const auto& mv : m.movements)
    out << "move " << m.species[static_cast<std::size_t>(mv.species)].name << " from "
        << m.compartments[static_cast<std::size_t>(mv.from)] << " to "
        << m.compartments[static_cast<std::size_t>(mv.to)] << " rate " << format_number(mv.rate) << "\n";
  for (const auto& iv : m.init) {
    out << "init " << m.species[static_cast<std::size_t>(iv.species)].name;
    if (iv.compartment >= 0) out << "@" << m.compartments[static_cast<std::size_t>(iv.compartment)];
    out << " = " << format_number(iv.value) << "\n";
  }
  return out.str();
}

}  // namespace mscrn

namespace mscrn {

std::string serialize_reduced(const ReducedModel& r) {
  const Model& m = r.model;
  std::ostringstream out;
  auto namer = [&](const algebra::Symbol& s) -> std::string {
    switch (s.kind) {
      case algebra::Symbol::Kind::Species: return "v" + m.species[static_cast<std::size_t>(s.index)].name;
      default: return symbol_name(m, s);
    }
  };
  const auto& c = r.classification;
  out << "reduced scales=" << to_string(c.kind);
  if (c.spatial_case) out << " case=" << to_string(c.spatial_case->tag);
  out << "\n";
  for (const auto& p : m.params) out << "param " << p.name << " = " << format_number(p.value) << "\n";
  for (const auto& rc : r.coordinates)
    out << "coordinate " << rc.label << " = " << rc.definition << " alpha=" << format_exponent(rc.alpha) << " "
        << (rc.discrete ? "discrete" : "continuous") << "\n";
  for (const auto& ch : r.channels) {
    out << "reaction " << m.reactions[static_cast<std::size_t>(ch.reaction)].name << ":";
    for (const auto& [i, z] : ch.change)
      out << " " << r.coordinates[static_cast<std::size_t>(i)].label << (z > 0 ? "+" : "") << z;
    out << " @ " << (ch.jump ? "jump" : "flow") << " rate ";
    if (ch.rate.closed_form)
      out << ch.rate.closed_form->to_string(namer);
    else if (ch.rate.kind == AveragedRate::Kind::MonteCarlo)
      out << "montecarlo";
    else
      out << "expression " << m.expression(ch.reaction, 0)->to_string(namer);
    out << "\n";
  }
  auto x0 = r.initial_state();
  for (std::size_t j = 0; j < x0.size(); ++j)
    if (x0[j] != 0.0) out << "init " << r.coordinates[j].label << " = " << format_number(x0[j]) << "\n";
  for (const auto& w : r.warnings) out << "# warning: " << w << "\n";
  return out.str();
}

}  // namespace mscrn
