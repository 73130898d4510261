#include "mscrn/algebra.hpp"

#include "mscrn/format.hpp"

#include <algorithm>
#include <cmath>

namespace mscrn::algebra {

int total_degree(const Monomial& m) {
  int d = 0;
  for (const auto& [s, p] : m) d += p;
  return d;
}

bool MonomialOrder::operator()(const Monomial& a, const Monomial& b) const {
  int da = total_degree(a), db = total_degree(b);
  if (da != db) return da < db;
  return a < b;
}

namespace {

Monomial multiply(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      out.push_back(*ia++);
    } else if (ia == a.end() || ib->first < ia->first) {
      out.push_back(*ib++);
    } else {
      out.emplace_back(ia->first, ia->second + ib->second);
      ++ia;
      ++ib;
    }
  }
  return out;
}

}  // namespace

Polynomial::Polynomial(double constant) {
  if (constant != 0.0) terms_.emplace(Monomial{}, constant);
}

Polynomial Polynomial::variable(const Symbol& s, int power) {
  Polynomial p;
  if (power == 0)
    p.terms_.emplace(Monomial{}, 1.0);
  else
    p.terms_.emplace(Monomial{{s, power}}, 1.0);
  return p;
}

bool Polynomial::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
}

double Polynomial::constant_term() const {
  auto it = terms_.find(Monomial{});
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(Monomial m, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.emplace(std::move(m), c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& o) {
  Polynomial out;
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : o.terms_) out.add_term(multiply(ma, mb), ca * cb);
  *this = std::move(out);
  return *this;
}

Polynomial& Polynomial::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, v] : terms_) v *= c;
  return *this;
}

Polynomial Polynomial::pow(int n) const {
  Polynomial out(1.0);
  for (int i = 0; i < n; ++i) out *= *this;
  return out;
}

int Polynomial::degree_in(const Symbol& s) const {
  int d = 0;
  for (const auto& [m, c] : terms_)
    for (const auto& [sym, p] : m)
      if (sym == s) d = std::max(d, p);
  return d;
}

std::set<Symbol> Polynomial::symbols() const {
  std::set<Symbol> out;
  for (const auto& [m, c] : terms_)
    for (const auto& [sym, p] : m) out.insert(sym);
  return out;
}

std::vector<Polynomial> Polynomial::collect(const Symbol& s) const {
  std::vector<Polynomial> out(static_cast<std::size_t>(degree_in(s)) + 1);
  for (const auto& [m, c] : terms_) {
    int power = 0;
    Monomial rest;
    for (const auto& [sym, p] : m) {
      if (sym == s)
        power = p;
      else
        rest.emplace_back(sym, p);
    }
    out[static_cast<std::size_t>(power)].add_term(std::move(rest), c);
  }
  return out;
}

double Polynomial::evaluate(const SymbolValues& values) const {
  double total = 0.0;
  for (const auto& [m, c] : terms_) {
    double term = c;
    for (const auto& [sym, p] : m) term *= std::pow(values(sym), p);
    total += term;
  }
  return total;
}

std::string Polynomial::to_string(const SymbolNamer& name) const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    double mag = std::fabs(c);
    if (c < 0)
      out += "-";
    else if (!first)
      out += "+";
    std::string factors;
    for (const auto& [sym, p] : m) {
      if (!factors.empty()) factors += "*";
      factors += name(sym);
      if (p != 1) factors += "^" + std::to_string(p);
    }
    if (factors.empty())
      out += format_number(mag);
    else if (mag == 1.0)
      out += factors;
    else
      out += format_number(mag) + "*" + factors;
    first = false;
  }
  return out;
}

RationalFunction::RationalFunction(Polynomial num, Polynomial den) : num_(std::move(num)), den_(std::move(den)) {
  normalize();
}

void RationalFunction::normalize() {
  if (num_.is_zero()) {
    den_ = Polynomial(1.0);
    return;
  }
  if (den_.is_constant()) {
    double c = den_.constant_term();
    if (c != 1.0) {
      num_ *= 1.0 / c;
      den_ = Polynomial(1.0);
    }
  }
}

RationalFunction& RationalFunction::operator+=(const RationalFunction& o) {
  if (o.is_zero()) return *this;
  if (is_zero()) return *this = o;
  if (den_ == o.den_) {
    num_ += o.num_;
  } else {
    num_ = num_ * o.den_ + o.num_ * den_;
    den_ *= o.den_;
  }
  normalize();
  return *this;
}

RationalFunction& RationalFunction::operator-=(const RationalFunction& o) { return *this += -o; }

RationalFunction& RationalFunction::operator*=(const RationalFunction& o) {
  num_ *= o.num_;
  den_ *= o.den_;
  normalize();
  return *this;
}

RationalFunction& RationalFunction::operator/=(const RationalFunction& o) {
  num_ *= o.den_;
  den_ *= o.num_;
  normalize();
  return *this;
}

RationalFunction RationalFunction::pow(int n) const {
  if (n < 0) return RationalFunction(1.0) / pow(-n);
  RationalFunction out(1.0);
  for (int i = 0; i < n; ++i) out *= *this;
  return out;
}

std::set<Symbol> RationalFunction::symbols() const {
  auto out = num_.symbols();
  auto d = den_.symbols();
  out.insert(d.begin(), d.end());
  return out;
}

namespace {

RationalFunction substitute_poly(const Polynomial& p, const Symbol& s, const RationalFunction& value) {
  auto coeffs = p.collect(s);
  RationalFunction out(0.0);
  RationalFunction power(1.0);
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    if (j > 0) power *= value;
    if (!coeffs[j].is_zero()) out += RationalFunction(coeffs[j]) * power;
  }
  return out;
}

}  // namespace

RationalFunction RationalFunction::substitute(const Symbol& s, const RationalFunction& value) const {
  if (!depends_on(s)) return *this;
  return substitute_poly(num_, s, value) / substitute_poly(den_, s, value);
}

RationalFunction RationalFunction::bind(const std::function<std::optional<double>(const Symbol&)>& value_of) const {
  auto bind_poly = [&](const Polynomial& p) {
    Polynomial out;
    for (const auto& [m, c] : p.terms()) {
      double coef = c;
      Monomial rest;
      for (const auto& [sym, pw] : m) {
        if (auto v = value_of(sym))
          coef *= std::pow(*v, pw);
        else
          rest.emplace_back(sym, pw);
      }
      out.add_term(std::move(rest), coef);
    }
    return out;
  };
  return RationalFunction(bind_poly(num_), bind_poly(den_));
}

double RationalFunction::evaluate(const SymbolValues& values) const {
  return num_.evaluate(values) / den_.evaluate(values);
}

std::string RationalFunction::to_string(const SymbolNamer& name) const {
  if (is_polynomial()) return num_.to_string(name);
  auto wrap = [&](const Polynomial& p) {
    std::string s = p.to_string(name);
    bool single = p.terms().size() == 1 && p.terms().begin()->second > 0;
    return single ? s : "(" + s + ")";
  };
  return wrap(num_) + "/" + wrap(den_);
}

Polynomial falling_factorial(const Symbol& s, int n) {
  Polynomial out(1.0);
  for (int j = 0; j < n; ++j) out *= Polynomial::variable(s) - Polynomial(static_cast<double>(j));
  return out;
}

double stirling2(int n, int k) {
  if (n == 0 && k == 0) return 1.0;
  if (n == 0 || k == 0 || k > n) return 0.0;
  std::vector<std::vector<double>> t(static_cast<std::size_t>(n) + 1,
                                     std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0));
  t[0][0] = 1.0;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= i; ++j)
      t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          j * t[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)] +
          t[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
  return t[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
}

std::optional<RationalFunction> expect_polynomial(
    const RationalFunction& f, const std::set<Symbol>& averaged,
    const std::function<RationalFunction(const Symbol&, int)>& factorial_moment) {
  for (const auto& s : averaged)
    if (f.denominator().depends_on(s)) return std::nullopt;

  RationalFunction out(0.0);
  for (const auto& [mono, coef] : f.numerator().terms()) {
    Monomial rest;
    RationalFunction factor(coef);
    for (const auto& [sym, power] : mono) {
      if (!averaged.count(sym)) {
        rest.emplace_back(sym, power);
        continue;
      }
      // x^n = sum_j S(n, j) (x)_j, and the factorial moments are supplied.
      RationalFunction moment(0.0);
      for (int j = 1; j <= power; ++j) moment += RationalFunction(stirling2(power, j)) * factorial_moment(sym, j);
      factor *= moment;
    }
    Polynomial restp;
    restp.add_term(std::move(rest), 1.0);
    out += factor * RationalFunction(restp);
  }
  return out / RationalFunction(f.denominator());
}

CompiledFunction::CompiledFunction(const RationalFunction& f, const std::function<int(const Symbol&)>& slot_of,
                                   const SymbolValues& constants) {
  auto compile = [&](const Polynomial& p) {
    std::vector<Term> terms;
    for (const auto& [m, c] : p.terms()) {
      Term t{c, {}};
      for (const auto& [sym, pw] : m) {
        int slot = slot_of(sym);
        if (slot < 0)
          t.coef *= std::pow(constants(sym), pw);
        else
          t.factors.emplace_back(slot, pw);
      }
      terms.push_back(std::move(t));
    }
    return terms;
  };
  num_ = compile(f.numerator());
  den_ = compile(f.denominator());
}

double CompiledFunction::eval(const std::vector<Term>& terms, std::span<const double> slots) {
  double total = 0.0;
  for (const auto& t : terms) {
    double v = t.coef;
    for (const auto& [slot, pw] : t.factors) {
      double x = slots[static_cast<std::size_t>(slot)];
      for (int i = 0; i < pw; ++i) v *= x;
    }
    total += v;
  }
  return total;
}

double CompiledFunction::operator()(std::span<const double> slots) const {
  double n = eval(num_, slots);
  if (den_.empty()) return n;
  if (den_.size() == 1 && den_[0].factors.empty()) return n / den_[0].coef;
  return n / eval(den_, slots);
}

}  // namespace mscrn::algebra
