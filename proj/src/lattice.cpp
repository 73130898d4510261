#include "mscrn/lattice.hpp"

#include "mscrn/exponent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mscrn {

namespace {

using Q = boost::rational<std::int64_t>;

Q dot(const std::vector<Q>& a, const std::vector<Q>& b) {
  Q s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<Q> to_q(const IntVector& v) { return {v.begin(), v.end()}; }

void normalize(IntVector& v) {
  std::int64_t g = 0;
  for (auto x : v) g = std::gcd(g, x);
  if (g > 1)
    for (auto& x : v) x /= g;
  auto lead = std::find_if(v.begin(), v.end(), [](std::int64_t x) { return x != 0; });
  if (lead != v.end() && *lead < 0)
    for (auto& x : v) x = -x;
}

}  // namespace

std::vector<IntVector> lll_reduce(std::vector<IntVector> b) {
  const std::size_t n = b.size();
  if (n < 2) return b;
  const Q delta(3, 4);
  std::vector<std::vector<Q>> star(n);
  std::vector<std::vector<Q>> mu(n, std::vector<Q>(n, Q(0)));
  std::vector<Q> norm(n);

  auto gram_schmidt = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      star[i] = to_q(b[i]);
      for (std::size_t j = 0; j < i; ++j) {
        mu[i][j] = dot(to_q(b[i]), star[j]) / norm[j];
        for (std::size_t t = 0; t < star[i].size(); ++t) star[i][t] -= mu[i][j] * star[j][t];
      }
      norm[i] = dot(star[i], star[i]);
    }
  };

  gram_schmidt();
  std::size_t k = 1;
  while (k < n) {
    for (std::size_t j = k; j-- > 0;) {
      Q m = mu[k][j];
      // nearest integer to mu
      std::int64_t q = static_cast<std::int64_t>(std::floor(to_double(m) + 0.5));
      if (q != 0) {
        for (std::size_t t = 0; t < b[k].size(); ++t) b[k][t] -= q * b[j][t];
        gram_schmidt();
      }
    }
    if (norm[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * norm[k - 1]) {
      ++k;
    } else {
      std::swap(b[k], b[k - 1]);
      gram_schmidt();
      k = std::max<std::size_t>(k - 1, 1);
    }
  }
  return b;
}

std::vector<IntVector> integer_left_null_space(const IntMatrix& a, std::size_t rows) {
  // Solve A^T x = 0: build the n x m transpose and reduce it to RREF.
  const std::size_t m = rows;
  const std::size_t n = a.empty() ? 0 : a[0].size();
  std::vector<std::vector<Q>> t(n, std::vector<Q>(m, Q(0)));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) t[k][i] = Q(a[i][k]);

  std::vector<std::size_t> pivot_cols;
  std::size_t r = 0;
  for (std::size_t c = 0; c < m && r < n; ++c) {
    std::size_t p = r;
    while (p < n && t[p][c] == Q(0)) ++p;
    if (p == n) continue;
    std::swap(t[p], t[r]);
    Q inv = Q(1) / t[r][c];
    for (auto& x : t[r]) x *= inv;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == r || t[i][c] == Q(0)) continue;
      Q f = t[i][c];
      for (std::size_t j = 0; j < m; ++j) t[i][j] -= f * t[r][j];
    }
    pivot_cols.push_back(c);
    ++r;
  }

  std::vector<IntVector> basis;
  std::vector<bool> is_pivot(m, false);
  for (auto c : pivot_cols) is_pivot[c] = true;
  for (std::size_t free = 0; free < m; ++free) {
    if (is_pivot[free]) continue;
    std::vector<Q> x(m, Q(0));
    x[free] = Q(1);
    for (std::size_t i = 0; i < pivot_cols.size(); ++i) x[pivot_cols[i]] = -t[i][free];
    std::int64_t l = 1;
    for (const auto& q : x) l = std::lcm(l, q.denominator());
    IntVector v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = (x[i] * Q(l)).numerator();
    normalize(v);
    basis.push_back(std::move(v));
  }

  basis = lll_reduce(std::move(basis));
  for (auto& v : basis) normalize(v);
  std::sort(basis.begin(), basis.end());
  return basis;
}

}  // namespace mscrn
