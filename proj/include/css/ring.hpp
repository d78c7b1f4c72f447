#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace css {

using Exponent = std::vector<int>;
using Index = std::uint64_t;

// binomial(n+d, d): polynomials of degree <= d in n variables
Index s_p(int n, int d);
// binomial(n+d-1, d): forms of degree exactly d
Index s_f(int n, int d);
// checked binomial, 0 when k < 0 or k > n
Index binomial(int n, int k);

// Graded order with 1-based indices. Inside a degree block monomials are
// sorted by (a_n, a_{n-1}, ..., a_1) ascending, so x1^d comes first and
// xn^d last.
class MonomialIndexer {
public:
    explicit MonomialIndexer(int n);

    int n() const { return n_; }
    Index index_of(const Exponent& alpha) const;
    Exponent exponent_of(Index t) const;
    Index multiply(Index r, Index s) const;
    int degree_of(Index t) const;

private:
    int n_;
};

// Closed-form index 1 + sum_j C(n-j+A_j-1, A_j-1), A_j = a_{j+1}+...+a_n.
// Sorts each degree block by (a_1, ..., a_n) descending. With the variables
// reversed and the block order flipped this is MonomialIndexer's order:
// index_of(a) = lo + hi - closed_form_index(reverse(a)) on the block [lo, hi].
// Kept as a cross-check only.
Index closed_form_index(const Exponent& alpha);

// Dense product table over the monomials of degree <= half = floor(rho/2).
// Entry (r, s) holds xi(r, s); symmetric, row 1 is the identity.
class StructureTable {
public:
    StructureTable(int n, int rho);

    int n() const { return n_; }
    int rho() const { return rho_; }
    Index size() const { return size_; }
    Index product(Index r, Index s) const;
    // coefficient C_rs^t, 0 or 1
    int coefficient(Index r, Index s, Index t) const { return product(r, s) == t ? 1 : 0; }

    // memoized per (n, rho); thread safe
    static std::shared_ptr<const StructureTable> get(int n, int rho);

private:
    int n_, rho_;
    Index size_;
    std::vector<Index> table_;
};

} // namespace css
