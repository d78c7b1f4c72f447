#include "css/ring.hpp"
#include "css/errors.hpp"

#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace css {

Index binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    Index r = 1;
    for (int i = 1; i <= k; ++i) {
        Index num = static_cast<Index>(n - k + i);
        // r * num / i is exact at each step; guard the multiplication
        Index g = std::gcd(r, static_cast<Index>(i));
        Index a = r / g, b = static_cast<Index>(i) / g;
        Index c = num / b;
        if (a != 0 && c > std::numeric_limits<Index>::max() / a)
            throw OverflowError("binomial(" + std::to_string(n) + ", " + std::to_string(k) + ") overflows");
        r = a * c;
    }
    return r;
}

Index s_p(int n, int d) {
    if (n < 1 || d < 0) throw std::invalid_argument("s_p needs n >= 1, d >= 0");
    return binomial(n + d, d);
}

Index s_f(int n, int d) {
    if (n < 1 || d < 0) throw std::invalid_argument("s_f needs n >= 1, d >= 0");
    return binomial(n + d - 1, d);
}

MonomialIndexer::MonomialIndexer(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("indexer needs n >= 1");
}

Index MonomialIndexer::index_of(const Exponent& alpha) const {
    if (static_cast<int>(alpha.size()) != n_) throw std::invalid_argument("exponent length mismatch");
    int k = 0;
    for (int a : alpha) {
        if (a < 0) throw std::invalid_argument("negative exponent");
        k += a;
    }
    Index base = k == 0 ? 0 : s_p(n_, k - 1);
    Index rank = 0;
    int above = 0;
    for (int i = n_; i >= 2; --i) {
        int ai = alpha[i - 1];
        for (int v = 0; v < ai; ++v) {
            int r = k - above - v;
            rank += binomial(r + i - 2, i - 2);
        }
        above += ai;
    }
    return base + rank + 1;
}

int MonomialIndexer::degree_of(Index t) const {
    if (t < 1) throw std::invalid_argument("indices start at 1");
    int k = 0;
    while (s_p(n_, k) < t) ++k;
    return k;
}

Exponent MonomialIndexer::exponent_of(Index t) const {
    int k = degree_of(t);
    Index rank = t - (k == 0 ? 0 : s_p(n_, k - 1)) - 1;
    Exponent alpha(n_, 0);
    int above = 0;
    for (int i = n_; i >= 2; --i) {
        int v = 0;
        while (true) {
            int r = k - above - v;
            Index c = binomial(r + i - 2, i - 2);
            if (rank < c) break;
            rank -= c;
            ++v;
        }
        alpha[i - 1] = v;
        above += v;
    }
    alpha[0] = k - above;
    return alpha;
}

Index MonomialIndexer::multiply(Index r, Index s) const {
    Exponent a = exponent_of(r), b = exponent_of(s);
    for (int i = 0; i < n_; ++i) a[i] += b[i];
    return index_of(a);
}

Index closed_form_index(const Exponent& alpha) {
    const int n = static_cast<int>(alpha.size());
    Index t = 1;
    int A = 0;
    for (int a : alpha) A += a;
    for (int j = 0; j < n; ++j) {
        // A holds a_{j+1} + ... + a_n (1-based)
        if (A >= 1) t += binomial(n - j + A - 1, A - 1);
        A -= alpha[j];
    }
    return t;
}

StructureTable::StructureTable(int n, int rho) : n_(n), rho_(rho) {
    MonomialIndexer ix(n);
    size_ = s_p(n, rho / 2);
    table_.resize(size_ * size_);
    std::vector<Exponent> ex(size_);
    for (Index t = 1; t <= size_; ++t) ex[t - 1] = ix.exponent_of(t);
    Exponent sum(n);
    for (Index r = 0; r < size_; ++r)
        for (Index s = r; s < size_; ++s) {
            for (int i = 0; i < n; ++i) sum[i] = ex[r][i] + ex[s][i];
            Index p = ix.index_of(sum);
            table_[r * size_ + s] = p;
            table_[s * size_ + r] = p;
        }
}

Index StructureTable::product(Index r, Index s) const {
    if (r < 1 || s < 1 || r > size_ || s > size_) throw std::out_of_range("structure table index out of range");
    return table_[(r - 1) * size_ + (s - 1)];
}

std::shared_ptr<const StructureTable> StructureTable::get(int n, int rho) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const StructureTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{n, rho}];
    if (!slot) slot = std::make_shared<const StructureTable>(n, rho);
    return slot;
}

} // namespace css
