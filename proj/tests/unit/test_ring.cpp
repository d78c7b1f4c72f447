#include "css/errors.hpp"
#include "css/ring.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>

using namespace css;

namespace {

int total(const Exponent& a) {
    int s = 0;
    for (int v : a) s += v;
    return s;
}

// All exponents of degree <= D, sorted by degree and then by
// (a_n, ..., a_1) lexicographically.
std::vector<Exponent> enumerate(int n, int D) {
    std::vector<Exponent> out;
    Exponent a(n, 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == n) {
            out.push_back(a);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            a[i] = v;
            rec(i + 1, left - v);
        }
        a[i] = 0;
    };
    rec(0, D);
    std::sort(out.begin(), out.end(), [](const Exponent& x, const Exponent& y) {
        if (total(x) != total(y)) return total(x) < total(y);
        return std::lexicographical_compare(x.rbegin(), x.rend(), y.rbegin(), y.rend());
    });
    return out;
}

Exponent add(const Exponent& a, const Exponent& b) {
    Exponent c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

} // namespace

TEST_CASE("basis sizes") {
    CHECK(s_p(6, 2) == 28);
    CHECK(s_p(1, 0) == 1);
    CHECK(s_f(6, 2) == 21);
    CHECK(s_p(3, 4) == 35);
    CHECK(s_f(1, 7) == 1);
    CHECK(binomial(5, 7) == 0);
    CHECK(binomial(5, -1) == 0);
    CHECK(binomial(60, 30) == 118264581564861424ULL);
    CHECK_THROWS_AS(s_p(200, 100), OverflowError);
}

TEST_CASE("index of the constant monomial is 1") {
    for (int n = 1; n <= 8; ++n) CHECK(MonomialIndexer(n).index_of(Exponent(n, 0)) == 1);
}

TEST_CASE("degree blocks are contiguous") {
    for (int n = 1; n <= 6; ++n) {
        MonomialIndexer ix(n);
        for (int d = 1; d <= 4; ++d)
            for (Index t = s_p(n, d - 1) + 1; t <= s_p(n, d); ++t) CHECK(ix.degree_of(t) == d);
    }
}

TEST_CASE("enumeration oracle") {
    for (int n = 1; n <= 6; ++n) {
        MonomialIndexer ix(n);
        auto all = enumerate(n, 4);
        REQUIRE(all.size() == s_p(n, 4));
        for (size_t k = 0; k < all.size(); ++k) {
            CHECK(ix.index_of(all[k]) == k + 1);
            CHECK(ix.exponent_of(k + 1) == all[k]);
        }
    }
}

TEST_CASE("x1^d leads its block and xn^d closes it") {
    MonomialIndexer ix(3);
    CHECK(ix.index_of({1, 0, 0}) == 2);
    CHECK(ix.index_of({0, 0, 1}) == 4);
    CHECK(ix.index_of({2, 0, 0}) == 5);
    CHECK(ix.index_of({0, 0, 2}) == 10);
}

TEST_CASE("round trip up to degree 4") {
    for (int n = 1; n <= 6; ++n) {
        MonomialIndexer ix(n);
        for (Index t = 1; t <= s_p(n, 4); ++t) CHECK(ix.index_of(ix.exponent_of(t)) == t);
    }
}

TEST_CASE("closed-form index is the block-reversed order of the reversed variables") {
    for (int n = 1; n <= 5; ++n) {
        MonomialIndexer ix(n);
        for (const auto& a : enumerate(n, 4)) {
            Exponent mirrored(a.rbegin(), a.rend());
            int d = total(a);
            Index lo = d == 0 ? 1 : s_p(n, d - 1) + 1, hi = s_p(n, d);
            CHECK(closed_form_index(mirrored) == lo + hi - ix.index_of(a));
        }
    }
}

TEST_CASE("multiplication") {
    SUBCASE("identity") {
        for (int n = 1; n <= 5; ++n) {
            MonomialIndexer ix(n);
            for (Index s = 1; s <= s_p(n, 3); ++s) {
                CHECK(ix.multiply(1, s) == s);
                CHECK(ix.multiply(s, 1) == s);
            }
        }
    }
    SUBCASE("exponent addition, exhaustive for degree <= 3") {
        for (int n = 1; n <= 4; ++n) {
            MonomialIndexer ix(n);
            auto all = enumerate(n, 3);
            for (size_t r = 0; r < all.size(); ++r)
                for (size_t s = 0; s < all.size(); ++s)
                    CHECK(ix.multiply(r + 1, s + 1) == ix.index_of(add(all[r], all[s])));
        }
    }
    SUBCASE("commutative and associative on random triples") {
        std::mt19937_64 rng(1);
        MonomialIndexer ix(6);
        std::uniform_int_distribution<Index> pick(1, s_p(6, 3));
        int bad = 0;
        for (int k = 0; k < 10000; ++k) {
            Index a = pick(rng), b = pick(rng), c = pick(rng);
            if (ix.multiply(a, b) != ix.multiply(b, a)) ++bad;
            if (ix.multiply(ix.multiply(a, b), c) != ix.multiply(a, ix.multiply(b, c))) ++bad;
        }
        CHECK(bad == 0);
    }
}

TEST_CASE("structure table") {
    StructureTable tab(4, 4);
    MonomialIndexer ix(4);
    CHECK(tab.size() == s_p(4, 2));
    for (Index r = 1; r <= tab.size(); ++r) {
        CHECK(tab.product(1, r) == r);
        for (Index s = 1; s <= tab.size(); ++s) {
            CHECK(tab.product(r, s) == tab.product(s, r));
            CHECK(tab.product(r, s) == ix.multiply(r, s));
            CHECK(tab.coefficient(r, s, ix.multiply(r, s)) == 1);
        }
    }
    auto a = StructureTable::get(4, 4), b = StructureTable::get(4, 4);
    CHECK(a.get() == b.get());
}
