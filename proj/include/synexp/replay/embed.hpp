#pragma once

#include <cctype>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synexp/hashing.hpp"

namespace synexp {

inline constexpr int kEmbedDim = 256;

/// Lowercase alphanumeric word tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

/// Feature-hashed token counts, L2-normalized. Deterministic: same text gives
/// the same vector on every platform. The empty text maps to the zero vector.
inline std::vector<double> embed_text(std::string_view text) {
    std::vector<double> v(kEmbedDim, 0.0);
    for (const auto& tok : tokenize(text)) {
        v[fnv1a64(tok) % kEmbedDim] += 1.0;
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

/// Sparse view of an embedding: (index, value) pairs in ascending index
/// order. Because every skipped term of the dense dot product is exactly
/// zero, accumulating the sparse intersection in index order produces the
/// bit-identical result at a fraction of the cost.
using SparseVec = std::vector<std::pair<int, double>>;

inline SparseVec sparsify(std::span<const double> dense) {
    SparseVec out;
    for (std::size_t i = 0; i < dense.size(); ++i)
        if (dense[i] != 0.0) out.emplace_back(static_cast<int>(i), dense[i]);
    return out;
}

inline SparseVec embed_text_sparse(std::string_view text) { return sparsify(embed_text(text)); }

inline double sparse_dot(const SparseVec& a, const SparseVec& b) {
    double acc = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first < b[j].first) {
            ++i;
        } else if (a[i].first > b[j].first) {
            ++j;
        } else {
            acc += a[i].second * b[j].second;
            ++i;
            ++j;
        }
    }
    return acc;
}

/// Cosine over sparse unit-norm embeddings (zero vectors score 0).
inline double sparse_cosine(const SparseVec& a, const SparseVec& b) {
    if (a.empty() || b.empty()) return 0.0;
    const double na = sparse_dot(a, a);
    const double nb = sparse_dot(b, b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return sparse_dot(a, b) / std::sqrt(na * nb);
}

/// Cosine similarity of two embeddings. Stored vectors are unit norm (or
/// zero), so this is a plain dot product with a zero-vector guard.
inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = dot(a, a);
    const double nb = dot(b, b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / std::sqrt(na * nb);
}

}  // namespace synexp
