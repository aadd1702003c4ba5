#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace cslidar {

namespace detail {

// In-place Walsh-Hadamard butterfly, natural (Hadamard) ordering:
// H(a, b) = (-1)^popcount(a & b). Unnormalized; applying twice scales by n.
inline void fwht(double* v, std::size_t n) {
    for (std::size_t h = 1; h < n; h *= 2) {
        for (std::size_t i = 0; i < n; i += 2 * h) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = v[j];
                const double b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
    }
}

inline bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

} // namespace detail

// Measurement bases over n = width*height pixels.
//
//   raster:      rows are canonical unit vectors e_i (one pixel at a time).
//   fast_binary: T = P^T H P, a Walsh-Hadamard matrix conjugated by a random
//                pixel permutation P with p(0) = 0. T is symmetric, entries
//                are +-1, T*T = n*I, row 0 is all-ones (the DC row), and every
//                other row has exactly n/2 entries of each sign, so its DMD
//                mask opens exactly half the pixels. The permutation decouples
//                mask structure from scene structure while keeping the O(n log n)
//                transform.
struct MeasurementBasis {
    enum class Kind { raster, fast_binary };

    Kind kind = Kind::raster;
    int n = 0;
    std::uint64_t permutation_seed = 0;
    std::vector<std::uint32_t> perm;  // fast_binary only

    static MeasurementBasis raster(int n) {
        if (n < 1) throw std::invalid_argument("basis: n must be >= 1");
        return MeasurementBasis{Kind::raster, n, 0, {}};
    }

    static MeasurementBasis fast_binary(int n, std::uint64_t permutation_seed) {
        if (!detail::is_pow2(n))
            throw std::invalid_argument("basis: fast_binary requires power-of-two n");
        MeasurementBasis b{Kind::fast_binary, n, permutation_seed, {}};
        b.perm.resize(n);
        std::iota(b.perm.begin(), b.perm.end(), 0u);
        std::mt19937_64 rng = make_stream(permutation_seed, 0xba515);
        // Fisher-Yates over [1, n): index 0 stays fixed so row 0 is the DC row.
        for (int i = n - 1; i > 1; --i) {
            std::uniform_int_distribution<int> d(1, i);
            std::swap(b.perm[i], b.perm[d(rng)]);
        }
        return b;
    }
};

// y = T x for the fast_binary basis, O(n log n) and matrix-free.
// T is symmetric and T(Tx) = n*x.
inline std::vector<double> fast_transform(const MeasurementBasis& basis,
                                          const std::vector<double>& x) {
    if (basis.kind != MeasurementBasis::Kind::fast_binary)
        throw std::invalid_argument("fast_transform: basis is not fast_binary");
    if (static_cast<int>(x.size()) != basis.n)
        throw std::invalid_argument("fast_transform: input length != n");
    const std::size_t n = x.size();
    std::vector<double> t(n), out(n);
    for (std::size_t i = 0; i < n; ++i) t[basis.perm[i]] = x[i];
    detail::fwht(t.data(), n);
    for (std::size_t i = 0; i < n; ++i) out[i] = t[basis.perm[i]];
    return out;
}

// Row `index` of the basis matrix. fast_binary entries are +-1 and satisfy
// row(b, i) == fast_transform(b, e_i); raster rows use the 0/1 convention.
inline std::vector<double> row(const MeasurementBasis& basis, int index) {
    if (index < 0 || index >= basis.n)
        throw std::invalid_argument("row: index outside [0, n)");
    std::vector<double> r(basis.n, 0.0);
    if (basis.kind == MeasurementBasis::Kind::raster) {
        r[index] = 1.0;
        return r;
    }
    const std::uint32_t pi = basis.perm[index];
    for (int j = 0; j < basis.n; ++j) {
        const std::uint32_t pj = basis.perm[j];
        r[j] = (std::popcount(pi & pj) & 1) ? -1.0 : 1.0;
    }
    return r;
}

// Complementary binary mirror patterns realizing one +-1 row: `positive`
// opens mirrors where the row is +1, `negative` where it is -1 (or zero).
struct DmdMaskPair {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> positive;
    std::vector<std::uint8_t> negative;
};

inline DmdMaskPair to_dmd(const std::vector<double>& row_values, int width, int height) {
    if (static_cast<std::size_t>(width) * height != row_values.size())
        throw std::invalid_argument("to_dmd: width*height != row length");
    DmdMaskPair m{width, height, {}, {}};
    m.positive.resize(row_values.size());
    m.negative.resize(row_values.size());
    for (std::size_t i = 0; i < row_values.size(); ++i) {
        m.positive[i] = row_values[i] > 0.0 ? 1 : 0;
        m.negative[i] = m.positive[i] ? 0 : 1;
    }
    return m;
}

// mu(A, B) = sqrt(n) * max |<a_i, b_j>| over all row pairs. Rows must be
// unit-norm within 1e-9. O(rows_A * rows_B * n): intended for n <= 256.
inline double mutual_incoherence(const std::vector<std::vector<double>>& a,
                                 const std::vector<std::vector<double>>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("mutual_incoherence: empty basis");
    const std::size_t n = a.front().size();
    if (n == 0 || b.front().size() != n)
        throw std::invalid_argument("mutual_incoherence: dimension mismatch");
    auto check_rows = [n](const std::vector<std::vector<double>>& rows) {
        for (const auto& r : rows) {
            if (r.size() != n)
                throw std::invalid_argument("mutual_incoherence: ragged rows");
            double s = 0.0;
            for (double v : r) s += v * v;
            if (std::fabs(std::sqrt(s) - 1.0) > 1e-9)
                throw std::invalid_argument("mutual_incoherence: rows must be unit-norm");
        }
    };
    check_rows(a);
    check_rows(b);
    double best = 0.0;
    for (const auto& ra : a)
        for (const auto& rb : b) {
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k) dot += ra[k] * rb[k];
            best = std::max(best, std::fabs(dot));
        }
    return std::sqrt(static_cast<double>(n)) * best;
}

// Convenience constructions for incoherence checks.
inline std::vector<std::vector<double>> canonical_rows(int n) {
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) rows[i][i] = 1.0;
    return rows;
}

inline std::vector<std::vector<double>> normalized_rows(const MeasurementBasis& basis) {
    std::vector<std::vector<double>> rows;
    rows.reserve(basis.n);
    const double s = basis.kind == MeasurementBasis::Kind::fast_binary
                         ? 1.0 / std::sqrt(static_cast<double>(basis.n))
                         : 1.0;
    for (int i = 0; i < basis.n; ++i) {
        auto r = row(basis, i);
        for (double& v : r) v *= s;
        rows.push_back(std::move(r));
    }
    return rows;
}

// An ordered set of basis rows to measure, each repeated `repeats` times.
struct MaskSchedule {
    MeasurementBasis basis;
    std::vector<int> rows;
    int repeats = 1;
};

// Draws m distinct row indices. When m == n every row is used in order;
// otherwise rows are sampled uniformly from [1, n) in random order, always
// excluding the all-ones DC row 0 (it carries no contrast and its photon
// load dwarfs the rest).
inline MaskSchedule select_rows(const MeasurementBasis& basis, int m, std::uint64_t seed) {
    if (m < 1 || m > basis.n)
        throw std::invalid_argument("select_rows: m outside [1, n]");
    MaskSchedule s{basis, {}, 1};
    s.rows.resize(m);
    if (m == basis.n) {
        std::iota(s.rows.begin(), s.rows.end(), 0);
        return s;
    }
    std::vector<int> pool(basis.n - 1);
    std::iota(pool.begin(), pool.end(), 1);
    std::mt19937_64 rng = make_stream(seed, 0x5e1ec7);
    for (int i = 0; i < m; ++i) {
        std::uniform_int_distribution<int> d(i, static_cast<int>(pool.size()) - 1);
        std::swap(pool[i], pool[d(rng)]);
        s.rows[i] = pool[i];
    }
    return s;
}

} // namespace cslidar
