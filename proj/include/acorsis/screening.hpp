#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "acorsis/dataset.hpp"
#include "acorsis/errors.hpp"
#include "acorsis/glm.hpp"
#include "acorsis/threading.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define ACORSIS_KERNEL_AVX2 1
#endif

namespace acorsis {

namespace detail {

struct PairSums {
    double sz = 0.0;  // sum of z
    double szz = 0.0; // sum of z^2
    double szy = 0.0; // sum of z*y
};

/// Sums over z_i = a_i * b_i (b == nullptr means z = a) against y, computed
/// with four independent accumulator lanes and no scratch buffer. This is
/// the entire per-pair working set of the screening stage: three running
/// sums, never a materialized product column.
inline PairSums pair_sums(const double* a, const double* b, const double* y, int n) {
    PairSums out;
    int i = 0;
#ifdef ACORSIS_KERNEL_AVX2
    __m256d vz = _mm256_setzero_pd();
    __m256d vzz = _mm256_setzero_pd();
    __m256d vzy = _mm256_setzero_pd();
    if (b != nullptr) {
        for (; i + 4 <= n; i += 4) {
            const __m256d va = _mm256_loadu_pd(a + i);
            const __m256d vb = _mm256_loadu_pd(b + i);
            const __m256d vy = _mm256_loadu_pd(y + i);
            const __m256d z = _mm256_mul_pd(va, vb);
            vz = _mm256_add_pd(vz, z);
            vzz = _mm256_fmadd_pd(z, z, vzz);
            vzy = _mm256_fmadd_pd(z, vy, vzy);
        }
    } else {
        for (; i + 4 <= n; i += 4) {
            const __m256d z = _mm256_loadu_pd(a + i);
            const __m256d vy = _mm256_loadu_pd(y + i);
            vz = _mm256_add_pd(vz, z);
            vzz = _mm256_fmadd_pd(z, z, vzz);
            vzy = _mm256_fmadd_pd(z, vy, vzy);
        }
    }
    alignas(32) double lz[4], lzz[4], lzy[4];
    _mm256_store_pd(lz, vz);
    _mm256_store_pd(lzz, vzz);
    _mm256_store_pd(lzy, vzy);
    out.sz = (lz[0] + lz[1]) + (lz[2] + lz[3]);
    out.szz = (lzz[0] + lzz[1]) + (lzz[2] + lzz[3]);
    out.szy = (lzy[0] + lzy[1]) + (lzy[2] + lzy[3]);
#else
    double sz[4] = {0, 0, 0, 0}, szz[4] = {0, 0, 0, 0}, szy[4] = {0, 0, 0, 0};
    if (b != nullptr) {
        for (; i + 4 <= n; i += 4) {
            for (int l = 0; l < 4; ++l) {
                const double z = a[i + l] * b[i + l];
                sz[l] += z;
                szz[l] += z * z;
                szy[l] += z * y[i + l];
            }
        }
    } else {
        for (; i + 4 <= n; i += 4) {
            for (int l = 0; l < 4; ++l) {
                const double z = a[i + l];
                sz[l] += z;
                szz[l] += z * z;
                szy[l] += z * y[i + l];
            }
        }
    }
    out.sz = (sz[0] + sz[1]) + (sz[2] + sz[3]);
    out.szz = (szz[0] + szz[1]) + (szz[2] + szz[3]);
    out.szy = (szy[0] + szy[1]) + (szy[2] + szy[3]);
#endif
    for (; i < n; ++i) {
        const double z = b != nullptr ? a[i] * b[i] : a[i];
        out.sz += z;
        out.szz += z * z;
        out.szy += z * y[i];
    }
    return out;
}

/// Precomputed response moments shared by every pair of one dataset.
struct ResponseMoments {
    double sy = 0.0;
    double syy = 0.0;
    int n = 0;
    int n1 = 0;
    Family family = Family::gaussian;
};

inline ResponseMoments response_moments(const Dataset& ds) {
    ResponseMoments m;
    m.n = ds.n;
    m.n1 = ds.n1;
    m.family = ds.family;
    for (double v : ds.y) {
        m.sy += v;
        m.syy += v * v;
    }
    return m;
}

/// Correlation of z against y from the pair sums; defined=false marks a
/// zero-variance product column (treated as score 0 by callers).
inline double pair_score(const PairSums& s, const ResponseMoments& m, bool* defined) {
    if (m.family == Family::gaussian) {
        MomentSums ms;
        ms.su = s.sz;
        ms.suu = s.szz;
        ms.suv = s.szy;
        ms.sv = m.sy;
        ms.svv = m.syy;
        return correlation_from_moments(ms, static_cast<std::size_t>(m.n), defined);
    }
    const double dn = static_cast<double>(m.n);
    const double dn1 = static_cast<double>(m.n1);
    const double zbar = s.sz / dn;
    const double centered_ssq = s.szz - dn * zbar * zbar;
    const bool ok = centered_ssq > 1e-12 * std::max(s.szz, 1e-300);
    if (defined) *defined = ok;
    if (!ok) return 0.0;
    const double class1 = s.szy - dn1 * zbar;                       // sum over y=1 of (z - zbar)
    const double class0 = (s.sz - s.szy) - (dn - dn1) * zbar;       // sum over y=0 of (z - zbar)
    const double num = ((dn - dn1) / dn) * class1 - (dn1 / dn) * class0;
    const double den = std::sqrt(centered_ssq * (dn1 - 2.0 * dn1 / dn + dn1 * dn1 / dn));
    double r = num / den;
    if (r > 1.0) r = 1.0;
    if (r < -1.0) r = -1.0;
    return r;
}

} // namespace detail

/// Per-variable aggregated correlation scores with the partner index that
/// achieves each maximum (0 = the main effect itself won).
struct AcorScores {
    std::vector<double> scores;      // scores[j-1] for variable j
    std::vector<int> argmax_partner; // partner[j-1] in 0..p
    int n = 0;
    Family family = Family::gaussian;
    long zero_variance_pairs = 0;
};

/// Aggregated correlation of variable j: the maximum of |cor(x_j o x_k, y)|
/// over k in {0,...,p}\{j}, the smallest maximizing k reported as partner.
/// Uses the family-appropriate correlation (Pearson, or the binary form).
inline std::pair<double, int> acor(const Dataset& ds, int j) {
    if (j < 1 || j > ds.p) throw index_error("acor: variable index out of range");
    const detail::ResponseMoments m = detail::response_moments(ds);
    const double* xj = ds.x(j).data();
    const double* yp = ds.y.data();
    double best = -1.0;
    int partner = 0;
    for (int k = 0; k <= ds.p; ++k) {
        if (k == j) continue;
        const double* xk = k == 0 ? nullptr : ds.x(k).data();
        const detail::PairSums s = detail::pair_sums(xj, xk, yp, ds.n);
        bool defined = false;
        const double score = std::fabs(detail::pair_score(s, m, &defined));
        if (score > best) {
            best = score;
            partner = k;
        }
    }
    return {best, partner};
}

/// Aggregated correlation scores for every variable. Work is split over
/// variables; each worker keeps only its three running sums, so the extra
/// memory beyond the dataset is the p-length output itself and the result
/// is identical for any worker count.
inline AcorScores acor_all(const Dataset& ds, int threads = 1) {
    AcorScores out;
    out.n = ds.n;
    out.family = ds.family;
    out.scores.assign(ds.p, 0.0);
    out.argmax_partner.assign(ds.p, 0);
    const detail::ResponseMoments m = detail::response_moments(ds);
    const int nw = resolve_threads(threads);
    std::vector<long> zv_counts(static_cast<std::size_t>(std::max(nw, 1)), 0);

    parallel_blocks(1, ds.p + 1, nw, [&](int lo, int hi, int worker) {
        const double* yp = ds.y.data();
        long zv = 0;
        for (int j = lo; j < hi; ++j) {
            const double* xj = ds.x(j).data();
            double best = -1.0;
            int partner = 0;
            for (int k = 0; k <= ds.p; ++k) {
                if (k == j) continue;
                const double* xk = k == 0 ? nullptr : ds.x(k).data();
                const detail::PairSums s = detail::pair_sums(xj, xk, yp, ds.n);
                bool defined = false;
                const double score = std::fabs(detail::pair_score(s, m, &defined));
                if (!defined) ++zv;
                if (score > best) {
                    best = score;
                    partner = k;
                }
            }
            out.scores[j - 1] = best;
            out.argmax_partner[j - 1] = partner;
        }
        zv_counts[worker] += zv;
    });
    for (long c : zv_counts) out.zero_variance_pairs += c;
    return out;
}

/// acor_all for a binomial dataset; the binary correlation replaces Pearson.
inline AcorScores binary_acor_all(const Dataset& ds, int threads = 1) {
    if (ds.family != Family::binomial) throw degenerate_response_error("binary_acor_all needs a binomial dataset");
    return acor_all(ds, threads);
}

/// Correlation between a column and a 0/1 response, in the form used for
/// binary screening: class-contrast numerator over a pooled scale. n1 is the
/// class-1 count and must match y.
inline double binary_cor(std::span<const double> z, std::span<const double> y, int n1) {
    const int n = static_cast<int>(z.size());
    if (y.size() != z.size()) throw dimension_error("binary_cor: length mismatch");
    int ones = 0;
    for (double v : y) {
        if (v == 1.0) ++ones;
        else if (v != 0.0) throw degenerate_response_error("binary_cor: response entries must be 0 or 1");
    }
    if (ones != n1) throw degenerate_response_error("binary_cor: n1 does not match the response");
    if (n1 <= 0 || n1 >= n) throw degenerate_response_error("binary_cor: both classes must be present");
    detail::PairSums s;
    for (int i = 0; i < n; ++i) {
        s.sz += z[i];
        s.szz += z[i] * z[i];
        s.szy += z[i] * y[i];
    }
    detail::ResponseMoments m;
    m.n = n;
    m.n1 = n1;
    m.family = Family::binomial;
    bool defined = false;
    const double r = detail::pair_score(s, m, &defined);
    if (!defined) throw zero_variance_error(0, "binary_cor: zero-variance column");
    return r;
}

/// How many variables the screening stage keeps: a fraction gamma of n
/// (floored), or an explicit override. The conventional default is
/// gamma = 1/log(n).
struct ScreenBudget {
    double gamma = 0.0;
    std::optional<int> d_override;

    static ScreenBudget from_gamma(double g) { return {g, std::nullopt}; }
    static ScreenBudget from_d(int d) { return {std::numeric_limits<double>::quiet_NaN(), d}; }
    static ScreenBudget default_for(int n) { return {1.0 / std::log(static_cast<double>(n)), std::nullopt}; }

    int resolve_d(int n) const {
        if (d_override) {
            if (*d_override < 1) throw invalid_gamma_error("explicit d must be >= 1");
            return *d_override;
        }
        if (!(gamma > 0.0) || gamma > 1.0) throw invalid_gamma_error("gamma must lie in (0, 1]");
        const int d = static_cast<int>(std::floor(gamma * static_cast<double>(n)));
        if (d < 1) throw invalid_gamma_error("gamma * n is below 1");
        return d;
    }
};

/// The screened variable set: the d highest-scoring variables, ascending.
struct ShrunkSet {
    std::vector<int> indices; // ascending, 1-based
    int d = 0;                // resolved target size (before clamping to p)
    double gamma = std::numeric_limits<double>::quiet_NaN();
    bool clamped = false;     // d exceeded p

    bool contains(int j) const { return std::binary_search(indices.begin(), indices.end(), j); }
};

/// Keep the top-d variables by score; ties broken by ascending index so the
/// selection is deterministic and nested as d grows.
inline ShrunkSet shrunk_variable_set(const AcorScores& scores, const ScreenBudget& budget) {
    const int p = static_cast<int>(scores.scores.size());
    ShrunkSet out;
    out.d = budget.resolve_d(scores.n);
    out.gamma = budget.d_override ? std::numeric_limits<double>::quiet_NaN() : budget.gamma;
    int keep = out.d;
    if (keep > p) {
        keep = p;
        out.clamped = true;
    }
    std::vector<int> order(p);
    for (int j = 0; j < p; ++j) order[j] = j + 1;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double sa = scores.scores[a - 1], sb = scores.scores[b - 1];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    out.indices.assign(order.begin(), order.begin() + keep);
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

/// The screened set of effects used by the all-pairs baseline.
struct EffectSet {
    std::vector<EffectIndex> effects; // lexicographic
    int d = 0;
    bool clamped = false;
    long zero_variance_pairs = 0;

    bool contains(const EffectIndex& e) const {
        return std::binary_search(effects.begin(), effects.end(), e);
    }
    /// Variables touched by any retained effect (mains and endpoints).
    std::vector<int> variables() const {
        std::vector<int> v;
        for (const EffectIndex& e : effects) {
            if (e.j >= 1) v.push_back(e.j);
            v.push_back(e.k);
        }
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }
    /// True when some retained interaction lacks a retained parent main
    /// effect, i.e. the screened model cannot satisfy strong hierarchy.
    bool hierarchy_incomplete() const {
        for (const EffectIndex& e : effects) {
            if (e.j < 1) continue;
            if (!contains({0, e.j}) || !contains({0, e.k})) return true;
        }
        return false;
    }
};

/// Effect-based screening baseline: rank every candidate effect (j,k),
/// 0 <= j < k <= p, by |cor(z_jk, y)| and keep the top d. Ties break toward
/// the lexicographically smaller pair. Memory stays O(d) per worker.
inline EffectSet all_pairs_sis(const Dataset& ds, int d, int threads = 1) {
    if (d < 1) throw invalid_gamma_error("all_pairs_sis: d must be >= 1");
    const long total = static_cast<long>(ds.p) * (ds.p + 1) / 2;
    EffectSet out;
    out.d = d;
    if (d >= total) {
        out.clamped = d > total;
        d = static_cast<int>(total);
    }

    struct Candidate {
        double score;
        EffectIndex e;
    };
    // "worse" ordering: lower score, then lexicographically larger pair
    auto worse = [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score < b.score;
        return b.e < a.e;
    };
    auto better = [&](const Candidate& a, const Candidate& b) { return worse(b, a); };

    const detail::ResponseMoments m = detail::response_moments(ds);
    const int nw = resolve_threads(threads);
    std::vector<std::vector<Candidate>> kept(static_cast<std::size_t>(std::max(nw, 1)));
    std::vector<long> zv_counts(kept.size(), 0);

    // j = 0 row (main effects) plus interaction rows, partitioned by j.
    // The heap is ordered so its top is the worst kept candidate.
    parallel_blocks(0, ds.p, nw, [&](int lo, int hi, int worker) {
        std::priority_queue<Candidate, std::vector<Candidate>, decltype(better)> heap(better);
        const double* yp = ds.y.data();
        long zv = 0;
        auto offer = [&](double score, EffectIndex e) {
            Candidate c{score, e};
            if (static_cast<int>(heap.size()) < d) {
                heap.push(c);
            } else if (better(c, heap.top())) {
                heap.pop();
                heap.push(c);
            }
        };
        for (int j = lo; j < hi; ++j) {
            const double* xj = j == 0 ? nullptr : ds.x(j).data();
            for (int k = j + 1; k <= ds.p; ++k) {
                const double* xk = ds.x(k).data();
                const detail::PairSums s = j == 0 ? detail::pair_sums(xk, nullptr, yp, ds.n)
                                                  : detail::pair_sums(xj, xk, yp, ds.n);
                bool defined = false;
                const double score = std::fabs(detail::pair_score(s, m, &defined));
                if (!defined) ++zv;
                offer(score, {j, k});
            }
        }
        auto& bucket = kept[worker];
        bucket.reserve(heap.size());
        while (!heap.empty()) {
            bucket.push_back(heap.top());
            heap.pop();
        }
        zv_counts[worker] += zv;
    });

    std::vector<Candidate> all;
    for (auto& bucket : kept) all.insert(all.end(), bucket.begin(), bucket.end());
    for (long c : zv_counts) out.zero_variance_pairs += c;
    std::sort(all.begin(), all.end(), [&](const Candidate& a, const Candidate& b) { return better(a, b); });
    if (static_cast<int>(all.size()) > d) all.resize(d);
    out.effects.reserve(all.size());
    for (const Candidate& c : all) out.effects.push_back(c.e);
    std::sort(out.effects.begin(), out.effects.end());
    return out;
}

/// Aggregated likelihood-ratio screening scores: for each variable, the
/// largest single-effect deviance reduction over an intercept-only GLM.
struct AggregatedLrt {
    std::vector<double> values;
    std::vector<int> argmax_partner;
    long glm_failures = 0; // nonconvergent fits, contribution 0
    long separations = 0;  // contribution capped at the null deviance
};

inline AggregatedLrt aggregated_lrt(const Dataset& ds, int threads = 1) {
    AggregatedLrt out;
    out.values.assign(ds.p, 0.0);
    out.argmax_partner.assign(ds.p, 0);
    const int nw = resolve_threads(threads);
    std::vector<long> fail_counts(static_cast<std::size_t>(std::max(nw, 1)), 0);
    std::vector<long> sep_counts(fail_counts.size(), 0);

    if (ds.family == Family::gaussian) {
        // Gaussian deviance drop is -n * log(1 - r^2): a monotone transform
        // of |r|, so it shares the pair kernel and needs no model fits.
        const detail::ResponseMoments m = detail::response_moments(ds);
        parallel_blocks(1, ds.p + 1, nw, [&](int lo, int hi, int) {
            const double* yp = ds.y.data();
            for (int j = lo; j < hi; ++j) {
                const double* xj = ds.x(j).data();
                double best = -1.0;
                int partner = 0;
                for (int k = 0; k <= ds.p; ++k) {
                    if (k == j) continue;
                    const double* xk = k == 0 ? nullptr : ds.x(k).data();
                    bool defined = false;
                    const double r = detail::pair_score(detail::pair_sums(xj, xk, yp, ds.n), m, &defined);
                    double r2 = r * r;
                    if (r2 > 1.0 - 1e-12) r2 = 1.0 - 1e-12;
                    const double dev = -static_cast<double>(ds.n) * std::log1p(-r2);
                    if (dev > best) {
                        best = dev;
                        partner = k;
                    }
                }
                out.values[j - 1] = best;
                out.argmax_partner[j - 1] = partner;
            }
        });
        return out;
    }

    const double null_dev = binomial_null_deviance(ds.y);
    parallel_blocks(1, ds.p + 1, nw, [&](int lo, int hi, int worker) {
        std::vector<double> z(ds.n); // the one per-worker column buffer
        for (int j = lo; j < hi; ++j) {
            std::span<const double> xj = ds.x(j);
            double best = -1.0;
            int partner = 0;
            for (int k = 0; k <= ds.p; ++k) {
                if (k == j) continue;
                if (k == 0) {
                    std::copy(xj.begin(), xj.end(), z.begin());
                } else {
                    std::span<const double> xk = ds.x(k);
                    for (int i = 0; i < ds.n; ++i) z[i] = xj[i] * xk[i];
                }
                double contribution = 0.0;
                const double* zp = z.data();
                const LogisticFit fit = logistic_irls(std::span<const double* const>(&zp, 1), ds.n, ds.y);
                if (fit.separated) {
                    contribution = null_dev;
                    ++sep_counts[worker];
                } else if (!fit.converged) {
                    contribution = 0.0;
                    ++fail_counts[worker];
                } else {
                    contribution = std::max(0.0, std::min(null_dev, null_dev - fit.deviance));
                }
                if (contribution > best) {
                    best = contribution;
                    partner = k;
                }
            }
            out.values[j - 1] = best;
            out.argmax_partner[j - 1] = partner;
        }
    });
    for (long c : fail_counts) out.glm_failures += c;
    for (long c : sep_counts) out.separations += c;
    return out;
}

} // namespace acorsis
