#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "acorsis/dataset.hpp"
#include "acorsis/errors.hpp"
#include "acorsis/penalize.hpp"
#include "acorsis/rng.hpp"
#include "acorsis/screening.hpp"
#include "acorsis/threading.hpp"

namespace acorsis {

/// The three main-effect structures of the simulation protocol:
/// (a) weak hierarchy, (b) strong hierarchy, (c) no hierarchy.
enum class HierCase { a, b, c };

inline std::string to_string(HierCase c) {
    switch (c) {
        case HierCase::a: return "a";
        case HierCase::b: return "b";
        default: return "c";
    }
}

inline HierCase parse_hier_case(const std::string& s) {
    if (s == "a") return HierCase::a;
    if (s == "b") return HierCase::b;
    if (s == "c") return HierCase::c;
    throw config_error("unknown case '" + s + "' (expected a, b, or c)");
}

enum class SimMethod { acor, all_pairs, acor_gresh, acor_shim };

inline std::string to_string(SimMethod m) {
    switch (m) {
        case SimMethod::acor: return "acor";
        case SimMethod::all_pairs: return "all_pairs";
        case SimMethod::acor_gresh: return "acor+gresh";
        default: return "acor+shim";
    }
}

inline SimMethod parse_sim_method(const std::string& s) {
    if (s == "acor") return SimMethod::acor;
    if (s == "all_pairs") return SimMethod::all_pairs;
    if (s == "acor+gresh") return SimMethod::acor_gresh;
    if (s == "acor+shim") return SimMethod::acor_shim;
    throw config_error("unknown method '" + s + "'");
}

inline bool is_fit_method(SimMethod m) { return m == SimMethod::acor_gresh || m == SimMethod::acor_shim; }

/// True coefficient structure of the generating model: interactions
/// (1,4), (1,5), (5,6) always carry coefficient 3; the main-effect pattern
/// depends on the case.
struct TruthSpec {
    std::vector<int> t_main;
    std::vector<std::pair<int, int>> t_inter;
    std::vector<int> t_active; // t_main plus all interaction endpoints
    std::map<int, double> beta_main;
    double beta_inter = 3.0;

    bool is_active(int j) const { return std::binary_search(t_active.begin(), t_active.end(), j); }
    bool is_true_inter(int j, int k) const {
        for (const auto& [a, b] : t_inter)
            if (a == j && b == k) return true;
        return false;
    }
};

inline TruthSpec truth_for_case(HierCase cse, int p) {
    if (p < 6) throw dimension_error("the generating model needs p >= 6");
    TruthSpec t;
    t.t_inter = {{1, 4}, {1, 5}, {5, 6}};
    switch (cse) {
        case HierCase::a:
            t.t_main = {1, 2, 3, 4};
            for (int j : t.t_main) t.beta_main[j] = 3.0;
            t.t_active = {1, 2, 3, 4, 5, 6};
            break;
        case HierCase::b:
            t.t_main = {1, 2, 3, 4, 5, 6};
            for (int j : t.t_main) t.beta_main[j] = 3.0;
            t.t_active = {1, 2, 3, 4, 5, 6};
            break;
        case HierCase::c:
            t.t_main = {};
            t.t_active = {1, 4, 5, 6};
            break;
    }
    return t;
}

/// Rows i.i.d. with AR(1) column covariance rho^|j-k| via the recursion
/// x_1 = z_1, x_j = rho x_{j-1} + sqrt(1-rho^2) z_j.
inline Matrix gen_design(int n, int p, double rho, RngStream& rng) {
    if (!(rho >= 0.0) || rho >= 1.0) throw config_error("rho must lie in [0, 1)");
    Matrix x(n, p);
    const double carry = std::sqrt(1.0 - rho * rho);
    for (int i = 0; i < n; ++i) {
        double prev = rng.normal();
        x.at(i, 0) = prev;
        for (int j = 1; j < p; ++j) {
            prev = rho * prev + carry * rng.normal();
            x.at(i, j) = prev;
        }
    }
    return x;
}

struct GeneratedResponse {
    std::vector<double> y;
    TruthSpec truth;
};

/// y = sum beta_j x_j + 3(x1 o x4 + x1 o x5 + x5 o x6) + noise_sd * eps.
/// noise_sd = 0 is the deterministic test hook.
inline GeneratedResponse gen_response(HierCase cse, const Matrix& x, RngStream& rng, double noise_sd = 1.0) {
    GeneratedResponse out;
    out.truth = truth_for_case(cse, x.cols());
    const int n = x.rows();
    out.y.assign(n, 0.0);
    for (const auto& [j, beta] : out.truth.beta_main) {
        std::span<const double> col = x.col(j - 1);
        for (int i = 0; i < n; ++i) out.y[i] += beta * col[i];
    }
    for (const auto& [j, k] : out.truth.t_inter) {
        std::span<const double> xj = x.col(j - 1);
        std::span<const double> xk = x.col(k - 1);
        for (int i = 0; i < n; ++i) out.y[i] += out.truth.beta_inter * xj[i] * xk[i];
    }
    for (int i = 0; i < n; ++i) out.y[i] += noise_sd * rng.normal();
    return out;
}

struct Scenario {
    int n = 0;
    int p = 0;
    double rho = 0.0;
    HierCase cse = HierCase::a;
    std::uint64_t seed = 1;
    int reps = 1;
    std::optional<double> gamma; // default 1/log(n) when neither set
    std::optional<int> d;

    void validate() const {
        if (n < 10) throw config_error("scenario needs n >= 10");
        if (p < 6) throw config_error("scenario needs p >= 6");
        if (reps < 1) throw config_error("scenario needs reps >= 1");
        if (!(rho >= 0.0) || rho >= 1.0) throw config_error("rho must lie in [0, 1)");
    }
    ScreenBudget budget() const {
        if (d) return ScreenBudget::from_d(*d);
        if (gamma) return ScreenBudget::from_gamma(*gamma);
        return ScreenBudget::default_for(n);
    }
};

struct RepRecord {
    int rep = 0;
    bool ok = false;
    bool covered = false;
    bool hierarchy_incomplete = false; // effect-based screening only
    bool sh_ok = true;
    double tp_main = 0.0;
    double tp_inter = 0.0;
    int fp_main = 0;
    int fp_inter = 0;
    std::string error;
};

namespace detail {

// The data stream for one replicate depends on (seed, rho, case, rep) but
// never the method, so every method sees identical datasets.
inline std::uint64_t replicate_seed(const Scenario& sc, int rep_index) {
    return mix_seed({sc.seed, 0x64617461u, std::bit_cast<std::uint64_t>(sc.rho),
                     static_cast<std::uint64_t>(sc.cse), static_cast<std::uint64_t>(rep_index)});
}

} // namespace detail

/// One Monte-Carlo replicate: draw a dataset from the per-replicate stream,
/// screen (and fit, for the two-stage methods), and record coverage,
/// true/false positives against the active variable set, and the hierarchy
/// indicator. Failures are flagged, never retried.
inline RepRecord run_replication(const Scenario& sc, SimMethod method, int rep_index) {
    RepRecord rec;
    rec.rep = rep_index;
    try {
        sc.validate();
        RngStream rng(detail::replicate_seed(sc, rep_index));
        Matrix x = gen_design(sc.n, sc.p, sc.rho, rng);
        GeneratedResponse gen = gen_response(sc.cse, x, rng);
        const TruthSpec truth = gen.truth;
        Dataset ds = standardize(std::move(gen.y), std::move(x), Family::gaussian);

        if (method == SimMethod::all_pairs) {
            const int d = sc.budget().resolve_d(sc.n);
            EffectSet effects = all_pairs_sis(ds, d);
            rec.hierarchy_incomplete = effects.hierarchy_incomplete();
            const std::vector<int> vars = effects.variables();
            rec.covered = true;
            for (int j : truth.t_active)
                if (!std::binary_search(vars.begin(), vars.end(), j)) rec.covered = false;
            rec.ok = true;
            return rec;
        }

        AcorScores scores = acor_all(ds);
        ShrunkSet s = shrunk_variable_set(scores, sc.budget());
        rec.covered = true;
        for (int j : truth.t_active)
            if (!s.contains(j)) rec.covered = false;

        if (is_fit_method(method)) {
            const double kappa = default_kappa(sc.p, sc.n);
            const PenaltyMethod pm = method == SimMethod::acor_gresh ? PenaltyMethod::gresh : PenaltyMethod::shim;
            GicResult res = lambda_path_gic(ds, s, pm, kappa);
            const CoefficientSet& model = res.chosen_model;

            int tp_main = 0;
            for (const auto& [j, v] : model.main) {
                (void)v;
                if (truth.is_active(j)) ++tp_main;
                else ++rec.fp_main;
            }
            int tp_inter = 0;
            for (const auto& [pair, v] : model.inter) {
                (void)v;
                if (truth.is_true_inter(pair.first, pair.second)) ++tp_inter;
                else ++rec.fp_inter;
            }
            rec.tp_main = static_cast<double>(tp_main) / static_cast<double>(truth.t_active.size());
            rec.tp_inter = static_cast<double>(tp_inter) / static_cast<double>(truth.t_inter.size());
            rec.sh_ok = check_sh(model).satisfied;
        }
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

struct ScenarioMetrics {
    int reps_total = 0;
    int reps_ok = 0;
    double coverage = 0.0;
    double coverage_se = 0.0; // binomial standard error
    double tp_main = 0.0;
    double tp_inter = 0.0;
    double fp_main = 0.0;
    double fp_inter = 0.0;
    double sh_rate = 0.0;
    double hierarchy_incomplete_rate = 0.0;
};

/// Deterministic fold of the per-replicate records (in rep order) into the
/// table-level means and rates.
inline ScenarioMetrics aggregate(const std::vector<RepRecord>& records) {
    ScenarioMetrics m;
    m.reps_total = static_cast<int>(records.size());
    for (const RepRecord& r : records) {
        if (!r.ok) continue;
        ++m.reps_ok;
        m.coverage += r.covered ? 1.0 : 0.0;
        m.tp_main += r.tp_main;
        m.tp_inter += r.tp_inter;
        m.fp_main += r.fp_main;
        m.fp_inter += r.fp_inter;
        m.sh_rate += r.sh_ok ? 1.0 : 0.0;
        m.hierarchy_incomplete_rate += r.hierarchy_incomplete ? 1.0 : 0.0;
    }
    if (m.reps_ok == 0) throw simulation_error("all replicates failed");
    const double k = static_cast<double>(m.reps_ok);
    m.coverage /= k;
    m.tp_main /= k;
    m.tp_inter /= k;
    m.fp_main /= k;
    m.fp_inter /= k;
    m.sh_rate /= k;
    m.hierarchy_incomplete_rate /= k;
    m.coverage_se = std::sqrt(m.coverage * (1.0 - m.coverage) / k);
    return m;
}

struct SimulationPlan {
    int n = 200;
    int p = 2000;
    int reps = 100;
    std::uint64_t seed = 1;
    std::vector<double> rhos = {0.0};
    std::vector<HierCase> cases = {HierCase::a};
    std::vector<SimMethod> methods = {SimMethod::acor};
    std::optional<double> gamma;
    std::optional<int> d;
};

/// Key-value scenario configuration: one `key = value` (or `key value`)
/// entry per line, '#' comments, lists space-separated. Keys: n, p, reps,
/// seed, rho, case, methods, gamma, d.
inline SimulationPlan parse_simulation_config(std::istream& in) {
    SimulationPlan plan;
    plan.rhos.clear();
    plan.cases.clear();
    plan.methods.clear();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        std::string rest;
        std::getline(ls, rest);
        // strip an optional '=' separator
        std::size_t pos = rest.find_first_not_of(" \t");
        if (pos != std::string::npos && rest[pos] == '=') rest.erase(0, pos + 1);
        std::istringstream vs(rest);
        auto want_one = [&](auto& slot) {
            if (!(vs >> slot)) throw config_error("line " + std::to_string(line_no) + ": missing value for " + key);
            std::string extra;
            if (vs >> extra) throw config_error("line " + std::to_string(line_no) + ": single value expected for " + key);
        };
        try {
            if (key == "n") want_one(plan.n);
            else if (key == "p") want_one(plan.p);
            else if (key == "reps") want_one(plan.reps);
            else if (key == "seed") want_one(plan.seed);
            else if (key == "gamma") {
                double g;
                want_one(g);
                plan.gamma = g;
            } else if (key == "d") {
                int d;
                want_one(d);
                plan.d = d;
            } else if (key == "rho") {
                double v;
                while (vs >> v) plan.rhos.push_back(v);
                if (plan.rhos.empty()) throw config_error("line " + std::to_string(line_no) + ": rho needs values");
            } else if (key == "case") {
                std::string v;
                while (vs >> v) plan.cases.push_back(parse_hier_case(v));
                if (plan.cases.empty()) throw config_error("line " + std::to_string(line_no) + ": case needs values");
            } else if (key == "methods") {
                std::string v;
                while (vs >> v) plan.methods.push_back(parse_sim_method(v));
                if (plan.methods.empty()) throw config_error("line " + std::to_string(line_no) + ": methods needs values");
            } else {
                throw config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        } catch (const config_error&) {
            throw;
        } catch (const std::exception&) {
            throw config_error("line " + std::to_string(line_no) + ": malformed value for " + key);
        }
    }
    if (plan.rhos.empty()) plan.rhos = {0.0};
    if (plan.cases.empty()) plan.cases = {HierCase::a};
    if (plan.methods.empty()) plan.methods = {SimMethod::acor};
    // validate one representative scenario per cell
    for (double rho : plan.rhos) {
        Scenario sc{plan.n, plan.p, rho, plan.cases.front(), plan.seed, plan.reps, plan.gamma, plan.d};
        sc.validate();
        sc.budget().resolve_d(plan.n);
    }
    return plan;
}

struct CellResult {
    SimMethod method;
    double rho = 0.0;
    HierCase cse = HierCase::a;
    ScenarioMetrics metrics;
    int failed_reps = 0;
};

/// Run every (method, rho, case) cell of the plan. Replicates run in
/// parallel on their own streams; the record vector is indexed by replicate,
/// so the aggregation is identical for any worker count.
inline std::vector<CellResult> run_plan(const SimulationPlan& plan, int threads,
                                        const std::function<void(const std::string&)>& log = {}) {
    std::vector<CellResult> out;
    const int nw = resolve_threads(threads);
    for (SimMethod method : plan.methods) {
        for (double rho : plan.rhos) {
            for (HierCase cse : plan.cases) {
                Scenario sc{plan.n, plan.p, rho, cse, plan.seed, plan.reps, plan.gamma, plan.d};
                sc.validate();
                if (log)
                    log("cell method=" + to_string(method) + " rho=" + std::to_string(rho) +
                        " case=" + to_string(cse) + " reps=" + std::to_string(sc.reps));
                std::vector<RepRecord> records(sc.reps);
                parallel_blocks(0, sc.reps, nw, [&](int lo, int hi, int) {
                    for (int r = lo; r < hi; ++r) records[r] = run_replication(sc, method, r);
                });
                CellResult cell;
                cell.method = method;
                cell.rho = rho;
                cell.cse = cse;
                cell.metrics = aggregate(records);
                cell.failed_reps = cell.metrics.reps_total - cell.metrics.reps_ok;
                out.push_back(std::move(cell));
            }
        }
    }
    return out;
}

namespace detail {

inline std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace detail

/// Coverage table: one row per (method, rho, case) cell.
inline void write_coverage_table(const std::vector<CellResult>& cells, std::ostream& os,
                                 const std::string& manifest_ref) {
    os << "# coverage of the active variable set by the screening stage\n";
    if (!manifest_ref.empty()) os << "# manifest: " << manifest_ref << "\n";
    os << "method\trho\tcase\treps_ok\tcoverage\tse\thierarchy_incomplete\n";
    for (const CellResult& c : cells) {
        os << to_string(c.method) << '\t' << detail::fmt_fixed(c.rho, 2) << '\t' << to_string(c.cse) << '\t'
           << c.metrics.reps_ok << '\t' << detail::fmt_fixed(c.metrics.coverage, 4) << '\t'
           << detail::fmt_fixed(c.metrics.coverage_se, 4) << '\t'
           << detail::fmt_fixed(c.metrics.hierarchy_incomplete_rate, 4) << '\n';
    }
}

/// True/false positive table (two-stage methods only).
inline void write_tp_fp_table(const std::vector<CellResult>& cells, std::ostream& os,
                              const std::string& manifest_ref) {
    os << "# true-positive proportions and false-positive counts of the selected models\n";
    if (!manifest_ref.empty()) os << "# manifest: " << manifest_ref << "\n";
    os << "method\trho\tcase\treps_ok\ttp_main\ttp_inter\tfp_main\tfp_inter\n";
    for (const CellResult& c : cells) {
        if (!is_fit_method(c.method)) continue;
        os << to_string(c.method) << '\t' << detail::fmt_fixed(c.rho, 2) << '\t' << to_string(c.cse) << '\t'
           << c.metrics.reps_ok << '\t' << detail::fmt_fixed(c.metrics.tp_main, 4) << '\t'
           << detail::fmt_fixed(c.metrics.tp_inter, 4) << '\t' << detail::fmt_fixed(c.metrics.fp_main, 3) << '\t'
           << detail::fmt_fixed(c.metrics.fp_inter, 3) << '\n';
    }
}

/// Strong-hierarchy satisfaction table (two-stage methods only).
inline void write_sh_table(const std::vector<CellResult>& cells, std::ostream& os, const std::string& manifest_ref) {
    os << "# proportion of replicates whose selected model satisfies strong hierarchy\n";
    if (!manifest_ref.empty()) os << "# manifest: " << manifest_ref << "\n";
    os << "method\trho\tcase\treps_ok\tsh_rate\n";
    for (const CellResult& c : cells) {
        if (!is_fit_method(c.method)) continue;
        os << to_string(c.method) << '\t' << detail::fmt_fixed(c.rho, 2) << '\t' << to_string(c.cse) << '\t'
           << c.metrics.reps_ok << '\t' << detail::fmt_fixed(c.metrics.sh_rate, 4) << '\n';
    }
}

} // namespace acorsis
