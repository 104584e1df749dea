// Command-line front end: screening reports, penalized fits, and the
// simulation harness, all on top of the header-only library.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "acorsis/csv.hpp"
#include "acorsis/dataset.hpp"
#include "acorsis/penalize.hpp"
#include "acorsis/report.hpp"
#include "acorsis/screening.hpp"
#include "acorsis/simulate.hpp"
#include "acorsis/threading.hpp"

namespace {

using namespace acorsis;

namespace fs = std::filesystem;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

Family parse_family(const std::string& s) {
    if (s == "gaussian") return Family::gaussian;
    if (s == "binomial") return Family::binomial;
    throw config_error("unknown family '" + s + "'");
}

/// Load a CSV into a Dataset, mapping zero-variance errors to column names.
LoadedData load_data(const std::string& path, const std::string& response, Family family) {
    std::ifstream in(path);
    if (!in) throw csv_error("cannot open '" + path + "'");
    CsvTable table = read_csv(in);
    std::vector<std::string> design_names;
    for (const std::string& name : table.names)
        if (name != response) design_names.push_back(name);
    try {
        return dataset_from_csv(table, response, family);
    } catch (const zero_variance_error& e) {
        if (e.column >= 1 && e.column <= static_cast<int>(design_names.size()))
            throw zero_variance_error(e.column, "zero-variance column '" + design_names[e.column - 1] + "'");
        throw;
    }
}

ScreenBudget make_budget(const std::optional<double>& gamma, const std::optional<int>& d, int n) {
    if (d) return ScreenBudget::from_d(*d);
    if (gamma) return ScreenBudget::from_gamma(*gamma);
    return ScreenBudget::default_for(n);
}

std::ofstream open_out(const std::string& path) {
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw csv_error("cannot write '" + path + "'");
    return out;
}

struct ScreenArgs {
    std::string data, response, family = "gaussian", out = "screen_report.txt";
    std::optional<double> gamma;
    std::optional<int> d;
    int threads = 0;
};

int run_screen(const ScreenArgs& a) {
    Timer timer;
    const Family family = parse_family(a.family);
    LoadedData loaded = load_data(a.data, a.response, family);
    const Dataset& ds = loaded.ds;
    const int threads = resolve_threads(a.threads);

    AcorScores scores = family == Family::binomial ? binary_acor_all(ds, threads) : acor_all(ds, threads);
    ShrunkSet shrunk = shrunk_variable_set(scores, make_budget(a.gamma, a.d, ds.n));

    RunManifest manifest;
    manifest.add("command", std::string("screen"));
    manifest.add("data", a.data);
    manifest.add("data_digest", digest_file(a.data));
    manifest.add("response", a.response);
    manifest.add("family", a.family);
    manifest.add("n", static_cast<long long>(ds.n));
    manifest.add("p", static_cast<long long>(ds.p));
    manifest.add("gamma", a.d ? std::string("-") : fmt_double(a.gamma ? *a.gamma : 1.0 / std::log(double(ds.n))));
    manifest.add("d", static_cast<long long>(shrunk.d));
    manifest.add("kept", static_cast<long long>(shrunk.indices.size()));
    manifest.add("threads", static_cast<long long>(threads));
    if (shrunk.clamped)
        manifest.warn("requested d exceeds p; all " + std::to_string(ds.p) + " variables kept");
    if (scores.zero_variance_pairs > 0)
        manifest.warn(std::to_string(scores.zero_variance_pairs) + " zero-variance products scored as 0");
    manifest.add("wallclock_sec", fmt_fixed(timer.seconds(), 3));

    std::ofstream out = open_out(a.out);
    manifest.write(out);

    std::vector<int> order(ds.p);
    for (int j = 0; j < ds.p; ++j) order[j] = j + 1;
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        if (scores.scores[x - 1] != scores.scores[y - 1]) return scores.scores[x - 1] > scores.scores[y - 1];
        return x < y;
    });
    out << "[scores]\n";
    out << "rank\tvariable\tname\tacor\tpartner\tpartner_name\n";
    for (int rank = 1; rank <= ds.p; ++rank) {
        const int j = order[rank - 1];
        const int k = scores.argmax_partner[j - 1];
        out << rank << '\t' << j << '\t' << loaded.var_names[j - 1] << '\t' << fmt_double(scores.scores[j - 1])
            << '\t' << k << '\t' << (k == 0 ? std::string("-") : loaded.var_names[k - 1]) << '\n';
    }
    out << "[shrunk_set]\n";
    out << "variables";
    for (int j : shrunk.indices) out << '\t' << j;
    out << '\n' << "names";
    for (int j : shrunk.indices) out << '\t' << loaded.var_names[j - 1];
    out << '\n';

    std::cout << "screened " << ds.p << " variables, kept " << shrunk.indices.size() << " (d=" << shrunk.d
              << "), report: " << a.out << '\n';
    return 0;
}

struct FitArgs {
    std::string data, response, family = "gaussian", method = "gresh", kappa = "auto";
    std::string out = "fit_report.txt", test_data;
    std::optional<double> gamma;
    std::optional<int> d;
    std::uint64_t seed = 0;
    int threads = 0;
};

int run_fit(const FitArgs& a) {
    Timer timer;
    const Family family = parse_family(a.family);
    LoadedData loaded = load_data(a.data, a.response, family);
    const Dataset& ds = loaded.ds;
    const int threads = resolve_threads(a.threads);

    AcorScores scores = family == Family::binomial ? binary_acor_all(ds, threads) : acor_all(ds, threads);
    ShrunkSet shrunk = shrunk_variable_set(scores, make_budget(a.gamma, a.d, ds.n));

    double kappa;
    if (a.kappa == "auto") {
        kappa = default_kappa(ds.p, ds.n);
    } else {
        try {
            kappa = std::stod(a.kappa);
        } catch (const std::exception&) {
            throw config_error("--kappa expects 'auto' or a number");
        }
    }

    RunManifest manifest;
    manifest.add("command", std::string("fit"));
    manifest.add("data", a.data);
    manifest.add("data_digest", digest_file(a.data));
    manifest.add("response", a.response);
    manifest.add("family", a.family);
    manifest.add("method", a.method);
    manifest.add("n", static_cast<long long>(ds.n));
    manifest.add("p", static_cast<long long>(ds.p));
    manifest.add("d", static_cast<long long>(shrunk.d));
    manifest.add("kappa", kappa);
    manifest.add("seed", static_cast<long long>(a.seed));
    manifest.add("threads", static_cast<long long>(threads));
    if (shrunk.clamped) manifest.warn("requested d exceeds p; all variables kept");

    auto name_of = [&](int j) { return loaded.var_names[j - 1]; };

    CoefficientSet model;
    std::ostringstream body;
    if (family == Family::gaussian) {
        const PenaltyMethod pm = a.method == "shim" ? PenaltyMethod::shim : PenaltyMethod::gresh;
        if (a.method != "shim" && a.method != "gresh") throw config_error("--method expects gresh or shim");
        GicResult res = lambda_path_gic(ds, shrunk, pm, kappa);
        model = res.chosen_model;
        body << "[gic_path]\n";
        body << "index\tlambda1\tlambda2\tsigma2\tloglik\tdf\tgic\tchosen\n";
        for (std::size_t i = 0; i < res.points.size(); ++i) {
            const GicPoint& pt = res.points[i];
            body << i << '\t' << fmt_double(pt.lambda1) << '\t' << fmt_double(pt.lambda2) << '\t';
            if (pt.ok)
                body << fmt_double(pt.sigma2_hat) << '\t' << fmt_double(pt.loglik) << '\t' << pt.df << '\t'
                     << fmt_double(pt.gic);
            else
                body << "-\t-\t-\t-";
            body << '\t' << (static_cast<int>(i) == res.chosen ? 1 : 0) << '\n';
        }
        manifest.add("chosen_lambda1", res.lambda_grid[res.chosen]);
        manifest.add("chosen_gic", res.points[res.chosen].gic);
    } else {
        LogisticSelectDiagnostics diag;
        model = logistic_select(ds, shrunk, kappa, &diag);
        manifest.add("chosen_lambda1", diag.chosen_lambda);
        manifest.add("chosen_gic", diag.chosen_gic);
        if (diag.separation_fallback) manifest.warn("separation detected; ridge fallback used in the refit");
        body << "[selection]\n";
        body << "repaired_mains";
        for (int j : diag.repaired_mains) body << '\t' << j;
        body << '\n' << "pruned_interactions";
        for (const auto& [j, k] : diag.pruned_interactions) body << '\t' << j << ':' << k;
        body << '\n';
    }

    body << "[model]\n";
    body << "term\tj\tk\tname\tvalue\n";
    body << "intercept\t0\t0\t-\t" << fmt_double(model.beta0) << '\n';
    for (const auto& [j, v] : model.main) body << "main\t" << j << "\t0\t" << name_of(j) << '\t' << fmt_double(v) << '\n';
    for (const auto& [pair, v] : model.inter)
        body << "inter\t" << pair.first << '\t' << pair.second << '\t' << name_of(pair.first) << ':'
             << name_of(pair.second) << '\t' << fmt_double(v) << '\n';

    const ShCheck sh = check_sh(model);
    body << "[sh_check]\n";
    body << "satisfied\t" << (sh.satisfied ? "true" : "false") << '\n';
    body << "violations";
    if (sh.violations.empty()) body << "\t-";
    for (const auto& [j, k] : sh.violations) body << '\t' << j << ':' << k;
    body << '\n';

    body << "[summary]\n";
    body << "selected_mains\t" << model.n_main() << '\n';
    body << "selected_interactions\t" << model.n_inter() << '\n';
    body << "df\t" << model.df() << '\n';
    if (family == Family::gaussian) {
        body << "sigma2\t" << fmt_double(model.sigma2) << '\n';
        body << "objective\t" << fmt_double(model.objective) << '\n';
    }

    if (!a.test_data.empty()) {
        if (family != Family::binomial) throw config_error("--test-data applies to the binomial family");
        LoadedData test = load_data(a.test_data, a.response, Family::binomial);
        if (test.var_names != loaded.var_names)
            throw csv_error("--test-data columns must match the training data columns");
        const double g2 = prediction_deviance(model, test.ds);
        manifest.add("test_data", a.test_data);
        manifest.add("test_data_digest", digest_file(a.test_data));
        body << "[prediction]\n";
        body << "test_n\t" << test.ds.n << '\n';
        body << "test_deviance\t" << fmt_double(g2) << '\n';
    }

    manifest.add("wallclock_sec", fmt_fixed(timer.seconds(), 3));
    std::ofstream out = open_out(a.out);
    manifest.write(out);
    out << body.str();

    std::cout << "selected " << model.n_main() << " mains and " << model.n_inter()
              << " interactions (df=" << model.df() << ", sh=" << (sh.satisfied ? "ok" : "VIOLATED")
              << "), report: " << a.out << '\n';
    if (family == Family::gaussian && !model.converged) {
        std::cerr << "fit did not converge within the sweep budget\n";
        return 5;
    }
    return 0;
}

struct SimArgs {
    std::string config, out = "sim_out";
    int threads = 0;
};

int run_simulate(const SimArgs& a) {
    Timer timer;
    std::ifstream in(a.config);
    if (!in) throw config_error("cannot open '" + a.config + "'");
    SimulationPlan plan = parse_simulation_config(in);
    const int threads = resolve_threads(a.threads);

    std::vector<CellResult> cells = run_plan(plan, threads, [](const std::string& msg) {
        std::cerr << msg << '\n';
    });

    fs::create_directories(a.out);
    const std::string manifest_name = "manifest.txt";
    {
        std::ofstream t1 = open_out((fs::path(a.out) / "table1_coverage.tsv").string());
        write_coverage_table(cells, t1, manifest_name);
        std::ofstream t2 = open_out((fs::path(a.out) / "table2_tp_fp.tsv").string());
        write_tp_fp_table(cells, t2, manifest_name);
        std::ofstream t3 = open_out((fs::path(a.out) / "table3_sh.tsv").string());
        write_sh_table(cells, t3, manifest_name);
    }

    RunManifest manifest;
    manifest.add("command", std::string("simulate"));
    manifest.add("config", a.config);
    manifest.add("config_digest", digest_file(a.config));
    manifest.add("n", static_cast<long long>(plan.n));
    manifest.add("p", static_cast<long long>(plan.p));
    manifest.add("reps", static_cast<long long>(plan.reps));
    manifest.add("seed", static_cast<long long>(plan.seed));
    manifest.add("cells", static_cast<long long>(cells.size()));
    manifest.add("threads", static_cast<long long>(threads));
    manifest.add("tables", std::string("table1_coverage.tsv table2_tp_fp.tsv table3_sh.tsv"));
    int failed = 0;
    for (const CellResult& c : cells) {
        failed += c.failed_reps;
        if (c.failed_reps > 0)
            manifest.warn("cell " + to_string(c.method) + "/" + fmt_fixed(c.rho, 2) + "/" + to_string(c.cse) +
                          ": " + std::to_string(c.failed_reps) + " replicates failed and were excluded");
    }
    manifest.add("failed_replicates", static_cast<long long>(failed));
    manifest.add("wallclock_sec", fmt_fixed(timer.seconds(), 3));
    std::ofstream mo = open_out((fs::path(a.out) / manifest_name).string());
    manifest.write(mo);

    std::cout << "wrote " << cells.size() << " cells to " << a.out << '\n';
    return 0;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const csv_error*>(&e)) return 2;
    if (dynamic_cast<const zero_variance_error*>(&e)) return 3;
    if (dynamic_cast<const degenerate_response_error*>(&e)) return 3;
    if (dynamic_cast<const dimension_error*>(&e)) return 3;
    if (dynamic_cast<const index_error*>(&e)) return 3;
    if (dynamic_cast<const invalid_gamma_error*>(&e)) return 4;
    if (dynamic_cast<const nonconvergence_error*>(&e)) return 5;
    if (dynamic_cast<const simulation_error*>(&e)) return 5;
    if (dynamic_cast<const config_error*>(&e)) return 6;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aggregated-correlation screening and hierarchy-respecting interaction selection"};
    app.set_version_flag("--version", std::string(kToolName) + " " + std::string(kToolVersion));
    app.require_subcommand(1);

    ScreenArgs sa;
    CLI::App* screen = app.add_subcommand("screen", "rank variables by aggregated correlation and keep the top d");
    screen->add_option("--data", sa.data, "input CSV (header row required)")->required();
    screen->add_option("--response", sa.response, "response column name")->required();
    screen->add_option("--family", sa.family, "gaussian or binomial")->check(CLI::IsMember({"gaussian", "binomial"}));
    auto* sg = screen->add_option("--gamma", sa.gamma, "screening fraction in (0,1]; d = floor(gamma*n)");
    screen->add_option("--d", sa.d, "explicit screened-set size")->excludes(sg);
    screen->add_option("--out", sa.out, "report path");
    screen->add_option("--threads", sa.threads, "worker count (0 = ACORSIS_THREADS or hardware)");

    FitArgs fa;
    CLI::App* fit = app.add_subcommand("fit", "screen, tune lambda by the information criterion, and fit");
    fit->add_option("--data", fa.data, "input CSV")->required();
    fit->add_option("--response", fa.response, "response column name")->required();
    fit->add_option("--family", fa.family, "gaussian or binomial")->check(CLI::IsMember({"gaussian", "binomial"}));
    fit->add_option("--method", fa.method, "gresh or shim (gaussian family)")->check(CLI::IsMember({"gresh", "shim"}));
    auto* fg = fit->add_option("--gamma", fa.gamma, "screening fraction in (0,1]");
    fit->add_option("--d", fa.d, "explicit screened-set size")->excludes(fg);
    fit->add_option("--kappa", fa.kappa, "criterion weight: 'auto' = log(p)*log(log(n)) or a number");
    fit->add_option("--seed", fa.seed, "recorded in the manifest; every step is deterministic");
    fit->add_option("--test-data", fa.test_data, "held-out CSV for prediction deviance (binomial)");
    fit->add_option("--out", fa.out, "report path");
    fit->add_option("--threads", fa.threads, "worker count");

    SimArgs ma;
    CLI::App* sim = app.add_subcommand("simulate", "run the scenario grid and emit the three summary tables");
    sim->add_option("--config", ma.config, "scenario configuration file")->required();
    sim->add_option("--out", ma.out, "output directory");
    sim->add_option("--threads", ma.threads, "worker count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (screen->parsed()) return run_screen(sa);
        if (fit->parsed()) return run_fit(fa);
        if (sim->parsed()) return run_simulate(ma);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 1;
}
