// survhier: two-level Bayesian interaction selection for censored survival
// data. Verbs: simulate, fit, tune, evaluate, replicate, screen.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "survhier/errors.hpp"
#include "survhier/io.hpp"
#include "survhier/metrics.hpp"
#include "survhier/model.hpp"
#include "survhier/screen.hpp"
#include "survhier/selection.hpp"
#include "survhier/simgen.hpp"
#include "survhier/vbem.hpp"
#include "survhier/version.hpp"

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace survhier;

std::string fmt_g(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

ojson meta_json(const DocumentMeta& meta) {
    ojson j;
    j["tool"]["name"] = "survhier";
    j["tool"]["version"] = kVersion;
    j["command"] = meta.command;
    j["seed"] = meta.seed;
    j["config"] = ojson::object();
    for (const auto& [k, v] : meta.config) j["config"][k] = v;
    j["inputs"] = ojson::object();
    for (const auto& [k, v] : meta.inputs) j["inputs"][k] = v;
    return j;
}

// ---------------------------------------------------------------------------
// Shared flag groups
// ---------------------------------------------------------------------------

struct ScenarioFlags {
    ScenarioSpec spec;           // numeric fields bound directly
    std::string correlation = "ar";
    std::string pattern = "s1";

    void attach(CLI::App* cmd) {
        cmd->add_option("--n", spec.n, "Training subjects")->capture_default_str();
        cmd->add_option("--n-test", spec.n_test, "Test subjects (0 = none)")
            ->capture_default_str();
        cmd->add_option("--k", spec.K, "Number of pathways")->capture_default_str();
        cmd->add_option("--size-lo", spec.size_lo, "Smallest pathway size")
            ->capture_default_str();
        cmd->add_option("--size-hi", spec.size_hi, "Largest pathway size")
            ->capture_default_str();
        cmd->add_option("--n-distinct", spec.n_distinct, "Distinct genes")
            ->capture_default_str();
        cmd->add_option("--n-overlap", spec.n_overlap, "Genes in several pathways")
            ->capture_default_str();
        cmd->add_option("--mult-lo", spec.mult_lo, "Smallest overlap multiplicity")
            ->capture_default_str();
        cmd->add_option("--mult-hi", spec.mult_hi, "Largest overlap multiplicity")
            ->capture_default_str();
        cmd->add_option("--correlation", correlation, "Covariate correlation: ar, cr1, cr2")
            ->check(CLI::IsMember({"ar", "cr1", "cr2"}))
            ->capture_default_str();
        cmd->add_option("--rho", spec.rho, "Within-pathway AR parameter")->capture_default_str();
        cmd->add_option("--pattern", pattern, "Effect sign pattern: s1, s2, s3")
            ->check(CLI::IsMember({"s1", "s2", "s3"}))
            ->capture_default_str();
        cmd->add_option("--censor-rate", spec.censor_rate, "Target censoring rate (0 = none)")
            ->capture_default_str();
    }

    ScenarioSpec resolve(std::uint64_t seed) const {
        ScenarioSpec s = spec;
        s.correlation = correlation == "ar"    ? Correlation::ar
                        : correlation == "cr1" ? Correlation::cr1
                                               : Correlation::cr2;
        s.pattern = pattern == "s1" ? EffectPattern::s1
                    : pattern == "s2" ? EffectPattern::s2
                                      : EffectPattern::s3;
        s.seed = seed;
        return s;
    }

    std::vector<std::pair<std::string, std::string>> echo() const {
        return {{"n", std::to_string(spec.n)},
                {"n-test", std::to_string(spec.n_test)},
                {"k", std::to_string(spec.K)},
                {"size-lo", std::to_string(spec.size_lo)},
                {"size-hi", std::to_string(spec.size_hi)},
                {"n-distinct", std::to_string(spec.n_distinct)},
                {"n-overlap", std::to_string(spec.n_overlap)},
                {"mult-lo", std::to_string(spec.mult_lo)},
                {"mult-hi", std::to_string(spec.mult_hi)},
                {"correlation", correlation},
                {"rho", fmt_g(spec.rho)},
                {"pattern", pattern},
                {"censor-rate", fmt_g(spec.censor_rate)}};
    }
};

struct ModelFlags {
    double r1 = 1.0, r2 = 1e-3, s1 = 1.0, s2 = 1e-3;
    int max_iter = 500;
    double tol = 1e-6;
    std::string init = "zeros";

    void attach(CLI::App* cmd, bool fixed_spikes) {
        cmd->add_option("--r1", r1, "Lower-level slab variance")->capture_default_str();
        cmd->add_option("--s1", s1, "Higher-level slab variance")->capture_default_str();
        if (fixed_spikes) {
            cmd->add_option("--r2", r2, "Lower-level spike variance")->capture_default_str();
            cmd->add_option("--s2", s2, "Higher-level spike variance")->capture_default_str();
        }
        cmd->add_option("--max-iter", max_iter, "Maximum ascent cycles")->capture_default_str();
        cmd->add_option("--tol", tol, "Relative ELBO convergence tolerance")
            ->capture_default_str();
        cmd->add_option("--init", init,
                        "Ascent starting point: zeros (neutral) or marginal "
                        "(seed the strongest univariate signals; recommended when "
                        "coefficients vastly outnumber subjects)")
            ->check(CLI::IsMember({"zeros", "marginal"}))
            ->capture_default_str();
    }

    Hyperparams hyper() const {
        Hyperparams h;
        h.r1 = r1;
        h.r2 = r2;
        h.s1 = s1;
        h.s2 = s2;
        return h;
    }

    FitConfig config() const {
        FitConfig c;
        c.max_iterations = max_iter;
        c.elbo_rel_tol = tol;
        c.init_scheme = init == "marginal" ? InitScheme::marginal : InitScheme::zeros;
        return c;
    }

    std::vector<std::pair<std::string, std::string>> echo(bool fixed_spikes) const {
        std::vector<std::pair<std::string, std::string>> e = {{"r1", fmt_g(r1)},
                                                              {"s1", fmt_g(s1)}};
        if (fixed_spikes) {
            e.emplace_back("r2", fmt_g(r2));
            e.emplace_back("s2", fmt_g(s2));
        }
        e.emplace_back("max-iter", std::to_string(max_iter));
        e.emplace_back("tol", fmt_g(tol));
        e.emplace_back("init", init);
        return e;
    }
};

struct GridFlags {
    std::vector<double> r2_grid{1e-4, 1e-3, 1e-2};
    std::vector<double> s2_grid{1e-4, 1e-3, 1e-2};
    std::string criterion = "bic";

    void attach(CLI::App* cmd) {
        cmd->add_option("--r2-grid", r2_grid, "Lower-level spike variance grid")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--s2-grid", s2_grid, "Higher-level spike variance grid")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--criterion", criterion,
                        "Tuning criterion: bic (plug-in likelihood) or elbo")
            ->check(CLI::IsMember({"bic", "elbo"}))
            ->capture_default_str();
    }

    // s2-major, both axes ascending, matching the default grid's order.
    std::vector<std::pair<double, double>> grid() const {
        std::vector<double> s2s = s2_grid, r2s = r2_grid;
        std::sort(s2s.begin(), s2s.end());
        std::sort(r2s.begin(), r2s.end());
        std::vector<std::pair<double, double>> g;
        for (double s2 : s2s)
            for (double r2 : r2s) g.emplace_back(s2, r2);
        return g;
    }

    std::vector<std::pair<std::string, std::string>> echo() const {
        auto join = [](const std::vector<double>& v) {
            std::string s;
            for (size_t i = 0; i < v.size(); ++i) {
                if (i) s += ',';
                s += fmt_g(v[i]);
            }
            return s;
        };
        return {{"r2-grid", join(r2_grid)}, {"s2-grid", join(s2_grid)}, {"criterion", criterion}};
    }
};

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

void run_simulate(const ScenarioFlags& sf, std::uint64_t seed, const std::string& out_dir) {
    const ScenarioSpec spec = sf.resolve(seed);
    const SimulatedData sim = simulate(spec);
    fs::create_directories(out_dir);
    const std::string cov = (fs::path(out_dir) / "covariates.tsv").string();
    const std::string out = (fs::path(out_dir) / "outcomes.tsv").string();
    const std::string mem = (fs::path(out_dir) / "membership.tsv").string();
    write_covariates_tsv(cov, sim.train);
    write_outcomes_tsv(out, sim.train);
    write_membership_tsv(mem, sim.layout);

    DocumentMeta meta;
    meta.command = "simulate";
    meta.seed = seed;
    meta.config = sf.echo();
    meta.inputs = {{"covariates", file_hash_hex(cov)},
                   {"outcomes", file_hash_hex(out)},
                   {"membership", file_hash_hex(mem)}};
    if (spec.n_test > 0) {
        const std::string tcov = (fs::path(out_dir) / "covariates_test.tsv").string();
        const std::string tout = (fs::path(out_dir) / "outcomes_test.tsv").string();
        write_covariates_tsv(tcov, sim.test);
        write_outcomes_tsv(tout, sim.test);
        meta.inputs.emplace_back("covariates_test", file_hash_hex(tcov));
        meta.inputs.emplace_back("outcomes_test", file_hash_hex(tout));
    }
    write_truth_json((fs::path(out_dir) / "truth.json").string(), meta, sim);
}

// ---------------------------------------------------------------------------
// fit / tune
// ---------------------------------------------------------------------------

struct DataPaths {
    std::string covariates, membership, outcomes;

    void attach(CLI::App* cmd) {
        cmd->add_option("--covariates", covariates, "Covariates TSV")->required();
        cmd->add_option("--membership", membership, "Pathway membership TSV")->required();
        cmd->add_option("--outcomes", outcomes, "Outcomes TSV")->required();
    }

    std::vector<std::pair<std::string, std::string>> hashes() const {
        return {{"covariates", file_hash_hex(covariates)},
                {"membership", file_hash_hex(membership)},
                {"outcomes", file_hash_hex(outcomes)}};
    }
};

void run_fit(const DataPaths& paths, const ModelFlags& mf, std::uint64_t seed,
             const std::string& out_path) {
    const SurvivalDataset data = load_dataset(paths.covariates, paths.membership, paths.outcomes);
    const IndexMap map(data.layout);
    FitConfig config = mf.config();
    config.seed = seed;
    const VbemEngine engine(data, map, mf.hyper());
    const FitResult result = engine.fit(config);
    const SelectionSets sel = select(result);

    DocumentMeta meta;
    meta.command = "fit";
    meta.seed = seed;
    meta.config = mf.echo(true);
    meta.inputs = paths.hashes();
    write_fit_json(out_path, meta, result, sel, nullptr);
}

void run_tune(const DataPaths& paths, const ModelFlags& mf, const GridFlags& gf,
              std::uint64_t seed, const std::string& out_path) {
    const SurvivalDataset data = load_dataset(paths.covariates, paths.membership, paths.outcomes);
    const IndexMap map(data.layout);
    FitConfig config = mf.config();
    config.seed = seed;
    const TuneOutcome outcome =
        tune(data, map, gf.grid(), mf.hyper(), config, nullptr, gf.criterion == "elbo");
    const SelectionSets sel = select(outcome.best);

    DocumentMeta meta;
    meta.command = "tune";
    meta.seed = seed;
    meta.config = mf.echo(false);
    for (auto& kv : gf.echo()) meta.config.push_back(kv);
    meta.inputs = paths.hashes();
    write_fit_json(out_path, meta, outcome.best, sel, &outcome);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

void run_evaluate(const std::string& fit_path, const std::string& truth_path,
                  const std::string& membership_path, const std::string& train_outcomes_path,
                  const std::string& test_cov_path, const std::string& test_out_path,
                  const std::string& out_path) {
    const LoadedFit fit = read_fit_json(fit_path);
    const GroundTruth truth = read_truth_json(truth_path);
    const PathwayLayout layout = PathwayLayout::from_membership(read_membership_tsv(membership_path));
    const IndexMap map(layout);
    if (fit.selected.coefficients.size() != map.n_coefficients())
        throw data_error("evaluate: the fitted model has " +
                         std::to_string(fit.selected.coefficients.size()) +
                         " coefficients but the membership implies " +
                         std::to_string(map.n_coefficients()));

    EvalReport rep = tp_fp(map, fit.selected, truth);
    std::tie(rep.m_rsse, rep.i_rsse) = rsse(map, fit.selected.coefficients, truth.w0);

    DocumentMeta meta;
    meta.command = "evaluate";
    meta.inputs = {{"fit", file_hash_hex(fit_path)},
                   {"truth", file_hash_hex(truth_path)},
                   {"membership", file_hash_hex(membership_path)}};

    const bool with_c = !test_cov_path.empty();
    if (with_c) {
        RawOutcomes train_out = read_outcomes_tsv(train_outcomes_path);
        Eigen::VectorXd train_log(train_out.time.size());
        for (long i = 0; i < train_out.time.size(); ++i)
            train_log[i] = std::log(train_out.time[i]); // match the test log scale
        const SurvivalDataset test = load_dataset(test_cov_path, membership_path, test_out_path);
        const Eigen::VectorXd risk = -linear_predictor(test.X, map, fit.selected.coefficients);
        rep.c_statistic = uno_c(train_log, train_out.status, test.y_star, test.delta, risk);
        meta.inputs.emplace_back("train_outcomes", file_hash_hex(train_outcomes_path));
        meta.inputs.emplace_back("test_covariates", file_hash_hex(test_cov_path));
        meta.inputs.emplace_back("test_outcomes", file_hash_hex(test_out_path));
    }

    ojson j = meta_json(meta);
    ojson& r = j["report"];
    r["lm_tp"] = rep.lm_tp;
    r["lm_fp"] = rep.lm_fp;
    r["li_tp"] = rep.li_tp;
    r["li_fp"] = rep.li_fp;
    r["hm_tp"] = rep.hm_tp;
    r["hm_fp"] = rep.hm_fp;
    r["hi_tp"] = rep.hi_tp;
    r["hi_fp"] = rep.hi_fp;
    r["m_rsse"] = rep.m_rsse;
    r["i_rsse"] = rep.i_rsse;
    if (with_c)
        r["c_statistic"] = rep.c_statistic;
    else
        r["c_statistic"] = nullptr;
    write_text_atomic(out_path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// replicate
// ---------------------------------------------------------------------------

struct RepMetrics {
    double v[11];
    static const char* name(int i) {
        static const char* names[11] = {"lm_tp",  "lm_fp",  "li_tp", "li_fp",
                                        "hm_tp",  "hm_fp",  "hi_tp", "hi_fp",
                                        "m_rsse", "i_rsse", "c_statistic"};
        return names[i];
    }
};

RepMetrics to_metrics(const EvalReport& r) {
    return {{static_cast<double>(r.lm_tp), static_cast<double>(r.lm_fp),
             static_cast<double>(r.li_tp), static_cast<double>(r.li_fp),
             static_cast<double>(r.hm_tp), static_cast<double>(r.hm_fp),
             static_cast<double>(r.hi_tp), static_cast<double>(r.hi_fp), r.m_rsse, r.i_rsse,
             r.c_statistic}};
}

ojson run_replicate_cell(const ScenarioSpec& cell, int reps,
                         const std::vector<std::pair<double, double>>& grid,
                         const Hyperparams& base, const FitConfig& config, bool use_elbo) {
    std::vector<RepMetrics> rows;
    ojson per_rep = ojson::array();
    int failed = 0;
    for (int r = 0; r < reps; ++r) {
        ScenarioSpec spec = cell;
        spec.seed = mix_seed(cell.seed, 100000 + static_cast<std::uint64_t>(r));
        ojson rep_row;
        rep_row["rep"] = r;
        try {
            const SimulatedData sim = simulate(spec);
            const IndexMap map(sim.layout);
            const TuneOutcome outcome =
                tune(sim.train, map, grid, base, config, nullptr, use_elbo);
            const SelectionSets sel = select(outcome.best);
            const EvalReport rep = evaluate(map, sel, sim.truth, sim.train, sim.test);
            const RepMetrics m = to_metrics(rep);
            rows.push_back(m);
            rep_row["failed"] = false;
            for (int i = 0; i < 11; ++i) rep_row[RepMetrics::name(i)] = m.v[i];
            rep_row["best_s2"] = outcome.best_hyper.s2;
            rep_row["best_r2"] = outcome.best_hyper.r2;
            rep_row["converged"] = outcome.best.converged;
        } catch (const numerical_error& e) {
            ++failed;
            rep_row["failed"] = true;
            rep_row["error"] = e.what();
        } catch (const undefined_metric_error& e) {
            ++failed;
            rep_row["failed"] = true;
            rep_row["error"] = e.what();
        }
        per_rep.push_back(std::move(rep_row));
    }

    ojson cell_json;
    cell_json["scenario"]["k"] = cell.K;
    cell_json["scenario"]["correlation"] = cell.correlation == Correlation::ar
                                               ? "ar"
                                               : (cell.correlation == Correlation::cr1 ? "cr1"
                                                                                       : "cr2");
    cell_json["scenario"]["rho"] = cell.rho;
    cell_json["scenario"]["pattern"] =
        cell.pattern == EffectPattern::s1 ? "s1" : (cell.pattern == EffectPattern::s2 ? "s2" : "s3");
    cell_json["scenario"]["censor_rate"] = cell.censor_rate;
    cell_json["scenario"]["seed"] = cell.seed;
    cell_json["reps"] = reps;
    cell_json["failed"] = failed;
    ojson& agg = cell_json["metrics"];
    const int n_ok = static_cast<int>(rows.size());
    for (int i = 0; i < 11; ++i) {
        if (n_ok == 0) {
            agg[RepMetrics::name(i)]["mean"] = nullptr;
            agg[RepMetrics::name(i)]["sd"] = nullptr;
            continue;
        }
        double mean = 0.0;
        for (const auto& m : rows) mean += m.v[i];
        mean /= n_ok;
        double ss = 0.0;
        for (const auto& m : rows) ss += (m.v[i] - mean) * (m.v[i] - mean);
        const double sd = n_ok > 1 ? std::sqrt(ss / (n_ok - 1)) : 0.0;
        agg[RepMetrics::name(i)]["mean"] = mean;
        agg[RepMetrics::name(i)]["sd"] = sd;
    }
    cell_json["per_rep"] = std::move(per_rep);
    return cell_json;
}

void run_replicate(const ScenarioFlags& sf, bool all_cells, int reps, std::uint64_t seed,
                   const ModelFlags& mf, const GridFlags& gf, const std::string& out_path) {
    if (reps < 1) throw config_error("replicate: --reps must be at least 1");
    FitConfig config = mf.config();
    config.seed = seed;
    std::vector<ScenarioSpec> cells;
    if (all_cells)
        cells = replication_scenarios(seed);
    else
        cells.push_back(sf.resolve(seed));

    DocumentMeta meta;
    meta.command = "replicate";
    meta.seed = seed;
    meta.config = sf.echo();
    for (auto& kv : mf.echo(false)) meta.config.push_back(kv);
    for (auto& kv : gf.echo()) meta.config.push_back(kv);
    meta.config.emplace_back("reps", std::to_string(reps));
    meta.config.emplace_back("all-cells", all_cells ? "true" : "false");

    ojson j = meta_json(meta);
    j["cells"] = ojson::array();
    for (const ScenarioSpec& cell : cells)
        j["cells"].push_back(
            run_replicate_cell(cell, reps, gf.grid(), mf.hyper(), config, gf.criterion == "elbo"));
    write_text_atomic(out_path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------

void run_screen(const std::string& cov_path, const std::string& out_path_outcomes,
                int top_q, const std::string& membership_path, const std::string& out_cov,
                const std::string& out_membership, const std::string& out_json) {
    const RawCovariates cov = read_covariates_tsv(cov_path);
    const RawOutcomes outc = read_outcomes_tsv(out_path_outcomes);
    const ScreenResult sc = screen_genes(cov, outc, top_q);

    const std::unordered_set<int> kept(sc.kept_gene_ids.begin(), sc.kept_gene_ids.end());
    RawCovariates reduced;
    for (size_t c = 0; c < cov.gene_ids.size(); ++c)
        if (kept.count(cov.gene_ids[c])) reduced.gene_ids.push_back(cov.gene_ids[c]);
    std::sort(reduced.gene_ids.begin(), reduced.gene_ids.end());
    reduced.values.resize(cov.values.rows(), static_cast<long>(reduced.gene_ids.size()));
    {
        std::unordered_map<int, long> col_of;
        for (size_t c = 0; c < cov.gene_ids.size(); ++c)
            col_of[cov.gene_ids[c]] = static_cast<long>(c);
        for (size_t c = 0; c < reduced.gene_ids.size(); ++c)
            reduced.values.col(static_cast<long>(c)) = cov.values.col(col_of[reduced.gene_ids[c]]);
    }
    write_covariates_tsv(out_cov, reduced);

    ojson pathway_map = ojson::array();
    if (!membership_path.empty()) {
        const auto rows = read_membership_tsv(membership_path);
        std::vector<std::pair<int, int>> kept_rows;
        for (const auto& [k, g] : rows)
            if (kept.count(g)) kept_rows.emplace_back(k, g);
        if (kept_rows.empty())
            throw data_error("screen: no membership rows survive the gene screen");
        // Renumber surviving pathways contiguously, in ascending old-id order.
        std::vector<int> old_ids;
        for (const auto& [k, g] : kept_rows) old_ids.push_back(k);
        std::sort(old_ids.begin(), old_ids.end());
        old_ids.erase(std::unique(old_ids.begin(), old_ids.end()), old_ids.end());
        std::unordered_map<int, int> renum;
        for (size_t i = 0; i < old_ids.size(); ++i) {
            renum[old_ids[i]] = static_cast<int>(i) + 1;
            pathway_map.push_back(ojson::array({old_ids[i], static_cast<int>(i) + 1}));
        }
        std::string text = "pathway_id\tgene_id\n";
        for (const auto& [k, g] : kept_rows)
            text += std::to_string(renum[k]) + '\t' + std::to_string(g) + '\n';
        write_text_atomic(out_membership, text);
    }

    DocumentMeta meta;
    meta.command = "screen";
    meta.config = {{"top", std::to_string(top_q)}};
    meta.inputs = {{"covariates", file_hash_hex(cov_path)},
                   {"outcomes", file_hash_hex(out_path_outcomes)}};
    if (!membership_path.empty())
        meta.inputs.emplace_back("membership", file_hash_hex(membership_path));

    ojson j = meta_json(meta);
    j["screen"]["null_mu"] = sc.null_mu;
    j["screen"]["null_sigma2"] = sc.null_sigma2;
    j["screen"]["kept_gene_ids"] = sc.kept_gene_ids;
    ojson table = ojson::array();
    for (size_t c = 0; c < cov.gene_ids.size(); ++c) {
        ojson row;
        row["gene"] = cov.gene_ids[c];
        row["statistic"] = sc.statistic[static_cast<long>(c)];
        table.push_back(std::move(row));
    }
    j["screen"]["statistics"] = std::move(table);
    if (!membership_path.empty()) j["screen"]["pathway_id_map"] = std::move(pathway_map);
    write_text_atomic(out_json, j.dump(2) + "\n");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-level Bayesian interaction selection for censored survival data"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "Read options from an INI/TOML file");
    app.require_subcommand(1);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
    ScenarioFlags sim_flags;
    std::uint64_t sim_seed = 1;
    std::string sim_dir;
    sim_flags.attach(sim_cmd);
    sim_cmd->add_option("--seed", sim_seed, "Scenario seed")->capture_default_str();
    sim_cmd->add_option("--out-dir", sim_dir, "Output directory")->required();
    sim_cmd->callback([&] { run_simulate(sim_flags, sim_seed, sim_dir); });

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit the model at fixed hyperparameters");
    DataPaths fit_paths;
    ModelFlags fit_model;
    std::uint64_t fit_seed = 0;
    std::string fit_out;
    fit_paths.attach(fit_cmd);
    fit_model.attach(fit_cmd, true);
    fit_cmd->add_option("--seed", fit_seed, "Run seed (echoed into the output)")
        ->capture_default_str();
    fit_cmd->add_option("--out", fit_out, "Result JSON path")->required();
    fit_cmd->callback([&] { run_fit(fit_paths, fit_model, fit_seed, fit_out); });

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Grid-tune spike variances, keep the best fit");
    DataPaths tune_paths;
    ModelFlags tune_model;
    GridFlags tune_grid;
    std::uint64_t tune_seed = 0;
    std::string tune_out;
    tune_paths.attach(tune_cmd);
    tune_model.attach(tune_cmd, false);
    tune_grid.attach(tune_cmd);
    tune_cmd->add_option("--seed", tune_seed, "Run seed (echoed into the output)")
        ->capture_default_str();
    tune_cmd->add_option("--out", tune_out, "Result JSON path")->required();
    tune_cmd->callback([&] { run_tune(tune_paths, tune_model, tune_grid, tune_seed, tune_out); });

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a fit against the simulation truth");
    std::string ev_fit, ev_truth, ev_membership, ev_train_out, ev_test_cov, ev_test_out, ev_out;
    eval_cmd->add_option("--fit", ev_fit, "Fit result JSON")->required();
    eval_cmd->add_option("--truth", ev_truth, "Truth JSON")->required();
    eval_cmd->add_option("--membership", ev_membership, "Pathway membership TSV")->required();
    auto* opt_train = eval_cmd->add_option("--train-outcomes", ev_train_out,
                                           "Training outcomes TSV (censoring weights)");
    auto* opt_tc = eval_cmd->add_option("--test-covariates", ev_test_cov, "Test covariates TSV");
    auto* opt_to = eval_cmd->add_option("--test-outcomes", ev_test_out, "Test outcomes TSV");
    opt_tc->needs(opt_to)->needs(opt_train);
    opt_to->needs(opt_tc);
    opt_train->needs(opt_tc);
    eval_cmd->add_option("--out", ev_out, "Report JSON path")->required();
    eval_cmd->callback([&] {
        run_evaluate(ev_fit, ev_truth, ev_membership, ev_train_out, ev_test_cov, ev_test_out,
                     ev_out);
    });

    // replicate
    auto* rep_cmd = app.add_subcommand("replicate", "Simulate-tune-evaluate over many replicates");
    ScenarioFlags rep_flags;
    ModelFlags rep_model;
    GridFlags rep_grid;
    bool rep_all = false;
    int rep_reps = 10;
    std::uint64_t rep_seed = 1;
    std::string rep_out;
    rep_flags.attach(rep_cmd);
    rep_model.attach(rep_cmd, false);
    rep_grid.attach(rep_cmd);
    rep_cmd->add_flag("--all-cells", rep_all, "Run the whole 42-cell scenario grid");
    rep_cmd->add_option("--reps", rep_reps, "Replicates per cell")->capture_default_str();
    rep_cmd->add_option("--seed", rep_seed, "Base seed")->capture_default_str();
    rep_cmd->add_option("--out", rep_out, "Aggregate JSON path")->required();
    rep_cmd->callback(
        [&] { run_replicate(rep_flags, rep_all, rep_reps, rep_seed, rep_model, rep_grid, rep_out); });

    // screen
    auto* scr_cmd = app.add_subcommand("screen", "Marginal gene screen (top-q score statistics)");
    std::string scr_cov, scr_out_tsv, scr_membership, scr_out_cov, scr_out_mem, scr_out_json;
    int scr_top = 0;
    scr_cmd->add_option("--covariates", scr_cov, "Covariates TSV")->required();
    scr_cmd->add_option("--outcomes", scr_out_tsv, "Outcomes TSV")->required();
    scr_cmd->add_option("--top", scr_top, "Number of genes to keep")->required();
    auto* opt_mem = scr_cmd->add_option("--membership", scr_membership,
                                        "Membership TSV to filter alongside");
    scr_cmd->add_option("--out-covariates", scr_out_cov, "Screened covariates TSV")->required();
    auto* opt_out_mem =
        scr_cmd->add_option("--out-membership", scr_out_mem, "Screened membership TSV");
    opt_mem->needs(opt_out_mem);
    opt_out_mem->needs(opt_mem);
    scr_cmd->add_option("--out", scr_out_json, "Score report JSON path")->required();
    scr_cmd->callback([&] {
        run_screen(scr_cov, scr_out_tsv, scr_top, scr_membership, scr_out_cov, scr_out_mem,
                   scr_out_json);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // bad flags are configuration errors
    } catch (const survhier::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const survhier::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const survhier::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
