#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "survhier/errors.hpp"
#include "survhier/io.hpp"
#include "survhier/simgen.hpp"
#include "survhier/vbem.hpp"

#include "support/util.hpp"

using namespace survhier;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp_path(const std::string& name) {
    return std::string("io_test_") + name;
}

} // namespace

TEST_CASE("covariate tables survive a write/read round trip bit for bit") {
    RawCovariates raw;
    raw.gene_ids = {3, 1, 7, 2};
    raw.values.resize(3, 4);
    raw.values << 1.5, -2.25e-13, 7.1234567890123452e+250, -3e-308,
        0.0, 123456789.12345679, -1.0 / 3.0, 2.0 / 7.0,
        1e-300, -9.9999999999999995e+17, 4.0, 0.1;

    const std::string path = tmp_path("cov.tsv");
    write_covariates_tsv(path, raw);
    const RawCovariates back = read_covariates_tsv(path);
    CHECK(back.gene_ids == raw.gene_ids);
    REQUIRE(back.values.rows() == raw.values.rows());
    REQUIRE(back.values.cols() == raw.values.cols());
    CHECK((back.values.array() == raw.values.array()).all());

    // Deterministic bytes: a second write produces the identical file.
    const std::string again = tmp_path("cov2.tsv");
    write_covariates_tsv(again, raw);
    CHECK(slurp(path) == slurp(again));
    std::remove(path.c_str());
    std::remove(again.c_str());
}

TEST_CASE("outcome tables reach a fixed point after one round trip") {
    PathwayLayout layout = testutil::plain_layout({2, 2});
    const IndexMap map(layout);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 1.0;
    const SurvivalDataset data = testutil::synth_dataset(layout, map, w, 25, 1.0, 0.6, 42);

    const std::string cov = tmp_path("a_cov.tsv");
    const std::string mem = tmp_path("a_mem.tsv");
    const std::string out = tmp_path("a_out.tsv");
    write_covariates_tsv(cov, data);
    write_membership_tsv(mem, data.layout);
    write_outcomes_tsv(out, data);

    const RawOutcomes first = read_outcomes_tsv(out);
    REQUIRE(first.time.size() == 25);
    for (int i = 0; i < 25; ++i) {
        CHECK(first.status[static_cast<size_t>(i)] == data.delta[static_cast<size_t>(i)]);
        CHECK(first.time[i] ==
              doctest::Approx(std::exp(data.y_star[i])).epsilon(1e-15));
    }

    // Covariates and membership survive exactly; follow-up values pass
    // through exp/log once and may move by a few ulps, never more.
    const SurvivalDataset d2 = load_dataset(cov, mem, out);
    CHECK(d2.layout.membership == data.layout.membership);
    CHECK((d2.X.array() == data.X.array()).all());
    CHECK(d2.delta == data.delta);
    for (int i = 0; i < 25; ++i)
        CHECK(d2.y_star[i] == doctest::Approx(data.y_star[i]).epsilon(1e-14));

    for (const auto& p : {cov, mem, out}) std::remove(p.c_str());
}

TEST_CASE("membership tables round trip") {
    const PathwayLayout layout = PathwayLayout::from_membership(
        {{1, 4}, {1, 2}, {2, 2}, {2, 3}, {2, 1}});
    const std::string path = tmp_path("mem.tsv");
    write_membership_tsv(path, layout);
    CHECK(read_membership_tsv(path) == layout.membership);
    std::remove(path.c_str());
}

TEST_CASE("readers reject malformed tables with located messages") {
    const std::string path = tmp_path("bad.tsv");
    auto expect_data_error = [&](const std::string& text, const std::string& needle) {
        write_text_atomic(path, text);
        try {
            read_outcomes_tsv(path);
            FAIL("expected a data error for: " << text);
        } catch (const data_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find(path) != std::string::npos);
            CHECK(msg.find(needle) != std::string::npos);
        }
    };

    expect_data_error("subject_id\ttime\tstatus\n1\t2.0\t1\n3\t1.0\t0\n", "subject_id");
    expect_data_error("subject_id\ttime\tstatus\n1\t0.0\t1\n", "time");
    expect_data_error("subject_id\ttime\tstatus\n1\t-2.5\t1\n", "time");
    expect_data_error("subject_id\ttime\tstatus\n1\t2.0\t7\n", "status");
    expect_data_error("subject_id\ttime\tstatus\n1\t2.0\n", "3 fields");
    expect_data_error("subject_id\ttime\tstatus\n", "no outcome rows");

    write_text_atomic(path, "1\t1\n1.0\t2.0\n"); // duplicate gene id header
    CHECK_THROWS_AS(read_covariates_tsv(path), data_error);
    write_text_atomic(path, "1\t2\n1.0\n"); // short covariate row
    CHECK_THROWS_AS(read_covariates_tsv(path), data_error);
    write_text_atomic(path, "0\t2\n1.0\t2.0\n"); // gene id below 1
    CHECK_THROWS_AS(read_covariates_tsv(path), data_error);
    std::remove(path.c_str());

    CHECK_THROWS_AS(read_outcomes_tsv("does_not_exist.tsv"), data_error);
    CHECK_THROWS_AS(read_covariates_tsv("does_not_exist.tsv"), data_error);
    CHECK_THROWS_AS(read_membership_tsv("does_not_exist.tsv"), data_error);
}

TEST_CASE("outcome rows may start at the header or at the data") {
    const std::string path = tmp_path("hdr.tsv");
    // Headerless variant: the first token is an integer, so row one is data.
    write_text_atomic(path, "1\t2.0\t1\n2\t3.5\t0\n");
    const RawOutcomes no_header = read_outcomes_tsv(path);
    REQUIRE(no_header.time.size() == 2);
    CHECK(no_header.time[0] == 2.0);
    CHECK(no_header.status[1] == 0);

    write_text_atomic(path, "subject_id\ttime\tstatus\n1\t2.0\t1\n2\t3.5\t0\n");
    const RawOutcomes with_header = read_outcomes_tsv(path);
    REQUIRE(with_header.time.size() == 2);
    CHECK(with_header.time[0] == 2.0);
    std::remove(path.c_str());
}

TEST_CASE("file hashes are stable and match the frozen reference values") {
    const std::string path = tmp_path("hash.bin");
    write_text_atomic(path, "");
    CHECK(file_hash_hex(path) == "fnv1a64:cbf29ce484222325");
    write_text_atomic(path, "a");
    CHECK(file_hash_hex(path) == "fnv1a64:af63dc4c8601ec8c");
    std::remove(path.c_str());
    CHECK_THROWS_AS(file_hash_hex(path), data_error);
}

TEST_CASE("atomic writes refuse unreachable destinations") {
    CHECK_THROWS_AS(write_text_atomic("no_such_dir/x.txt", "hello"), config_error);
}

TEST_CASE("assembling a dataset checks cross-file consistency") {
    RawCovariates cov;
    cov.gene_ids = {1, 2};
    cov.values = Eigen::MatrixXd::Ones(3, 2);
    RawOutcomes out;
    out.time = Eigen::VectorXd::Ones(2); // wrong length
    out.status = {1, 1};
    CHECK_THROWS_AS(assemble_dataset(cov, {{1, 1}, {1, 2}}, out), data_error);

    out.time = Eigen::VectorXd::Ones(3);
    out.status = {1, 1, 1};
    CHECK_THROWS_AS(assemble_dataset(cov, {{1, 1}, {1, 3}}, out), data_error);

    // An extra covariate column outside every pathway is ignored.
    RawCovariates wide;
    wide.gene_ids = {2, 9, 1};
    wide.values.resize(3, 3);
    wide.values << 1, 100, 4, 2, 100, 5, 3, 100, 6;
    const SurvivalDataset data = assemble_dataset(wide, {{1, 1}, {1, 2}}, out);
    CHECK(data.layout.p() == 2);
    CHECK(data.X(0, 0) == 4.0); // gene 1 from header position 3
    CHECK(data.X(0, 1) == 1.0); // gene 2 from header position 1
    CHECK(data.y_star[0] == 0.0); // log(1)
}

TEST_CASE("ground-truth documents round trip through JSON") {
    ScenarioSpec spec;
    spec.n = 40;
    spec.n_test = 0;
    spec.K = 6;
    spec.size_lo = 5;
    spec.size_hi = 6;
    spec.n_distinct = 32;
    spec.n_overlap = 1;
    spec.mult_lo = spec.mult_hi = 2;
    spec.censor_rate = 0.25;
    spec.seed = 3;
    const SimulatedData sim = simulate(spec);

    DocumentMeta meta;
    meta.command = "simulate";
    meta.seed = spec.seed;
    meta.config = {{"n", "40"}, {"k", "6"}};
    meta.inputs = {};
    const std::string path = tmp_path("truth.json");
    write_truth_json(path, meta, sim);

    const GroundTruth back = read_truth_json(path);
    REQUIRE(back.w0.size() == sim.truth.w0.size());
    CHECK((back.w0.array() == sim.truth.w0.array()).all());
    CHECK(back.active_lower_main == sim.truth.active_lower_main);
    CHECK(back.active_lower_inter == sim.truth.active_lower_inter);
    CHECK(back.active_higher_main == sim.truth.active_higher_main);
    CHECK(back.active_higher_inter == sim.truth.active_higher_inter);

    const std::string again = tmp_path("truth2.json");
    write_truth_json(again, meta, sim);
    CHECK(slurp(path) == slurp(again));
    CHECK(slurp(path).back() == '\n');
    std::remove(path.c_str());
    std::remove(again.c_str());
}

TEST_CASE("fitted-model documents round trip through JSON") {
    PathwayLayout layout = testutil::plain_layout({2, 2});
    const IndexMap map(layout);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 1.6;
    const SurvivalDataset data = testutil::synth_dataset(layout, map, w, 40, 1.0, 0.7, 99);

    Hyperparams hyper;
    hyper.r1 = 1.0;
    hyper.r2 = 1e-3;
    hyper.s1 = 1.0;
    hyper.s2 = 1e-3;
    FitConfig cfg;
    cfg.max_iterations = 40;
    const VbemEngine engine(data, map, hyper);
    const FitResult fit = engine.fit(cfg);
    const SelectionSets sel = select(fit);

    DocumentMeta meta;
    meta.command = "fit";
    meta.seed = 0;
    meta.config = {{"r1", "1"}, {"r2", "0.001"}};
    meta.inputs = {{"covariates", "fnv1a64:cbf29ce484222325"}};
    const std::string path = tmp_path("fit.json");
    write_fit_json(path, meta, fit, sel, nullptr);

    const LoadedFit back = read_fit_json(path);
    CHECK((back.m.array() == fit.state.m.array()).all());
    CHECK((back.sigma2.array() == fit.state.sigma2.array()).all());
    CHECK((back.eta.array() == fit.state.eta.array()).all());
    CHECK((back.r_hl.array() == fit.state.r_hl.array()).all());
    CHECK(back.params.tau == fit.params.tau);
    CHECK(back.params.zeta1 == fit.params.zeta1);
    CHECK(back.params.zeta2 == fit.params.zeta2);
    CHECK(back.elbo_trace == fit.elbo_trace);
    CHECK(back.iterations == fit.iterations);
    CHECK(back.converged == fit.converged);
    CHECK(back.selected.selected_lower == sel.selected_lower);
    CHECK(back.selected.selected_higher == sel.selected_higher);
    CHECK((back.selected.coefficients.array() == sel.coefficients.array()).all());

    // A tuning table may ride along without disturbing the reader.
    TuneOutcome tune;
    tune.best_hyper = hyper;
    tune.best = fit;
    TuneRow row;
    row.s2 = 1e-3;
    row.r2 = 1e-3;
    row.criterion = 12.5;
    row.converged = true;
    tune.table = {row};
    write_fit_json(path, meta, fit, sel, &tune);
    const LoadedFit tuned = read_fit_json(path);
    CHECK((tuned.m.array() == fit.state.m.array()).all());
    CHECK(tuned.elbo_trace == fit.elbo_trace);

    CHECK_THROWS_AS(read_fit_json("does_not_exist.json"), data_error);
    std::remove(path.c_str());
}
