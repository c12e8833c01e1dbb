#include "survhier/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

#include "survhier/errors.hpp"
#include "survhier/version.hpp"

namespace survhier {

using ojson = nlohmann::ordered_json;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        if (end == text.size()) break;
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::vector<std::string_view> split_fields(const std::string& line) {
    std::vector<std::string_view> out;
    const std::string_view sv(line);
    size_t i = 0;
    while (i < sv.size()) {
        while (i < sv.size() && (sv[i] == ' ' || sv[i] == '\t')) ++i;
        size_t j = i;
        while (j < sv.size() && sv[j] != ' ' && sv[j] != '\t') ++j;
        if (j > i) out.push_back(sv.substr(i, j - i));
        i = j;
    }
    return out;
}

[[noreturn]] void field_error(const std::string& path, size_t line_no, const std::string& field,
                              const std::string& what) {
    throw data_error(path + ":" + std::to_string(line_no) + ": field '" + field + "' " + what);
}

long parse_long(std::string_view tok, const std::string& path, size_t line_no,
                const std::string& field) {
    long v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        field_error(path, line_no, field, "is not an integer: '" + std::string(tok) + "'");
    return v;
}

double parse_double(std::string_view tok, const std::string& path, size_t line_no,
                    const std::string& field) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        field_error(path, line_no, field, "is not a number: '" + std::string(tok) + "'");
    return v;
}

bool looks_like_integer(std::string_view tok) {
    long v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    return ec == std::errc() && p == tok.data() + tok.size();
}

void require_fields(const std::vector<std::string_view>& f, size_t want, const std::string& path,
                    size_t line_no) {
    if (f.size() != want)
        throw data_error(path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(want) + " fields, found " + std::to_string(f.size()));
}

// Distinct gene ids ascending, each with the first design column that holds
// its values (all duplicated columns of a gene are identical copies).
std::map<int, int> gene_first_column(const PathwayLayout& layout) {
    std::map<int, int> first;
    for (int c = 0; c < layout.p(); ++c)
        first.emplace(layout.col_gene[static_cast<size_t>(c)], c);
    return first;
}

} // namespace

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw config_error(tmp + ": cannot open for writing");
        out << text;
        out.flush();
        if (!out) throw config_error(tmp + ": write failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw config_error(path + ": atomic rename failed");
}

std::string file_hash_hex(const std::string& path) {
    const std::string bytes = read_file(path);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_covariates_tsv(const std::string& path, const SurvivalDataset& data) {
    const std::map<int, int> first = gene_first_column(data.layout);
    std::string out;
    bool lead = true;
    for (const auto& [gene, col] : first) {
        (void)col;
        if (!lead) out += '\t';
        lead = false;
        out += std::to_string(gene);
    }
    out += '\n';
    for (int i = 0; i < data.n(); ++i) {
        lead = true;
        for (const auto& [gene, col] : first) {
            (void)gene;
            if (!lead) out += '\t';
            lead = false;
            out += fmt17(data.X(i, col));
        }
        out += '\n';
    }
    write_text_atomic(path, out);
}

void write_covariates_tsv(const std::string& path, const RawCovariates& raw) {
    std::string out;
    for (size_t c = 0; c < raw.gene_ids.size(); ++c) {
        if (c > 0) out += '\t';
        out += std::to_string(raw.gene_ids[c]);
    }
    out += '\n';
    for (long i = 0; i < raw.values.rows(); ++i) {
        for (long c = 0; c < raw.values.cols(); ++c) {
            if (c > 0) out += '\t';
            out += fmt17(raw.values(i, c));
        }
        out += '\n';
    }
    write_text_atomic(path, out);
}

RawCovariates read_covariates_tsv(const std::string& path) {
    const std::vector<std::string> lines = split_lines(read_file(path));
    if (lines.empty()) throw data_error(path + ": empty covariates file");
    RawCovariates raw;
    const auto header = split_fields(lines[0]);
    if (header.empty()) throw data_error(path + ":1: empty header");
    for (const auto& tok : header) {
        const long g = parse_long(tok, path, 1, "gene id");
        if (g < 1) field_error(path, 1, "gene id", "must be >= 1");
        raw.gene_ids.push_back(static_cast<int>(g));
    }
    {
        std::vector<int> sorted = raw.gene_ids;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw data_error(path + ":1: duplicate gene id in header");
    }
    const size_t g_count = raw.gene_ids.size();
    const size_t n = lines.size() - 1;
    if (n == 0) throw data_error(path + ": no subject rows");
    raw.values.resize(static_cast<long>(n), static_cast<long>(g_count));
    for (size_t r = 0; r < n; ++r) {
        const auto f = split_fields(lines[r + 1]);
        require_fields(f, g_count, path, r + 2);
        for (size_t c = 0; c < g_count; ++c)
            raw.values(static_cast<long>(r), static_cast<long>(c)) =
                parse_double(f[c], path, r + 2, "gene " + std::to_string(raw.gene_ids[c]));
    }
    return raw;
}

void write_membership_tsv(const std::string& path, const PathwayLayout& layout) {
    std::string out = "pathway_id\tgene_id\n";
    for (const auto& [k, g] : layout.membership)
        out += std::to_string(k) + '\t' + std::to_string(g) + '\n';
    write_text_atomic(path, out);
}

std::vector<std::pair<int, int>> read_membership_tsv(const std::string& path) {
    const std::vector<std::string> lines = split_lines(read_file(path));
    std::vector<std::pair<int, int>> rows;
    for (size_t r = 0; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        const auto f = split_fields(lines[r]);
        if (r == 0 && !f.empty() && !looks_like_integer(f[0])) continue; // header
        require_fields(f, 2, path, r + 1);
        const long k = parse_long(f[0], path, r + 1, "pathway_id");
        const long g = parse_long(f[1], path, r + 1, "gene_id");
        rows.emplace_back(static_cast<int>(k), static_cast<int>(g));
    }
    if (rows.empty()) throw data_error(path + ": no membership rows");
    return rows;
}

void write_outcomes_tsv(const std::string& path, const SurvivalDataset& data) {
    std::string out = "subject_id\ttime\tstatus\n";
    for (int i = 0; i < data.n(); ++i)
        out += std::to_string(i + 1) + '\t' + fmt17(std::exp(data.y_star[i])) + '\t' +
               std::to_string(static_cast<int>(data.delta[static_cast<size_t>(i)])) + '\n';
    write_text_atomic(path, out);
}

RawOutcomes read_outcomes_tsv(const std::string& path) {
    const std::vector<std::string> lines = split_lines(read_file(path));
    std::vector<double> time;
    std::vector<std::uint8_t> status;
    for (size_t r = 0; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        const auto f = split_fields(lines[r]);
        if (r == 0 && !f.empty() && !looks_like_integer(f[0])) continue; // header
        require_fields(f, 3, path, r + 1);
        const long id = parse_long(f[0], path, r + 1, "subject_id");
        if (id != static_cast<long>(time.size()) + 1)
            field_error(path, r + 1, "subject_id",
                        "must be sequential starting at 1; found " + std::to_string(id));
        const double t = parse_double(f[1], path, r + 1, "time");
        if (!(t > 0.0) || !std::isfinite(t))
            field_error(path, r + 1, "time", "must be a positive finite number");
        const long s = parse_long(f[2], path, r + 1, "status");
        if (s != 0 && s != 1) field_error(path, r + 1, "status", "must be 0 or 1");
        time.push_back(t);
        status.push_back(static_cast<std::uint8_t>(s));
    }
    if (time.empty()) throw data_error(path + ": no outcome rows");
    RawOutcomes raw;
    raw.time = Eigen::Map<const Eigen::VectorXd>(time.data(), static_cast<long>(time.size()));
    raw.status = std::move(status);
    return raw;
}

SurvivalDataset assemble_dataset(const RawCovariates& cov,
                                 const std::vector<std::pair<int, int>>& membership,
                                 const RawOutcomes& outcomes) {
    SurvivalDataset data;
    data.layout = PathwayLayout::from_membership(membership);
    if (cov.values.rows() != outcomes.time.size())
        throw data_error("dataset: outcomes list " + std::to_string(outcomes.time.size()) +
                         " subjects but the covariates have " +
                         std::to_string(cov.values.rows()) + " rows");

    std::unordered_map<int, long> col_of;
    for (size_t c = 0; c < cov.gene_ids.size(); ++c) col_of[cov.gene_ids[c]] = static_cast<long>(c);
    data.X.resize(cov.values.rows(), data.layout.p());
    for (int c = 0; c < data.layout.p(); ++c) {
        const int gene = data.layout.col_gene[static_cast<size_t>(c)];
        const auto it = col_of.find(gene);
        if (it == col_of.end())
            throw data_error("dataset: membership names gene " + std::to_string(gene) +
                             " which is not a covariate column");
        data.X.col(c) = cov.values.col(it->second);
    }

    const long n = outcomes.time.size();
    data.y_star.resize(n);
    data.c.resize(n);
    data.delta = outcomes.status;
    for (long i = 0; i < n; ++i) {
        const double y = std::log(outcomes.time[i]); // model works on log time
        data.y_star[i] = y;
        data.c[i] = y;
    }
    data.validate();
    return data;
}

SurvivalDataset load_dataset(const std::string& covariates_path,
                             const std::string& membership_path,
                             const std::string& outcomes_path) {
    return assemble_dataset(read_covariates_tsv(covariates_path),
                            read_membership_tsv(membership_path),
                            read_outcomes_tsv(outcomes_path));
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

namespace {

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

ojson vec_json(const Eigen::VectorXd& v) {
    ojson a = ojson::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd json_vec(const ojson& a) {
    Eigen::VectorXd v(static_cast<long>(a.size()));
    long i = 0;
    for (const auto& x : a) v[i++] = x.get<double>();
    return v;
}

ojson parse_document(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return ojson::parse(text);
    } catch (const ojson::exception& e) {
        throw data_error(path + ": " + e.what());
    }
}

std::string dump_document(const ojson& j) { return j.dump(2) + "\n"; }

} // namespace

void write_truth_json(const std::string& path, const DocumentMeta& meta,
                      const SimulatedData& sim) {
    ojson j = meta_json(meta);
    j["layout"]["K"] = sim.layout.K;
    j["layout"]["p"] = sim.layout.p();
    j["layout"]["n_distinct"] = sim.layout.n_distinct;
    ojson& t = j["truth"];
    t["w0"] = vec_json(sim.truth.w0);
    t["active_lower_main"] = sim.truth.active_lower_main;
    t["active_lower_inter"] = sim.truth.active_lower_inter;
    t["active_higher_main"] = sim.truth.active_higher_main;
    t["active_higher_inter"] = ojson::array();
    for (const auto& [k, kp] : sim.truth.active_higher_inter)
        t["active_higher_inter"].push_back(ojson::array({k, kp}));
    ojson& c = j["censoring"];
    c["gamma_shape"] = sim.gamma_shape;
    c["gamma_scale"] = sim.gamma_scale;
    c["realized_train"] = sim.realized_censoring_train;
    c["realized_test"] = sim.realized_censoring_test;
    write_text_atomic(path, dump_document(j));
}

GroundTruth read_truth_json(const std::string& path) {
    const ojson j = parse_document(path);
    GroundTruth truth;
    try {
        const ojson& t = j.at("truth");
        truth.w0 = json_vec(t.at("w0"));
        truth.active_lower_main = t.at("active_lower_main").get<std::vector<long>>();
        truth.active_lower_inter = t.at("active_lower_inter").get<std::vector<long>>();
        truth.active_higher_main = t.at("active_higher_main").get<std::vector<int>>();
        for (const auto& pr : t.at("active_higher_inter"))
            truth.active_higher_inter.emplace_back(pr.at(0).get<int>(), pr.at(1).get<int>());
    } catch (const ojson::exception& e) {
        throw data_error(path + ": " + e.what());
    }
    return truth;
}

void write_fit_json(const std::string& path, const DocumentMeta& meta, const FitResult& fit,
                    const SelectionSets& selected, const TuneOutcome* tune) {
    ojson j = meta_json(meta);
    ojson& f = j["fit"];
    f["converged"] = fit.converged;
    f["iterations"] = fit.iterations;
    f["params"]["tau"] = fit.params.tau;
    f["params"]["zeta1"] = fit.params.zeta1;
    f["params"]["zeta2"] = fit.params.zeta2;
    f["elbo"] = fit.elbo_trace.empty() ? 0.0 : fit.elbo_trace.back();
    f["elbo_trace"] = fit.elbo_trace;
    f["m"] = vec_json(fit.state.m);
    f["sigma2"] = vec_json(fit.state.sigma2);
    f["eta"] = vec_json(fit.state.eta);
    f["r_hl"] = vec_json(fit.state.r_hl);
    ojson& s = j["selection"];
    s["threshold"] = 0.5;
    s["selected_lower"] = selected.selected_lower;
    s["selected_higher"] = selected.selected_higher;
    s["coefficients"] = vec_json(selected.coefficients);
    if (tune != nullptr) {
        ojson& g = j["tuning"];
        g["best"]["s2"] = tune->best_hyper.s2;
        g["best"]["r2"] = tune->best_hyper.r2;
        g["table"] = ojson::array();
        for (const TuneRow& row : tune->table) {
            ojson r;
            r["s2"] = row.s2;
            r["r2"] = row.r2;
            r["criterion"] = row.criterion; // NaN serializes as null
            r["iterations"] = row.iterations;
            r["converged"] = row.converged;
            r["failed"] = row.failed;
            r["message"] = row.message;
            g["table"].push_back(std::move(r));
        }
    }
    write_text_atomic(path, dump_document(j));
}

LoadedFit read_fit_json(const std::string& path) {
    const ojson j = parse_document(path);
    LoadedFit out;
    try {
        const ojson& f = j.at("fit");
        out.m = json_vec(f.at("m"));
        out.sigma2 = json_vec(f.at("sigma2"));
        out.eta = json_vec(f.at("eta"));
        out.r_hl = json_vec(f.at("r_hl"));
        out.params.tau = f.at("params").at("tau").get<double>();
        out.params.zeta1 = f.at("params").at("zeta1").get<double>();
        out.params.zeta2 = f.at("params").at("zeta2").get<double>();
        out.elbo_trace = f.at("elbo_trace").get<std::vector<double>>();
        out.iterations = f.at("iterations").get<long>();
        out.converged = f.at("converged").get<bool>();
        const ojson& s = j.at("selection");
        out.selected.selected_lower = s.at("selected_lower").get<std::vector<long>>();
        out.selected.selected_higher = s.at("selected_higher").get<std::vector<int>>();
        out.selected.coefficients = json_vec(s.at("coefficients"));
    } catch (const ojson::exception& e) {
        throw data_error(path + ": " + e.what());
    }
    return out;
}

} // namespace survhier
