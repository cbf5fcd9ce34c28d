#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "indexsize/engine.hpp"
#include "indexsize/errors.hpp"
#include "indexsize/estimators.hpp"
#include "indexsize/probes.hpp"
#include "indexsize/report.hpp"
#include "indexsize/studies.hpp"
#include "indexsize/universe.hpp"

namespace fs = std::filesystem;
using namespace indexsize;
using nlohmann::json;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string backend;
    std::string out;
};

RunConfig load_config(const Globals& g) {
    RunConfig cfg = g.config.empty() ? RunConfig::from_json(json::object()) : RunConfig::load(g.config);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.universe.seed = *g.seed;
    }
    if (!g.backend.empty()) cfg.backend = g.backend;
    if (!g.out.empty()) cfg.output_dir = g.out;
    return cfg;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

json series_json(const YearSeries& s) {
    json pts = json::array();
    for (const auto& p : s.points) {
        json e{{"year", p.year}};
        if (p.hce) e["hce"] = p.hce->value;
        else e["error"] = p.error;
        pts.push_back(e);
    }
    return pts;
}

json findings_json(const std::vector<InconsistencyFinding>& fs) {
    json a = json::array();
    for (const auto& f : fs)
        a.push_back({{"kind", to_string(f.kind)}, {"where", f.where}, {"other", f.other}, {"magnitude", f.magnitude}});
    return a;
}

void write_plot(const std::string& dir, const std::string& name, const YearSeries& s) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / ("plot_" + name + ".csv"));
    if (!out) throw std::runtime_error("cannot write plot data to " + dir);
    out << "year,hce\n";
    for (const auto& p : s.points)
        if (p.hce) out << p.year << "," << p.hce->value << "\n";
}

struct ProbeArgs {
    std::string category = "articles";
    std::string flags = "all";
    std::string term;
    std::string site;
    std::string years;
    std::vector<std::string> ranges;
    std::string mode = "longitudinal";
};

Query make_template(const ProbeArgs& a) {
    Query q;
    q.category = parse_search_category(a.category);
    q.flags = parse_flags_label(a.flags);
    q.term = a.term;
    if (!a.site.empty()) q.excluded_site = a.site;
    return q;
}

int run_probe(const Globals& g, const std::string& kind, const ProbeArgs& a) {
    RunConfig cfg = load_config(g);
    auto bundle = make_backend(cfg);
    const ProbeOptions opts{cfg.probe.fan_out, std::chrono::milliseconds(cfg.probe.delay_ms)};
    const YearRange years = a.years.empty() ? cfg.probe.years : YearRange::parse(a.years, "years");
    json out{{"probe", kind}, {"backend", bundle.source}};

    if (kind == "sectional") {
        std::vector<YearRange> ranges;
        for (const auto& r : a.ranges) ranges.push_back(YearRange::parse(r, "ranges"));
        if (ranges.empty()) ranges = cfg.audit.ranges;
        if (ranges.empty()) throw ValidationError("ranges", "give at least one range");
        auto res = sectional_probe(*bundle.engine, make_template(a), ranges, opts);
        json obs = json::array();
        for (const auto& o : res.observations) {
            json e{{"range", o.range.str()}};
            if (o.hce) e["hce"] = o.hce->value;
            else e["error"] = o.error;
            obs.push_back(e);
        }
        out["observations"] = obs;
        out["findings"] = findings_json(res.findings);
    } else if (kind == "longitudinal") {
        const auto ys = years_of(years);
        auto res = longitudinal_sum(*bundle.engine, make_template(a), ys, opts);
        out["years"] = years.str();
        out["total"] = res.total;
        out["complete"] = res.complete;
        out["from_recorded_aggregate"] = res.from_recorded_aggregate;
        if (!res.series.points.empty()) {
            out["series"] = series_json(res.series);
            write_plot(g.out, "longitudinal", res.series);
        }
    } else {
        AbsurdRequest req;
        if (!a.term.empty()) req.term = a.term;
        req.excluded_site = a.site.empty() ? cfg.probe.absurd_site : a.site;
        req.category = parse_search_category(a.category);
        req.flags = parse_flags_label(a.flags);
        req.mode = parse_absurd_mode(a.mode);
        if (req.mode != AbsurdMode::total) req.range = years;
        auto res = absurd_probe(*bundle.engine, req, opts);
        out["estimate"] = res.estimate.to_json();
        out["complete"] = res.complete;
        if (res.series) {
            out["series"] = series_json(*res.series);
            write_plot(g.out, "absurd", *res.series);
        }
    }
    print(out);
    return 0;
}

int run_simulate(const Globals& g) {
    RunConfig cfg = load_config(g);
    cfg.backend = "simulated";
    cfg.validate();
    auto bundle = make_backend(cfg);
    const fs::path dir = g.out.empty() ? fs::path("simulated") : fs::path(g.out);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "universe.tsv");
        if (!out) throw std::runtime_error("cannot write " + (dir / "universe.tsv").string());
        write_universe(out, *bundle.universe);
    }
    json summary{{"universe", (dir / "universe.tsv").string()},
                 {"documents", bundle.universe->size()},
                 {"seed", cfg.seed},
                 {"views", json::object()}};
    for (const auto& [name, view] : bundle.views) {
        const auto p = dir / ("view_" + name + ".tsv");
        std::ofstream out(p);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        write_view(out, *view);
        summary["views"][name] = {{"path", p.string()},
                                  {"entries", view->size()},
                                  {"full_records", true_count(*view, {.entry_kind = EntryKind::full_record})}};
    }
    print(summary);
    return 0;
}

struct EstimateArgs {
    Count m = 0, c = 0, r = 0;
    Count citing = 0;
    double overlap = 0.0;
    std::string overlap_kind = "jaccard";
    double factor = 3.0;
    Count wos = 0;
    double wos_english = 0.9;
    double gs_english = 0.65;
    double error_rate = -1.0;
};

int run_estimate(const std::string& kind, const EstimateArgs& a) {
    EstimateResult res;
    if (kind == "cr") {
        res = lincoln_petersen({a.m, a.c, a.r});
    } else if (kind == "kg") {
        res = khabsa_giles_estimate(a.citing, {parse_overlap_kind(a.overlap_kind), a.overlap, false});
    } else {
        RatioModel model{a.factor, a.wos, a.wos_english, a.gs_english};
        res = ratio_project(model);
        const auto split = language_decompose(model, res.estimate);
        res.alternatives.push_back({"gs english", split.gs_english});
        res.alternatives.push_back({"gs other", split.gs_other});
        res.alternatives.push_back({"wos english", split.wos_english});
        res.alternatives.push_back({"wos other", split.wos_other});
    }
    json out = res.to_json();
    if (a.error_rate >= 0.0) out["error_adjusted"] = error_adjust(res.estimate, a.error_rate);
    print(out);
    return 0;
}

int run_ingest(const Globals& g, const std::string& path, Count min_wos) {
    std::string file = path;
    if (file.empty()) {
        if (g.config.empty()) throw ValidationError("studies", "give a studies CSV or a config naming one");
        file = load_config(g).studies_fixture;
    }
    const auto parsed = parse_studies_csv(file);
    FilterPolicy policy;
    policy.min_wos_count = min_wos;
    json out{{"file", file}, {"records", parsed.records.size()}, {"row_errors", json::array()}, {"units", json::object()}};
    for (const auto& e : parsed.errors) {
        out["row_errors"].push_back({{"line", e.line}, {"message", e.message}});
        std::cerr << file << ":" << e.line << ": " << e.message << "\n";
    }
    for (auto unit : policy.allowed_units) {
        json u;
        try {
            const auto set = study_ratios(parsed.records, unit, policy);
            const auto s = summarize_ratios(set.values());
            u["n"] = s.n;
            u["median"] = s.median;
            u["geometric_mean"] = s.geometric_mean;
            for (const auto& r : set.ratios)
                u["ratios"].push_back({{"study", r.study_id}, {"gs", r.gs}, {"wos", r.wos}, {"ratio", r.ratio}});
            for (const auto& x : set.excluded) u["excluded"].push_back({{"study", x.study_id}, {"reason", x.reason}});
        } catch (const UndefinedEstimateError& e) {
            u["error"] = e.what();
        }
        out["units"][std::string(to_string(unit))] = u;
    }
    if (!g.out.empty()) {
        fs::create_directories(g.out);
        std::ofstream norm(fs::path(g.out) / "studies_normalized.csv");
        write_studies_csv(norm, parsed.records);
    }
    print(out);
    return parsed.errors.empty() ? 0 : 2;
}

int run_report(const Globals& g, const std::string& format, const std::string& log_path) {
    RunConfig cfg = load_config(g);
    const fs::path dir = cfg.output_dir.empty() ? fs::path("report") : fs::path(cfg.output_dir);
    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw std::runtime_error("cannot write query log " + log_path);
    }
    const auto report = run(cfg, log_path.empty() ? nullptr : &log);
    std::vector<fs::path> files;
    if (format == "csv" || format == "both") {
        auto f = emit(report, dir, ReportFormat::csv);
        files.insert(files.end(), f.begin(), f.end());
    }
    if (format == "json" || format == "both") {
        for (auto& f : emit(report, dir, ReportFormat::json))
            if (std::find(files.begin(), files.end(), f) == files.end()) files.push_back(f);
    }
    for (const auto& row : report.rows) {
        std::cout << row.method_id << "  " << row.label << ": ";
        if (!row.ok()) std::cout << "ERROR " << row.error;
        else std::cout << row.result.estimate << (row.discarded ? " (discarded)" : "");
        std::cout << "\n";
    }
    if (report.consensus) {
        const auto& c = *report.consensus;
        std::cout << "consensus: min " << c.min << ", max " << c.max << ", center " << c.center << ", adjusted ["
                  << c.adjusted_low << ", " << c.adjusted_high << "] midpoint " << c.adjusted_midpoint << "\n";
    }
    std::cout << "findings: " << report.findings.size() << "\n";
    for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
    return report.has_errors() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimate the size of a scholarly search engine's index"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "run configuration (JSON)");
    app.add_option("--seed", g.seed, "override the configured seed");
    app.add_option("--backend", g.backend, "simulated | mock-live")->check(CLI::IsMember({"simulated", "mock-live"}));
    app.add_option("--out", g.out, "output directory");

    app.add_subcommand("simulate", "generate the universe and index views and write them as record files");

    auto* probe = app.add_subcommand("probe", "run one query protocol against the configured backend");
    std::string probe_kind;
    ProbeArgs pa;
    probe->add_option("kind", probe_kind)->required()->check(CLI::IsMember({"sectional", "longitudinal", "absurd"}));
    probe->add_option("--category", pa.category)->check(CLI::IsMember({"articles", "case-law"}));
    probe->add_option("--flags", pa.flags)->check(CLI::IsMember({"all", "records+citations", "records+patents", "records"}));
    probe->add_option("--term", pa.term);
    probe->add_option("--site", pa.site, "site to exclude");
    probe->add_option("--years", pa.years, "year span, e.g. 1700-2013");
    probe->add_option("--range", pa.ranges, "sectional ranges (repeatable)");
    probe->add_option("--mode", pa.mode, "absurd mode")->check(CLI::IsMember({"total", "custom-range", "longitudinal"}));

    auto* estimate = app.add_subcommand("estimate", "apply one estimator to given inputs");
    std::string est_kind;
    EstimateArgs ea;
    estimate->add_option("kind", est_kind)->required()->check(CLI::IsMember({"cr", "kg", "ratio"}));
    estimate->add_option("--first", ea.m, "cr: size of the first index (M)");
    estimate->add_option("--second", ea.c, "cr: size of the second index (C)");
    estimate->add_option("--recaptured", ea.r, "cr: overlap (R)");
    estimate->add_option("--citing", ea.citing, "kg: citing documents");
    estimate->add_option("--overlap", ea.overlap, "kg: overlap statistic");
    estimate->add_option("--overlap-kind", ea.overlap_kind)
        ->check(CLI::IsMember({"jaccard", "containment-in-A", "containment-in-B"}));
    estimate->add_option("--factor", ea.factor, "ratio: GS/WoS factor");
    estimate->add_option("--wos", ea.wos, "ratio: WoS size");
    estimate->add_option("--wos-english", ea.wos_english);
    estimate->add_option("--gs-english", ea.gs_english);
    estimate->add_option("--error-rate", ea.error_rate, "also print the error-adjusted estimate");

    auto* ingest = app.add_subcommand("ingest", "parse a comparison-study CSV and summarize GS/WoS ratios");
    std::string studies_path;
    Count min_wos = 10;
    ingest->add_option("file", studies_path, "studies CSV (default: the config's studies fixture)");
    ingest->add_option("--min-wos", min_wos, "smallest admissible WoS count");

    auto* report = app.add_subcommand("report", "run every selected method and emit the summary report");
    std::string format = "both";
    std::string log_path;
    report->add_option("--format", format)->check(CLI::IsMember({"csv", "json", "both"}));
    report->add_option("--query-log", log_path, "write the JSON-lines query log here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("simulate")) return run_simulate(g);
        if (app.got_subcommand("probe")) return run_probe(g, probe_kind, pa);
        if (app.got_subcommand("estimate")) return run_estimate(est_kind, ea);
        if (app.got_subcommand("ingest")) return run_ingest(g, studies_path, min_wos);
        if (app.got_subcommand("report")) return run_report(g, format, log_path);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
