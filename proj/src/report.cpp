#include "indexsize/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "indexsize/csv.hpp"
#include "indexsize/errors.hpp"
#include "indexsize/random.hpp"
#include "indexsize/studies.hpp"

namespace indexsize {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// config parsing helpers

std::vector<YearRange> parse_ranges(const json& j, const std::string& field) {
    std::vector<YearRange> out;
    for (const auto& e : j) out.push_back(YearRange::parse(e.get<std::string>(), field));
    return out;
}

std::map<std::string, CoveragePolicy> default_views() {
    CoveragePolicy gs;
    gs.default_inclusion = 0.8;
    gs.stub_rate = 0.2;
    CoveragePolicy mas = CoveragePolicy::uniform(0.5);
    CoveragePolicy wos;
    wos.default_inclusion = 0.25;
    wos.inclusion[CoverageKey{Language::english, DocType::journal_article, std::nullopt}] = 0.6;
    return {{"gs", gs}, {"mas", mas}, {"wos", wos}};
}

std::string resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    const fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

template <class F>
void with_keys(const json& j, const std::string& where, F&& f) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        try {
            if (!f(k, v)) throw ConfigError(where + ": unknown key '" + k + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(where + "." + k + ": " + e.what());
        }
    }
}

// ---------------------------------------------------------------------------
// formatting

std::string fmt_double(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string file_safe(std::string s) {
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return s;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

const char* method_label(const std::string& id) {
    if (id == "A") return "Capture-recapture, scaled by English share";
    if (id == "B") return "Ratio projection from WoS";
    if (id == "C1") return "Empty query (custom range)";
    if (id == "C2") return "Empty query (longitudinal)";
    if (id == "D1") return "Absurd query (total)";
    if (id == "D2") return "Absurd query (custom range)";
    if (id == "D3") return "Absurd query (longitudinal)";
    return "";
}

const SearchCategory kCategories[] = {SearchCategory::articles, SearchCategory::case_law};

// ---------------------------------------------------------------------------
// json for report parts

json finding_json(const ReportFinding& f) {
    return {{"audit", f.audit},
            {"kind", std::string(to_string(f.finding.kind))},
            {"where", f.finding.where},
            {"other", f.finding.other},
            {"magnitude", f.finding.magnitude}};
}

ReportFinding finding_from(const json& j) {
    return {j.at("audit").get<std::string>(),
            {parse_finding_kind(j.at("kind").get<std::string>()), j.at("where").get<std::string>(),
             j.at("other").get<std::string>(), j.at("magnitude").get<Count>()}};
}

json decades_json(const DecadeTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) rows.push_back({{"decade", r.decade.str()}, {"counts", r.counts}, {"ratios", r.ratios}});
    return {{"reference", t.reference}, {"engines", t.engines}, {"rows", rows}};
}

DecadeTable decades_from(const json& j) {
    DecadeTable t;
    t.reference = j.at("reference").get<std::string>();
    t.engines = j.at("engines").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows"))
        t.rows.push_back({YearRange::parse(r.at("decade").get<std::string>()),
                          r.at("counts").get<std::map<std::string, Count>>(),
                          r.at("ratios").get<std::map<std::string, double>>()});
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
    RunConfig c;
    c.views = default_views();
    bool seed_given = false;
    with_keys(j, "config", [&](const std::string& k, const json& v) {
        if (k == "backend") c.backend = v.get<std::string>();
        else if (k == "seed") {
            c.seed = v.get<std::uint64_t>();
            seed_given = true;
        } else if (k == "error_rate") c.error_rate = v.get<double>();
        else if (k == "methods") c.methods = v.get<std::vector<std::string>>();
        else if (k == "output_dir") c.output_dir = resolve(base, v.get<std::string>());
        else if (k == "fixtures") {
            with_keys(v, "fixtures", [&](const std::string& fk, const json& fv) {
                if (fk == "queries") c.queries_fixture = resolve(base, fv.get<std::string>());
                else if (fk == "studies") c.studies_fixture = resolve(base, fv.get<std::string>());
                else if (fk == "decades") c.decades_fixture = resolve(base, fv.get<std::string>());
                else return false;
                return true;
            });
        } else if (k == "method_inputs") {
            if (v.is_string()) {
                const auto path = resolve(base, v.get<std::string>());
                std::ifstream in(path);
                if (!in) throw ConfigError("method_inputs: cannot open " + path);
                c.method_inputs = json::parse(in);
            } else {
                c.method_inputs = v;
            }
            if (!c.method_inputs.is_object()) throw ConfigError("method_inputs must be an object");
        } else if (k == "universe") {
            c.universe = v.is_string() ? UniverseConfig::load(resolve(base, v.get<std::string>()))
                                       : UniverseConfig::from_json(v);
        } else if (k == "views") {
            with_keys(v, "views", [&](const std::string& name, const json& pv) {
                c.views[name] = CoveragePolicy::from_json(pv);
                return true;
            });
        } else if (k == "faults") c.faults = FaultProfile::from_json(v);
        else if (k == "probe") {
            with_keys(v, "probe", [&](const std::string& pk, const json& pv) {
                auto& p = c.probe;
                if (pk == "years") p.years = YearRange::parse(pv.get<std::string>(), "probe.years");
                else if (pk == "custom_range") p.custom_range = YearRange::parse(pv.get<std::string>(), "probe.custom_range");
                else if (pk == "absurd_range") p.absurd_range = YearRange::parse(pv.get<std::string>(), "probe.absurd_range");
                else if (pk == "absurd_term") p.absurd_term = pv.get<std::string>();
                else if (pk == "absurd_site") p.absurd_site = pv.get<std::string>();
                else if (pk == "fan_out") p.fan_out = pv.get<int>();
                else if (pk == "delay_ms") p.delay_ms = pv.get<int>();
                else if (pk == "requests_per_minute") p.requests_per_minute = pv.get<double>();
                else return false;
                return true;
            });
        } else if (k == "audit") {
            with_keys(v, "audit", [&](const std::string& ak, const json& av) {
                auto& a = c.audit;
                if (ak == "ranges") a.ranges = parse_ranges(av, "audit.ranges");
                else if (ak == "flag_years") a.flag_years = av.get<std::vector<int>>();
                else if (ak == "composition") a.composition = av.get<bool>();
                else if (ak == "serp") a.serp = av.get<bool>();
                else if (ak == "toggle") {
                    ToggleAuditSettings t;
                    with_keys(av, "audit.toggle", [&](const std::string& tk, const json& tv) {
                        if (tk == "category") t.category = parse_search_category(tv.get<std::string>());
                        else if (tk == "term") t.term = tv.get<std::string>();
                        else if (tk == "excluded_site") t.excluded_site = tv.get<std::string>();
                        else if (tk == "years") t.years = tv.get<std::vector<int>>();
                        else return false;
                        return true;
                    });
                    a.toggle = t;
                } else return false;
                return true;
            });
        } else return false;
        return true;
    });
    if (seed_given) c.universe.seed = c.seed;
    else c.seed = c.universe.seed;
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return from_json(j, fs::path(path).parent_path());
}

void RunConfig::validate() const {
    if (backend != "simulated" && backend != "mock-live")
        throw ConfigError("backend must be simulated or mock-live, got '" + backend + "'");
    if (methods.empty()) throw ConfigError("methods: select at least one method");
    for (const auto& m : methods)
        if (std::find(kMethodIds.begin(), kMethodIds.end(), m) == kMethodIds.end())
            throw ConfigError("methods: unknown method '" + m + "'");
    if (!(error_rate >= 0.0 && error_rate < 1.0)) throw ConfigError("error_rate must be in [0, 1)");
    if (probe.fan_out < 1) throw ConfigError("probe.fan_out must be >= 1");
    if (probe.delay_ms < 0) throw ConfigError("probe.delay_ms must be >= 0");

    auto selected = [&](const std::string& m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
    auto need_file = [&](const std::string& path, const std::string& what) {
        if (path.empty()) throw ConfigError(what + " fixture is not configured");
        if (!fs::is_regular_file(path)) throw ConfigError(what + " fixture not found: " + path);
    };

    if (backend == "mock-live") {
        for (const char* m : {"C1", "C2", "D1", "D2", "D3"})
            if (selected(m)) need_file(queries_fixture, std::string("queries (method ") + m + ")");
        for (const char* m : {"A", "B"})
            if (selected(m) && !method_inputs.contains(m))
                throw ConfigError(std::string("method_inputs.") + m + " is required for method " + m + " on mock-live");
    } else {
        try {
            universe.validate();
            faults.validate();
            for (const auto& [name, p] : views) p.validate();
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
        for (const char* v : {"gs", "mas", "wos"})
            if (!views.count(v)) throw ConfigError(std::string("views.") + v + " is missing");
    }
    if (!studies_fixture.empty()) need_file(studies_fixture, "studies");
    if (!decades_fixture.empty()) need_file(decades_fixture, "decades");
}

// ---------------------------------------------------------------------------
// consensus

ConsensusBand consensus(const std::vector<std::pair<std::string, Count>>& estimates, double error_rate) {
    if (estimates.empty()) throw ValidationError("estimates", "consensus needs at least one estimate");
    ConsensusBand b;
    std::vector<Count> v;
    for (const auto& [id, e] : estimates) {
        b.methods.push_back(id);
        v.push_back(e);
    }
    std::sort(v.begin(), v.end());
    b.min = v.front();
    b.max = v.back();
    const std::size_t n = v.size();
    b.center = n % 2 ? v[n / 2] : round_half_up((static_cast<long double>(v[n / 2 - 1]) + v[n / 2]) / 2);
    b.error_rate = error_rate;
    b.adjusted_high = b.center;
    b.adjusted_low = error_adjust(b.center, error_rate);
    b.adjusted_midpoint = round_half_up((static_cast<long double>(b.adjusted_low) + b.adjusted_high) / 2);
    return b;
}

// ---------------------------------------------------------------------------
// run

namespace {

struct Context {
    const RunConfig& cfg;
    const EngineBackend& engine;
    QueryLog& log;
    ProbeOptions opts;
    std::shared_ptr<const GroundTruthUniverse> universe;
    std::map<std::string, std::shared_ptr<const IndexView>> views;
    SummaryReport& report;
    std::map<std::string, YearSeries> series;  // "C2/articles" etc.

    bool simulated() const { return universe != nullptr; }
};

Query empty_query(SearchCategory cat) {
    Query q;
    q.category = cat;
    return q;
}

void add_component(EstimateResult& r, SearchCategory cat, Count v) {
    r.inputs.emplace_back(std::string(to_string(cat)), static_cast<double>(v));
}

void add_simulated_truth(const Context& ctx, EstimateResult& r) {
    if (!ctx.simulated()) return;
    const auto& gs = *ctx.views.at("gs");
    r.diagnostics.push_back("true view size " + std::to_string(gs.size()) + " unique entries, " +
                            std::to_string(hit_total(gs)) + " version-weighted hits");
}

EstimateResult method_a(Context& ctx) {
    EstimateResult r;
    if (ctx.simulated()) {
        const auto a = ctx.views.at("gs")->full_record_ids();
        const auto b = ctx.views.at("mas")->full_record_ids();
        r = lincoln_petersen(CaptureRecaptureInput::from_sets(a, b));
        const auto j = jaccard(a, b);
        if (!j.degenerate && j.value > 0)
            r.alternatives.emplace_back("overlap isolation (jaccard)",
                                        khabsa_giles_estimate(static_cast<Count>(b.size()), j).estimate);
        r.diagnostics.push_back("true universe size " + std::to_string(ctx.universe->size()));
        r.provenance = "simulated views gs and mas, seed " + std::to_string(ctx.cfg.seed);
        return r;
    }

    const json& in = ctx.cfg.method_inputs.at("A");
    const Count english = in.at("english_estimate").get<Count>();
    const double share = in.value("english_share", 0.65);
    r.estimate = scale_by_english_share(english, share);
    r.inputs = {{"english_estimate", static_cast<double>(english)}, {"english_share", share}};

    std::optional<Count> citing;
    if (in.contains("raw_citing") && in.contains("english_factor")) {
        const Count raw = in.at("raw_citing").get<Count>();
        const double f = in.at("english_factor").get<double>();
        const Count corrected = english_correction(raw, f);
        r.inputs.emplace_back("raw_citing", static_cast<double>(raw));
        r.inputs.emplace_back("english_factor", f);
        citing = corrected;
        if (in.contains("stated_citing")) {
            const Count stated = in.at("stated_citing").get<Count>();
            citing = stated;
            if (stated != corrected)
                r.diagnostics.push_back("english correction gives " + std::to_string(corrected) + "; stated value " +
                                        std::to_string(stated) + " differs by " + std::to_string(stated - corrected));
        }
    }
    if (in.contains("overlap") && citing) {
        const double ov = in.at("overlap").get<double>();
        const auto kg = khabsa_giles_estimate(*citing, {OverlapKind::jaccard, ov, false});
        r.inputs.emplace_back("overlap", ov);
        r.alternatives.emplace_back("population (C / jaccard)", kg.estimate);
    }
    if (in.contains("variants"))
        for (const auto& v : in.at("variants"))
            r.alternatives.emplace_back(v.at("name").get<std::string>(),
                                        scale_by_english_share(v.at("english_estimate").get<Count>(), share));
    r.diagnostics.push_back("English GS size is an input; it is not derived from the population estimate");
    r.provenance = "method_inputs.A" + (in.contains("source") ? ": " + in.at("source").get<std::string>() : "");
    return r;
}

EstimateResult method_b(Context& ctx) {
    const json in = ctx.cfg.method_inputs.contains("B") ? ctx.cfg.method_inputs.at("B") : json::object();
    RatioModel m;
    m.wos_english_share = in.value("wos_english_share", m.wos_english_share);
    m.gs_english_share = in.value("gs_english_share", m.gs_english_share);
    EstimateResult r;

    if (ctx.simulated()) {
        const auto& gs = *ctx.views.at("gs");
        const auto& wos = *ctx.views.at("wos");
        m.wos_size = true_count(wos, {.entry_kind = EntryKind::full_record});
        if (in.contains("factor")) {
            m.factor = in.at("factor").get<double>();
        } else {
            // A paired "study": both views counted over the final decade.
            const auto years = ctx.universe->config().year_range;
            CountFilter f{.years = YearRange{std::max(years.from, years.to - 9), years.to},
                          .entry_kind = EntryKind::full_record};
            const Count g = true_count(gs, f), w = true_count(wos, f);
            if (w == 0) throw UndefinedEstimateError("sample study has no WoS documents");
            m.factor = static_cast<double>(g) / static_cast<double>(w);
            r.diagnostics.push_back("factor measured on " + f.years->str() + ": " + std::to_string(g) + " / " +
                                    std::to_string(w));
        }
        auto p = ratio_project(m);
        p.diagnostics.insert(p.diagnostics.begin(), r.diagnostics.begin(), r.diagnostics.end());
        p.diagnostics.push_back("true gs full records " +
                                std::to_string(true_count(gs, {.entry_kind = EntryKind::full_record})));
        p.provenance = "simulated views gs and wos, seed " + std::to_string(ctx.cfg.seed);
        return p;
    }

    m.factor = in.at("factor").get<double>();
    m.wos_size = in.at("wos_size").get<Count>();
    r = ratio_project(m);
    const auto split = language_decompose(m, in.contains("decompose_total")
                                                 ? std::optional<Count>(in.at("decompose_total").get<Count>())
                                                 : std::nullopt);
    r.alternatives.emplace_back("GS English", split.gs_english);
    r.alternatives.emplace_back("GS other", split.gs_other);
    r.alternatives.emplace_back("WoS English", split.wos_english);
    r.alternatives.emplace_back("WoS other", split.wos_other);
    r.diagnostics.push_back("language split of " + std::to_string(split.gs) + " at share " +
                            fmt_double(m.gs_english_share));

    if (!ctx.cfg.studies_fixture.empty()) {
        const auto parsed = parse_studies_csv(ctx.cfg.studies_fixture);
        for (auto unit : {StudyUnit::documents, StudyUnit::unique_citing_documents}) {
            try {
                const auto set = study_ratios(parsed.records, unit);
                const auto s = summarize_ratios(set.values());
                r.diagnostics.push_back("studies (" + std::string(to_string(unit)) + "): n=" + std::to_string(s.n) +
                                        " median " + fmt_double(std::round(s.median * 1000) / 1000) + " geomean " +
                                        fmt_double(std::round(s.geometric_mean * 1000) / 1000));
                if (unit == StudyUnit::documents) {
                    r.alternatives.emplace_back("factor = studies median", round_half_up(s.median * m.wos_size));
                    r.alternatives.emplace_back("factor = studies geomean",
                                                round_half_up(s.geometric_mean * m.wos_size));
                }
            } catch (const std::exception& e) {
                r.diagnostics.push_back("studies (" + std::string(to_string(unit)) + "): " + e.what());
            }
        }
    }
    r.provenance = "method_inputs.B" + (in.contains("source") ? ": " + in.at("source").get<std::string>() : "");
    return r;
}

EstimateResult method_c1(Context& ctx) {
    EstimateResult r;
    for (auto cat : kCategories) {
        Query q = empty_query(cat);
        q.year_range = ctx.cfg.probe.custom_range;
        const auto h = ctx.engine.count(q);
        r.estimate += h.value;
        add_component(r, cat, h.value);
    }
    r.diagnostics.push_back("custom range " + ctx.cfg.probe.custom_range.str() +
                            "; wide custom ranges are unreliable, row excluded from the consensus");
    return r;
}

EstimateResult method_c2(Context& ctx) {
    EstimateResult r;
    const auto years = years_of(ctx.cfg.probe.years);
    for (auto cat : kCategories) {
        auto lr = longitudinal_sum(ctx.engine, empty_query(cat), years, ctx.opts);
        r.estimate += lr.total;
        add_component(r, cat, lr.total);
        if (!lr.complete)
            r.diagnostics.push_back(std::string(to_string(cat)) + ": incomplete, some years failed");
        if (lr.from_recorded_aggregate)
            r.diagnostics.push_back(std::string(to_string(cat)) + ": recorded longitudinal aggregate replayed");
        else ctx.series["C2/" + std::string(to_string(cat))] = std::move(lr.series);
    }
    r.diagnostics.push_back("years " + ctx.cfg.probe.years.str());
    add_simulated_truth(ctx, r);
    return r;
}

EstimateResult method_d(Context& ctx, AbsurdMode mode, const std::string& id) {
    EstimateResult r;
    for (auto cat : kCategories) {
        AbsurdRequest req;
        req.term = ctx.cfg.probe.absurd_term;
        req.excluded_site = ctx.cfg.probe.absurd_site;
        req.category = cat;
        req.mode = mode;
        if (mode == AbsurdMode::custom_range) req.range = ctx.cfg.probe.absurd_range;
        if (mode == AbsurdMode::longitudinal) req.range = ctx.cfg.probe.years;
        auto res = absurd_probe(ctx.engine, req, ctx.opts);
        r.estimate += res.estimate.estimate;
        add_component(r, cat, res.estimate.estimate);
        for (const auto& d : res.estimate.diagnostics) r.diagnostics.push_back(std::string(to_string(cat)) + ": " + d);
        if (res.series) ctx.series[id + "/" + std::string(to_string(cat))] = std::move(*res.series);
    }
    r.diagnostics.push_back("query <" + ctx.cfg.probe.absurd_term + " -site:" + ctx.cfg.probe.absurd_site + ">" +
                            (mode == AbsurdMode::custom_range ? " range " + ctx.cfg.probe.absurd_range.str() : "") +
                            (mode == AbsurdMode::longitudinal ? " years " + ctx.cfg.probe.years.str() : ""));
    add_simulated_truth(ctx, r);
    return r;
}

void run_audits(Context& ctx) {
    const auto& a = ctx.cfg.audit;
    auto& rep = ctx.report;
    const auto probe_years = years_of(ctx.cfg.probe.years);

    if (!a.ranges.empty()) {
        auto s = sectional_probe(ctx.engine, empty_query(SearchCategory::articles), a.ranges, ctx.opts);
        for (auto& f : s.findings) rep.findings.push_back({"sectional", std::move(f)});
        for (const auto& o : s.observations)
            if (!o.error.empty()) rep.notes.push_back("sectional " + o.range.str() + ": " + o.error);
    }

    {
        std::vector<int> years = a.flag_years ? *a.flag_years : probe_years;
        std::sort(years.begin(), years.end());
        years.erase(std::unique(years.begin(), years.end()), years.end());
        if (!years.empty()) {
            Query inclusive = empty_query(SearchCategory::articles);
            Query excluding = inclusive;
            excluding.flags.include_patents = false;
            const auto s1 = query_years(ctx.engine, inclusive, years, ctx.opts);
            const auto s2 = query_years(ctx.engine, excluding, years, ctx.opts);
            for (auto& f : flag_inconsistencies(s1, s2)) rep.findings.push_back({"flags", std::move(f)});
        }
    }

    if (a.toggle) {
        const auto& t = *a.toggle;
        std::vector<int> years = t.years.empty() ? probe_years : t.years;
        std::sort(years.begin(), years.end());
        years.erase(std::unique(years.begin(), years.end()), years.end());
        Query with = empty_query(t.category);
        with.term = t.term;
        if (!t.excluded_site.empty()) with.excluded_site = t.excluded_site;
        Query without = with;
        without.flags.include_citations = false;
        const auto s1 = query_years(ctx.engine, with, years, ctx.opts);
        const auto s2 = query_years(ctx.engine, without, years, ctx.opts);
        for (auto& f : citation_toggle_audit(s1, s2)) rep.findings.push_back({"citations", std::move(f)});
    }

    if (a.serp && ctx.engine.capabilities().result_pages) {
        Query q = empty_query(SearchCategory::articles);
        q.year_range = YearRange{ctx.cfg.probe.years.to, ctx.cfg.probe.years.to};
        for (auto& f : serp_audit(ctx.engine, q)) rep.findings.push_back({"serp", std::move(f)});
    }

    if (a.composition) {
        try {
            auto c = composition_breakdown(ctx.engine, empty_query(SearchCategory::articles), probe_years, ctx.opts);
            rep.composition = CompositionSummary{c.all,           c.records,         c.citations,    c.patents,
                                                 c.share_records, c.share_citations, c.share_patents};
            for (auto& f : c.findings) rep.findings.push_back({"composition", std::move(f)});
            for (auto& [label, s] : c.series) ctx.series["composition/" + label] = std::move(s);
        } catch (const std::exception& e) {
            rep.notes.push_back(std::string("composition: ") + e.what());
        }
    }

    if (!ctx.cfg.decades_fixture.empty()) rep.decades = load_decade_fixture(ctx.cfg.decades_fixture, "GS");

    for (auto cat : kCategories) {
        const std::string c = std::string(to_string(cat));
        const auto d3 = ctx.series.find("D3/" + c);
        const auto c2 = ctx.series.find("C2/" + c);
        if (d3 == ctx.series.end() || c2 == ctx.series.end()) continue;
        try {
            const auto x = d3->second.values();
            const auto y = c2->second.values();
            rep.correlations.push_back({"absurd vs empty longitudinal (" + c + ")", pearson(x, y), x.size()});
        } catch (const std::exception& e) {
            rep.notes.push_back("correlation (" + c + "): " + e.what());
        }
    }
}

}  // namespace

BackendBundle make_backend(const RunConfig& cfg) {
    BackendBundle b;
    if (cfg.backend == "simulated") {
        UniverseConfig uc = cfg.universe;
        uc.seed = cfg.seed;
        b.universe = std::make_shared<const GroundTruthUniverse>(generate_universe(uc));
        for (const auto& [name, policy] : cfg.views)
            b.views[name] =
                std::make_shared<const IndexView>(derive_view(b.universe, policy, mix_keys(cfg.seed, fnv1a(name))));
        if (!b.views.count("gs")) throw ConfigError("views.gs is missing");
        b.engine = std::make_unique<SimulatedEngine>(b.views.at("gs"), cfg.faults, cfg.seed);
        b.source = "simulated engine over view gs";
    } else if (cfg.backend == "mock-live") {
        const auto name = fs::path(cfg.queries_fixture).filename().string();
        std::vector<FixtureRow> rows;
        if (!cfg.queries_fixture.empty()) rows = load_query_fixture(cfg.queries_fixture);
        b.engine = std::make_unique<FixtureBackend>(std::move(rows), cfg.probe.requests_per_minute, name);
        b.source = "mock-live fixture " + name;
    } else {
        throw ConfigError("backend must be simulated or mock-live, got '" + cfg.backend + "'");
    }
    return b;
}

SummaryReport run(const RunConfig& cfg, std::ostream* query_log) {
    cfg.validate();

    SummaryReport rep;
    rep.backend = cfg.backend;
    rep.seed = cfg.seed;

    QueryLog log(query_log);
    auto bundle = make_backend(cfg);
    const auto& universe = bundle.universe;
    const auto& views = bundle.views;
    const auto& source = bundle.source;

    LoggingBackend engine(*bundle.engine, log);
    Context ctx{cfg, engine, log, {cfg.probe.fan_out, std::chrono::milliseconds(cfg.probe.delay_ms)},
                universe, views, rep, {}};

    for (const auto& id : kMethodIds) {
        if (std::find(cfg.methods.begin(), cfg.methods.end(), id) == cfg.methods.end()) continue;
        ReportRow row;
        row.method_id = id;
        row.label = method_label(id);
        row.discarded = id == "C1";
        const std::size_t before = log.size();
        try {
            if (id == "A") row.result = method_a(ctx);
            else if (id == "B") row.result = method_b(ctx);
            else if (id == "C1") row.result = method_c1(ctx);
            else if (id == "C2") row.result = method_c2(ctx);
            else if (id == "D1") row.result = method_d(ctx, AbsurdMode::total, id);
            else if (id == "D2") row.result = method_d(ctx, AbsurdMode::custom_range, id);
            else row.result = method_d(ctx, AbsurdMode::longitudinal, id);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        row.result.method = id;
        const std::size_t after = log.size();
        if (after > before) {
            if (!row.result.provenance.empty()) row.result.provenance += "; ";
            row.result.provenance += source + ", query log entries " + std::to_string(before) + "-" +
                                     std::to_string(after - 1);
        }
        if (row.result.provenance.empty()) row.result.provenance = source;
        rep.rows.push_back(std::move(row));
    }

    std::vector<std::pair<std::string, Count>> retained;
    for (const auto& r : rep.rows)
        if (r.ok() && !r.discarded) retained.emplace_back(r.method_id, r.result.estimate);
    if (!retained.empty()) rep.consensus = consensus(retained, cfg.error_rate);

    run_audits(ctx);

    for (const auto& [name, s] : ctx.series) {
        PlotSeries p;
        p.name = name;
        for (const auto& pt : s.points)
            if (pt.hce) p.points.emplace_back(pt.year, pt.hce->value);
        rep.plots.push_back(std::move(p));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// SummaryReport

const ReportRow* SummaryReport::row(const std::string& id) const {
    for (const auto& r : rows)
        if (r.method_id == id) return &r;
    return nullptr;
}

bool SummaryReport::has_errors() const {
    return std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.ok(); });
}

json SummaryReport::to_json() const {
    json j;
    j["backend"] = backend;
    j["seed"] = seed;
    json rs = json::array();
    for (const auto& r : rows)
        rs.push_back({{"method_id", r.method_id},
                      {"label", r.label},
                      {"discarded", r.discarded},
                      {"error", r.error},
                      {"result", r.result.to_json()}});
    j["rows"] = rs;
    if (consensus) {
        const auto& c = *consensus;
        j["consensus"] = {{"methods", c.methods},
                          {"min", c.min},
                          {"max", c.max},
                          {"center", c.center},
                          {"error_rate", c.error_rate},
                          {"adjusted_low", c.adjusted_low},
                          {"adjusted_high", c.adjusted_high},
                          {"adjusted_midpoint", c.adjusted_midpoint}};
    } else {
        j["consensus"] = nullptr;
    }
    json fs_ = json::array();
    for (const auto& f : findings) fs_.push_back(finding_json(f));
    j["findings"] = fs_;
    json ps = json::array();
    for (const auto& p : plots) {
        json pts = json::array();
        for (const auto& [y, v] : p.points) pts.push_back({y, v});
        ps.push_back({{"name", p.name}, {"points", pts}});
    }
    j["plots"] = ps;
    if (composition) {
        const auto& c = *composition;
        j["composition"] = {{"all", c.all},
                            {"records", c.records},
                            {"citations", c.citations},
                            {"patents", c.patents},
                            {"share_records", c.share_records},
                            {"share_citations", c.share_citations},
                            {"share_patents", c.share_patents}};
    } else {
        j["composition"] = nullptr;
    }
    json cs = json::array();
    for (const auto& c : correlations) cs.push_back({{"name", c.name}, {"r", c.r}, {"n", c.n}});
    j["correlations"] = cs;
    j["decades"] = decades ? decades_json(*decades) : json(nullptr);
    j["notes"] = notes;
    return j;
}

SummaryReport SummaryReport::from_json(const json& j) {
    SummaryReport r;
    r.backend = j.at("backend").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("rows"))
        r.rows.push_back({e.at("method_id").get<std::string>(), e.at("label").get<std::string>(),
                          EstimateResult::from_json(e.at("result")), e.at("discarded").get<bool>(),
                          e.at("error").get<std::string>()});
    if (const auto& c = j.at("consensus"); !c.is_null())
        r.consensus = ConsensusBand{c.at("methods").get<std::vector<std::string>>(),
                                    c.at("min").get<Count>(),
                                    c.at("max").get<Count>(),
                                    c.at("center").get<Count>(),
                                    c.at("error_rate").get<double>(),
                                    c.at("adjusted_low").get<Count>(),
                                    c.at("adjusted_high").get<Count>(),
                                    c.at("adjusted_midpoint").get<Count>()};
    for (const auto& f : j.at("findings")) r.findings.push_back(finding_from(f));
    for (const auto& p : j.at("plots")) {
        PlotSeries s;
        s.name = p.at("name").get<std::string>();
        for (const auto& pt : p.at("points")) s.points.emplace_back(pt.at(0).get<int>(), pt.at(1).get<Count>());
        r.plots.push_back(std::move(s));
    }
    if (const auto& c = j.at("composition"); !c.is_null())
        r.composition = CompositionSummary{c.at("all").get<Count>(),          c.at("records").get<Count>(),
                                           c.at("citations").get<Count>(),    c.at("patents").get<Count>(),
                                           c.at("share_records").get<double>(), c.at("share_citations").get<double>(),
                                           c.at("share_patents").get<double>()};
    for (const auto& c : j.at("correlations"))
        r.correlations.push_back({c.at("name").get<std::string>(), c.at("r").get<double>(), c.at("n").get<std::size_t>()});
    if (const auto& d = j.at("decades"); !d.is_null()) r.decades = decades_from(d);
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
}

bool operator==(const SummaryReport& a, const SummaryReport& b) { return a.to_json() == b.to_json(); }

// ---------------------------------------------------------------------------
// emit

std::vector<fs::path> emit(const SummaryReport& report, const fs::path& dir, ReportFormat format) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
    std::vector<fs::path> written;

    if (format == ReportFormat::json) {
        const auto p = dir / "summary.json";
        auto out = open_out(p);
        out << report.to_json().dump(2) << '\n';
        written.push_back(p);
    } else {
        {
            const auto p = dir / "summary.csv";
            auto out = open_out(p);
            csv::write_row(out, {"method", "label", "estimate", "status", "inputs", "alternatives", "diagnostics",
                                 "provenance"});
            for (const auto& r : report.rows) {
                std::vector<std::string> in, alt;
                for (const auto& [k, v] : r.result.inputs) in.push_back(k + "=" + fmt_double(v));
                for (const auto& [k, v] : r.result.alternatives) alt.push_back(k + "=" + std::to_string(v));
                const std::string status = !r.ok() ? "error: " + r.error : r.discarded ? "discarded" : "ok";
                csv::write_row(out, {r.method_id, r.label, r.ok() ? std::to_string(r.result.estimate) : "", status,
                                     join(in, "; "), join(alt, "; "), join(r.result.diagnostics, " | "),
                                     r.result.provenance});
            }
            written.push_back(p);
        }
        if (report.consensus) {
            const auto p = dir / "consensus.csv";
            auto out = open_out(p);
            const auto& c = *report.consensus;
            csv::write_row(out, {"methods", "min", "max", "center", "error_rate", "adjusted_low", "adjusted_high",
                                 "adjusted_midpoint"});
            csv::write_row(out, {join(c.methods, " "), std::to_string(c.min), std::to_string(c.max),
                                 std::to_string(c.center), fmt_double(c.error_rate), std::to_string(c.adjusted_low),
                                 std::to_string(c.adjusted_high), std::to_string(c.adjusted_midpoint)});
            written.push_back(p);
        }
        {
            const auto p = dir / "findings.csv";
            auto out = open_out(p);
            csv::write_row(out, {"audit", "kind", "where", "other", "magnitude"});
            for (const auto& f : report.findings)
                csv::write_row(out, {f.audit, std::string(to_string(f.finding.kind)), f.finding.where, f.finding.other,
                                     std::to_string(f.finding.magnitude)});
            written.push_back(p);
        }
    }

    for (const auto& s : report.plots) {
        const auto p = dir / ("plot_" + file_safe(s.name) + ".csv");
        auto out = open_out(p);
        csv::write_row(out, {"year", "hce"});
        for (const auto& [y, v] : s.points) csv::write_row(out, {std::to_string(y), std::to_string(v)});
        written.push_back(p);
    }

    if (report.decades) {
        const auto& t = *report.decades;
        const auto p = dir / "decades.csv";
        auto out = open_out(p);
        csv::Row header{"decade"};
        for (const auto& e : t.engines) header.push_back(e);
        for (const auto& e : t.engines)
            if (e != t.reference) header.push_back(e + "/" + t.reference);
        csv::write_row(out, header);
        for (const auto& r : t.rows) {
            csv::Row row{r.decade.str()};
            for (const auto& e : t.engines) {
                const auto it = r.counts.find(e);
                row.push_back(it == r.counts.end() ? "" : std::to_string(it->second));
            }
            for (const auto& e : t.engines) {
                if (e == t.reference) continue;
                const auto it = r.ratios.find(e);
                char buf[32] = "";
                if (it != r.ratios.end()) std::snprintf(buf, sizeof buf, "%.2f", it->second);
                row.push_back(buf);
            }
            csv::write_row(out, row);
        }
        written.push_back(p);
    }
    return written;
}

SummaryReport read_summary_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return SummaryReport::from_json(json::parse(in));
}

}  // namespace indexsize
