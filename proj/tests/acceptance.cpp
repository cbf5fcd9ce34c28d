// Acceptance checks. Usage: acceptance [AC1 ... AC9]; no argument runs all.
// Prints one PASS/FAIL line per criterion and exits nonzero if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "indexsize/engine.hpp"
#include "indexsize/errors.hpp"
#include "indexsize/estimators.hpp"
#include "indexsize/probes.hpp"
#include "indexsize/random.hpp"
#include "indexsize/report.hpp"
#include "indexsize/studies.hpp"
#include "indexsize/universe.hpp"

using namespace indexsize;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects sub-checks; the first failure is what gets reported.
struct Checks {
    bool ok = true;
    std::vector<std::string> notes;
    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back("FAILED " + what);
        }
    }
    void note(const std::string& s) { notes.push_back(s); }
    Outcome done() const {
        std::string d;
        for (std::size_t i = 0; i < notes.size(); ++i) d += (i ? "; " : "") + notes[i];
        return {ok, d};
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << std::fixed << v;
    return s.str();
}

std::string fixture(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

FixtureBackend published_backend() { return FixtureBackend(load_query_fixture(fixture("gs_queries.csv"))); }

// ---------------------------------------------------------------------------

Outcome ac1() {
    Checks c;
    const OverlapStatistic ov{OverlapKind::jaccard, 0.418, false};
    khabsa_giles_estimate(47'799'627, ov);  // warm-up
    const auto t0 = Clock::now();
    const auto r = khabsa_giles_estimate(47'799'627, ov);
    const double dt = seconds_since(t0);
    c.require(r.estimate == 114'353'174, "estimate " + std::to_string(r.estimate) + " == 114353174");
    const double rel = std::abs(static_cast<double>(r.estimate) - 114e6) / 114e6;
    c.require(rel <= 0.005, "within 0.5% of 114M (" + num(rel * 100, 3) + "%)");
    c.require(dt < 1e-3, "runtime < 1 ms");
    c.note("N=" + std::to_string(r.estimate) + ", " + num(dt * 1e6, 1) + " us");
    return c.done();
}

Outcome ac2() {
    Checks c;
    const auto b = ratio_project({3.0, 56'980'000});
    c.require(b.estimate >= 170'900'000 && b.estimate <= 171'000'000,
              "ratio_project " + std::to_string(b.estimate) + " in [170.9M, 171.0M]");
    const auto split = language_decompose({3.0, 57'000'000, 0.9, 0.65}, 171'000'000);
    c.require(std::llabs(split.gs_english - 111'150'000) <= 1, "GSe " + std::to_string(split.gs_english));
    const Count a = scale_by_english_share(99'300'000, 0.65);
    c.require(std::llabs(a - 152'770'000) <= 10'000, "scale_by_english_share " + std::to_string(a));
    c.note("GS=" + std::to_string(b.estimate) + ", GSe=" + std::to_string(split.gs_english) +
           ", A=" + std::to_string(a));
    return c.done();
}

Outcome ac3() {
    Checks c;
    const auto parsed = parse_studies_csv(fixture("studies.csv"));
    c.require(parsed.errors.empty(), "fixture parses without row errors");
    FilterPolicy policy;
    policy.min_wos_count = 10;
    struct Target {
        StudyUnit unit;
        std::size_t n;
        double median, geomean;
    };
    for (const Target& t : {Target{StudyUnit::documents, 8, 3.0, 2.8},
                            Target{StudyUnit::unique_citing_documents, 9, 2.4, 2.9}}) {
        const std::string u(to_string(t.unit));
        try {
            const auto set = study_ratios(parsed.records, t.unit, policy);
            const auto s = summarize_ratios(set.values());
            c.require(s.n == t.n, u + " n=" + std::to_string(s.n) + " (want " + std::to_string(t.n) + ")");
            c.require(std::abs(s.median - t.median) <= 0.1,
                      u + " median " + num(s.median, 3) + " (want " + num(t.median, 1) + ")");
            c.require(std::abs(s.geometric_mean - t.geomean) <= 0.1,
                      u + " geomean " + num(s.geometric_mean, 3) + " (want " + num(t.geomean, 1) + ")");
        } catch (const std::exception& e) {
            c.require(false, u + ": " + e.what());
        }
    }
    if (!c.ok) c.note("transcription gap documented in data/fixtures/PROVENANCE.md");
    return c.done();
}

Outcome ac4() {
    Checks c;
    const auto out = fs::temp_directory_path() / "indexsize_acceptance_ac4";
    fs::remove_all(out);
    const std::string cmd = std::string("\"") + CLI_PATH + "\" --config \"" + fixture("published_run.json") +
                            "\" --out \"" + out.string() + "\" report --format json > /dev/null";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    const double dt = seconds_since(t0);
    c.require(rc == 0, "report exit code 0 (got " + std::to_string(rc) + ")");
    SummaryReport rep;
    try {
        rep = read_summary_json(out / "summary.json");
    } catch (const std::exception& e) {
        c.require(false, std::string("summary.json readable: ") + e.what());
        return c.done();
    }
    // printed value p with last-digit unit u matches x if p - u/2 <= x < p + u,
    // which admits both rounding and truncation to the printed digits
    struct Printed {
        const char* id;
        double millions, unit;
    };
    for (const Printed& p : {Printed{"A", 152.7, 0.1}, Printed{"B", 171, 1}, Printed{"C1", 1.2, 0.1},
                             Printed{"C2", 126.3, 0.1}, Printed{"D1", 174.5, 0.1}, Printed{"D2", 176.8, 0.1},
                             Printed{"D3", 172.9, 0.1}}) {
        const auto* row = rep.row(p.id);
        if (!row || !row->ok()) {
            c.require(false, std::string(p.id) + " row present and ok");
            continue;
        }
        const double x = static_cast<double>(row->result.estimate) / 1e6;
        c.require(x >= p.millions - p.unit / 2 - 1e-9 && x < p.millions + p.unit,
                  std::string(p.id) + "=" + num(x, 3) + "M vs printed " + num(p.millions, 1));
    }
    const Count adj = error_adjust(126'341'609, 0.10);
    c.require(adj == 113'707'448, "error_adjust " + std::to_string(adj));
    c.require(std::abs(static_cast<double>(adj) - 114e6) / 114e6 < 0.01, "adjusted C2 around 114M");
    c.require(dt < 5.0, "runtime < 5 s");
    c.note("7 rows matched, " + num(dt, 2) + " s");
    fs::remove_all(out);
    return c.done();
}

Outcome ac5() {
    Checks c;
    const auto t0 = Clock::now();
    constexpr int kTrials = 50;
    double abs_rel_sum = 0;
    int below = 0;
    for (int t = 0; t < kTrials; ++t) {
        UniverseConfig uc;
        uc.total_docs = 100'000;
        uc.seed = 1000 + static_cast<std::uint64_t>(t);
        uc.citation_density = 0.0;  // the citation graph plays no part here
        const auto u = std::make_shared<const GroundTruthUniverse>(generate_universe(uc));
        const double truth = static_cast<double>(u->size());

        const auto a = derive_view(u, CoveragePolicy::uniform(0.5), mix_keys(uc.seed, 1));
        const auto b = derive_view(u, CoveragePolicy::uniform(0.5), mix_keys(uc.seed, 2));
        const auto lp = lincoln_petersen(CaptureRecaptureInput::from_sets(a.full_record_ids(), b.full_record_ids()));
        abs_rel_sum += std::abs(static_cast<double>(lp.estimate) - truth) / truth;

        // Correlated coverage: both engines favour English journal articles.
        CoveragePolicy skew;
        skew.default_inclusion = 0.1;
        skew.inclusion[CoverageKey{Language::english, DocType::journal_article, std::nullopt}] = 0.9;
        const auto ca = derive_view(u, skew, mix_keys(uc.seed, 3));
        const auto cb = derive_view(u, skew, mix_keys(uc.seed, 4));
        const auto clp =
            lincoln_petersen(CaptureRecaptureInput::from_sets(ca.full_record_ids(), cb.full_record_ids()));
        if (static_cast<double>(clp.estimate) < truth) ++below;
    }
    const double mare = abs_rel_sum / kTrials;
    const double dt = seconds_since(t0);
    c.require(mare <= 0.03, "independent MARE " + num(mare * 100, 3) + "% <= 3%");
    c.require(below >= 45, "correlated estimate below the universe size in " + std::to_string(below) + "/50");
    c.require(dt < 60.0, "runtime < 60 s");
    c.note("MARE " + num(mare * 100, 3) + "%, correlated below truth " + std::to_string(below) + "/50, " +
           num(dt, 1) + " s");
    return c.done();
}

Outcome ac6() {
    Checks c;
    UniverseConfig uc;
    uc.total_docs = 1'050'000;
    uc.seed = 6;
    uc.citation_density = 2.0;
    const auto u = std::make_shared<const GroundTruthUniverse>(generate_universe(uc));
    CoveragePolicy p = CoveragePolicy::uniform(0.97);
    p.stub_rate = 1.0;
    const auto v = std::make_shared<const IndexView>(derive_view(u, p, 66));
    c.require(v->size() >= 1'000'000, "view has " + std::to_string(v->size()) + " >= 1M entries");
    SimulatedEngine engine(v, FaultProfile{}, 6);
    const auto years = years_of(uc.year_range);

    for (auto cat : {SearchCategory::articles, SearchCategory::case_law}) {
        const std::string name(to_string(cat));
        CountFilter f;
        f.category = cat == SearchCategory::articles ? Category::article : Category::case_law;
        Count truth = true_count(*v, f);
        if (cat == SearchCategory::articles) {
            f.category = Category::patent;
            truth += true_count(*v, f);
        }
        Query tmpl;
        tmpl.category = cat;
        const auto lr = longitudinal_sum(engine, tmpl, years);
        Query whole = tmpl;
        whole.year_range = uc.year_range;
        const auto sec = sectional_probe(engine, tmpl, std::vector<YearRange>{uc.year_range});
        AbsurdRequest req;
        req.excluded_site = "ssstfsffsdffasdfs.com";
        req.category = cat;
        req.mode = AbsurdMode::longitudinal;
        req.range = uc.year_range;
        const auto ab = absurd_probe(engine, req);
        c.require(lr.total == truth, name + " longitudinal " + std::to_string(lr.total) + " == " + std::to_string(truth));
        c.require(sec.observations.at(0).hce && sec.observations[0].hce->value == truth, name + " sectional total");
        c.require(ab.estimate.estimate == truth, name + " absurd longitudinal total");
        c.note(name + " " + std::to_string(truth));
    }

    std::size_t findings = 0;
    std::vector<YearRange> ranges;
    for (int from = 1700; from <= 2000; from += 50) ranges.push_back({from, 2013});
    ranges.push_back({2013, 2013});
    findings += sectional_probe(engine, Query{}, ranges).findings.size();
    Query excl;
    excl.flags = {true, false};
    findings += flag_inconsistencies(query_years(engine, Query{}, years), query_years(engine, excl, years)).size();
    Query nocit;
    nocit.flags = {false, true};
    findings += citation_toggle_audit(query_years(engine, Query{}, years), query_years(engine, nocit, years)).size();
    Query serp;
    serp.year_range = YearRange{2013, 2013};
    findings += serp_audit(engine, serp).size();
    findings += composition_breakdown(engine, Query{}, years).findings.size();
    c.require(findings == 0, "audits report zero findings (got " + std::to_string(findings) + ")");
    return c.done();
}

Outcome ac7() {
    Checks c;
    {
        UniverseConfig uc;
        uc.total_docs = 100'000;
        uc.seed = 7;
        uc.citation_density = 2.0;
        const auto u = std::make_shared<const GroundTruthUniverse>(generate_universe(uc));
        const auto v = std::make_shared<const IndexView>(derive_view(u, CoveragePolicy::uniform(1.0), 7));
        FaultProfile mal;
        mal.custom_range_malfunction = true;
        SimulatedEngine e(v, mal, 7);
        const std::vector<YearRange> ranges{{1700, 2013}, {1800, 2013}, {1900, 2013}, {2000, 2013}, {2013, 2013}};
        const auto s = sectional_probe(e, Query{}, ranges);
        c.require(!s.findings.empty(), "simulated malfunction yields range findings (" +
                                           std::to_string(s.findings.size()) + ")");

        FaultProfile flag;
        flag.flag_exclusion_inconsistency_rate = 0.4;
        SimulatedEngine fe(v, flag, 7);
        const auto years = years_of({1700, 2013});
        Query excl;
        excl.flags = {true, false};
        const auto f = flag_inconsistencies(query_years(fe, Query{}, years), query_years(fe, excl, years));
        const double sd = std::sqrt(314 * 0.4 * 0.6);
        c.require(std::abs(static_cast<double>(f.size()) - 125.6) <= 3 * sd,
                  "flag findings " + std::to_string(f.size()) + " within 3 sigma of 125.6");
        c.note("flag findings " + std::to_string(f.size()) + "/314");
    }

    auto fx = published_backend();
    const auto s = sectional_probe(fx, Query{}, std::vector<YearRange>{{1700, 2013}, {2000, 2013}});
    c.require(s.findings.size() == 1 && s.findings[0].magnitude == -97'000, "custom-range replay magnitude -97000");

    const std::vector<int> years{2000, 2002, 2004, 2005, 2006, 2007, 2009, 2010, 2013};
    const std::vector<Count> want{-140'000, -100'000, -70'000, -30'000, -50'000, -120'000, -120'000, -180'000, -80'000};
    Query excl;
    excl.flags = {true, false};
    const auto f = flag_inconsistencies(query_years(fx, Query{}, years), query_years(fx, excl, years));
    bool exact = f.size() == want.size();
    for (std::size_t i = 0; exact && i < f.size(); ++i)
        exact = f[i].where == std::to_string(years[i]) && f[i].magnitude == want[i];
    c.require(exact, "patent-flag replay flags 9 years with exact magnitudes");
    return c.done();
}

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    long double n = static_cast<long double>(x.size()), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += static_cast<long double>(x[i]) * x[i];
        syy += static_cast<long double>(y[i]) * y[i];
        sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double cov = sxy / n - (sx / n) * (sy / n);
    return static_cast<double>(cov / std::sqrt((sxx / n - (sx / n) * (sx / n)) * (syy / n - (sy / n) * (sy / n))));
}

Outcome ac8() {
    Checks c;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng() % 200;
        std::vector<double> x(n), y(n);
        const double rho = nd(rng);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = nd(rng);
            y[i] = rho * x[i] + nd(rng);
        }
        worst = std::max(worst, std::abs(pearson(x, y) - brute_pearson(x, y)));
    }
    c.require(worst <= 1e-12, "pearson max deviation " + std::to_string(worst));

    int jaccard_bad = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<DocId> a(rng() % 300), b(rng() % 300);
        const DocId range = 1 + static_cast<DocId>(rng() % 400);
        for (auto& v : a) v = static_cast<DocId>(rng() % range);
        for (auto& v : b) v = static_cast<DocId>(rng() % range);
        std::set<DocId> sa(a.begin(), a.end()), sb(b.begin(), b.end()), inter, uni;
        std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(inter, inter.end()));
        std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(uni, uni.end()));
        const double want = uni.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
        const auto got = jaccard(a, b);
        if (got.value != want || got.degenerate != uni.empty()) ++jaccard_bad;
    }
    c.require(jaccard_bad == 0, "jaccard mismatches " + std::to_string(jaccard_bad));

    FaultProfile p;
    p.hce_rounding = true;
    int not_idem = 0;
    for (int t = 0; t < 10'000; ++t) {
        const Count n = static_cast<Count>(rng() >> (1 + rng() % 62));
        const Count once = round_hce(n, p).value;
        if (round_hce(once, p).value != once) ++not_idem;
    }
    c.require(not_idem == 0, "round_hce non-idempotent cases " + std::to_string(not_idem));
    c.note("pearson max dev " + std::to_string(worst));
    return c.done();
}

Outcome ac9() {
    Checks c;
    auto fx = published_backend();
    const auto r = composition_breakdown(fx, Query{}, years_of({1700, 2013}));
    c.require(std::abs(r.share_records - 0.8069) <= 1e-4, "records share " + num(r.share_records, 5));
    c.require(std::abs(r.share_citations - 0.1838) <= 1e-4, "citations share " + num(r.share_citations, 5));
    c.require(std::abs(r.share_patents - 0.0092) <= 1e-4, "patents share " + num(r.share_patents, 5));
    const double rel = std::abs(static_cast<double>(r.records) - 80.5e6) / 80.5e6;
    c.require(rel <= 0.005, "records-only total " + std::to_string(r.records) + " within 0.5% of 80.5M");
    c.note("shares " + num(r.share_records, 4) + "/" + num(r.share_citations, 4) + "/" + num(r.share_patents, 4) +
           ", records " + std::to_string(r.records));
    return c.done();
}

const std::map<std::string, std::pair<const char*, std::function<Outcome()>>> kCriteria{
    {"AC1", {"overlap-isolation arithmetic", ac1}},
    {"AC2", {"ratio method", ac2}},
    {"AC3", {"comparison-study synthesis", ac3}},
    {"AC4", {"fixture replay of the summary table", ac4}},
    {"AC5", {"estimator recovery", ac5}},
    {"AC6", {"probe exactness", ac6}},
    {"AC7", {"fault detection", ac7}},
    {"AC8", {"numerical oracles", ac8}},
    {"AC9", {"composition replay", ac9}},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> wanted(argv + 1, argv + argc);
    if (wanted.empty())
        for (const auto& [id, _] : kCriteria) wanted.push_back(id);
    int failed = 0;
    for (const auto& id : wanted) {
        const auto it = kCriteria.find(id);
        if (it == kCriteria.end()) {
            std::cerr << "unknown criterion " << id << "\n";
            return 2;
        }
        Outcome o;
        try {
            o = it->second.second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << " " << it->second.first << ": " << o.detail
                  << std::endl;
    }
    return failed ? 1 : 0;
}
