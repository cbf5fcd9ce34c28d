#include <doctest.h>

#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "indexsize/engine.hpp"
#include "indexsize/errors.hpp"

using namespace indexsize;

namespace {

std::shared_ptr<const IndexView> view_of(Count docs, double p = 1.0, double stubs = 0.0, std::uint64_t seed = 42,
                                         double duplicates = 0.0) {
    UniverseConfig c;
    c.total_docs = docs;
    c.seed = seed;
    auto u = std::make_shared<const GroundTruthUniverse>(generate_universe(c));
    auto policy = CoveragePolicy::uniform(p);
    policy.stub_rate = stubs;
    policy.duplicate_rate = duplicates;
    return std::make_shared<const IndexView>(derive_view(u, policy, seed + 1));
}

Query year_query(int y, SearchCategory cat = SearchCategory::articles) {
    Query q;
    q.year_range = YearRange{y, y};
    q.category = cat;
    return q;
}

FaultProfile rounding() {
    FaultProfile p;
    p.hce_rounding = true;
    return p;
}

}  // namespace

TEST_CASE("round_hce keeps three significant digits") {
    const auto p = rounding();
    CHECK(round_hce(282'412, p).value == 282'000);
    CHECK(round_hce(596'123, p).value == 596'000);
    CHECK(round_hce(999, p).value == 999);
    CHECK_FALSE(round_hce(999, p).rounded);
    CHECK(round_hce(1'000, p).value == 1'000);
    CHECK(round_hce(1'005, p).value == 1'010);  // half-up
    CHECK(round_hce(1'004, p).value == 1'000);
    CHECK(round_hce(99'950, p).value == 100'000);
    CHECK(round_hce(2'414'999, p).value == 2'410'000);
    CHECK(round_hce(282'412, FaultProfile{}).value == 282'412);
    CHECK_THROWS_AS(round_hce(-1, p), ValidationError);
}

TEST_CASE("round_hce is idempotent") {
    const auto p = rounding();
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2'000; ++i) {
        const Count n = static_cast<Count>(rng() % 1'000'000'000'000ULL);
        const Count once = round_hce(n, p).value;
        REQUIRE(round_hce(once, p).value == once);
    }
}

TEST_CASE("hce noise is keyed, not sequential") {
    FaultProfile p = rounding();
    p.multiplicative_noise_sigma = 0.2;
    CHECK(round_hce(1'000'000, p, 5).value == round_hce(1'000'000, p, 5).value);
    std::set<Count> seen;
    for (std::uint64_t k = 0; k < 20; ++k) seen.insert(round_hce(1'000'000, p, k).value);
    CHECK(seen.size() > 5);
}

TEST_CASE("query validation") {
    Query q;
    CHECK_NOTHROW(q.validate());
    q.excluded_site = "example.com";
    CHECK_THROWS_AS(q.validate(), ValidationError);  // site exclusion alone does not work
    q.term = "1";
    CHECK_NOTHROW(q.validate());
    q.excluded_site = "not a host";
    CHECK_THROWS_AS(q.validate(), ValidationError);
    q = Query{};
    q.page = 0;
    CHECK_THROWS_AS(q.validate(), ValidationError);
    q.page = 1;
    q.page_size = 21;
    CHECK_THROWS_AS(q.validate(), ValidationError);
    q.page_size = 20;
    q.year_range = YearRange{2013, 1700};
    CHECK_THROWS_AS(q.validate(), ValidationError);
}

TEST_CASE("hostname syntax") {
    CHECK(is_hostname("ssstfsffsdffasdfs.com"));
    CHECK(is_hostname("a-b.c1.org"));
    CHECK_FALSE(is_hostname("localhost"));
    CHECK_FALSE(is_hostname("-bad.com"));
    CHECK_FALSE(is_hostname("bad..com"));
    CHECK_FALSE(is_hostname(""));
}

TEST_CASE("canonical form and key ignore pagination") {
    Query q;
    q.term = "1";
    q.excluded_site = "x.com";
    q.year_range = YearRange{1700, 2013};
    q.flags = {true, false};
    CHECK(q.canonical() == "articles|<1 -site:x.com>|1700-2013|records+citations");
    Query r = q;
    r.page = 4;
    CHECK(q.key() == r.key());
}

TEST_CASE("flag labels round trip") {
    for (const char* s : {"all", "records+citations", "records+patents", "records"})
        CHECK(flags_label(parse_flags_label(s)) == s);
    CHECK_THROWS_AS(parse_flags_label("everything"), ValidationError);
}

TEST_CASE("fault profile json") {
    FaultProfile p;
    p.custom_range_malfunction = true;
    p.flag_exclusion_inconsistency_rate = 0.4;
    p.server_error_terms = {"a"};
    const auto q = FaultProfile::from_json(p.to_json());
    CHECK(q.to_json() == p.to_json());
    CHECK_THROWS_AS(FaultProfile::from_json({{"bogus", true}}), ValidationError);
    CHECK_THROWS_AS(FaultProfile::from_json({{"empty_serp_rate", 2.0}}), ValidationError);
    CHECK_THROWS_AS(FaultProfile::from_json({{"result_cap", 5}}), ValidationError);
}

TEST_CASE("fault-free count equals the true count per year") {
    const auto v = view_of(20'000);
    SimulatedEngine e(v, {});
    for (int y : {1800, 1950, 2000, 2013}) {
        CountFilter f{.years = YearRange{y, y}};
        f.category = Category::article;
        const Count articles = true_count(*v, f);
        f.category = Category::patent;
        const Count patents = true_count(*v, f);
        CHECK(e.count(year_query(y)).value == articles + patents);
        f.category = Category::case_law;
        CHECK(e.count(year_query(y, SearchCategory::case_law)).value == true_count(*v, f));
    }
}

TEST_CASE("fault-free counts are monotone, additive and flag-monotone") {
    const auto v = view_of(20'000, 0.7, 0.5);
    SimulatedEngine e(v, {});
    Query wide;
    wide.year_range = YearRange{1900, 2013};
    Query narrow;
    narrow.year_range = YearRange{1950, 2013};
    CHECK(e.count(wide).value >= e.count(narrow).value);
    Count sum = 0;
    for (int y = 1900; y <= 2013; ++y) sum += e.count(year_query(y)).value;
    CHECK(sum == e.count(wide).value);
    for (int y : {1990, 2005, 2013}) {
        auto q = year_query(y);
        const Count all = e.count(q).value;
        q.flags.include_citations = false;
        const Count no_cit = e.count(q).value;
        q.flags = {true, false};
        const Count no_pat = e.count(q).value;
        CHECK(all >= no_cit);
        CHECK(all >= no_pat);
    }
}

TEST_CASE("stubs count only with citations") {
    const auto v = view_of(10'000, 0.3, 1.0);
    SimulatedEngine e(v, {});
    Query q;
    const Count stubs = true_count(*v, {.entry_kind = EntryKind::citation_stub});
    REQUIRE(stubs > 0);
    const Count all = e.count(q).value;
    q.flags.include_citations = false;
    CHECK(all - e.count(q).value > 0);
}

TEST_CASE("duplicated entries inflate hits") {
    const auto v = view_of(5'000, 1.0, 0.0, 42, 0.5);
    SimulatedEngine e(v, {});
    Query q;
    q.category = SearchCategory::articles;
    Query c = q;
    c.category = SearchCategory::case_law;
    CHECK(e.count(q).value + e.count(c).value == hit_total(*v));
    CHECK(hit_total(*v) > true_count(*v));
}

TEST_CASE("excluding a nonexistent site is a no-op without faults") {
    const auto v = view_of(10'000, 0.8, 0.3);
    SimulatedEngine e(v, rounding());
    for (int y : {1900, 2000, 2013}) {
        auto q = year_query(y);
        const Count plain = e.count(q).value;
        q.term = "1";
        q.excluded_site = "ssstfsffsdffasdfs.com";
        CHECK(e.count(q).value == plain);
    }
}

TEST_CASE("repeated queries give identical answers") {
    const auto v = view_of(10'000);
    FaultProfile p = rounding();
    p.multiplicative_noise_sigma = 0.1;
    p.custom_range_malfunction = true;
    SimulatedEngine e(v, p, 3);
    Query q;
    q.year_range = YearRange{1700, 2013};
    CHECK(e.count(q) == e.count(q));
}

TEST_CASE("custom range malfunction deflates multi-year ranges only") {
    const auto v = view_of(200'000);
    FaultProfile p;
    p.custom_range_malfunction = true;
    SimulatedEngine e(v, p, 1);
    Query q;
    q.year_range = YearRange{1700, 2013};
    const auto h = e.count(q);
    REQUIRE(h.raw_true_count);
    // truth * U(0.001, 0.01): 100M scales to [100k, 1M]
    CHECK(h.value >= static_cast<Count>(*h.raw_true_count * 0.001) - 1);
    CHECK(h.value <= static_cast<Count>(*h.raw_true_count * 0.01) + 1);
    const auto single = e.count(year_query(2013));
    CHECK(single.value == *single.raw_true_count);
    Query total;
    CHECK(e.count(total).value == *e.count(total).raw_true_count);
}

TEST_CASE("flag exclusion fault makes the excluding count exceed the inclusive one") {
    const auto v = view_of(50'000);
    FaultProfile p;
    p.flag_exclusion_inconsistency_rate = 1.0;
    SimulatedEngine e(v, p, 2);
    auto q = year_query(2010);
    const Count inclusive = e.count(q).value;
    q.flags = {true, false};
    CHECK(e.count(q).value > inclusive);
    q.flags = {true, true};
    CHECK(e.count(q).value == inclusive);
}

TEST_CASE("citation toggle fault shrinks the citing count") {
    const auto v = view_of(50'000, 0.5, 1.0);
    FaultProfile p;
    p.citation_toggle_inconsistency_rate = 1.0;
    SimulatedEngine e(v, p, 2);
    auto q = year_query(2010);
    const Count with = e.count(q).value;
    q.flags.include_citations = false;
    CHECK(with < e.count(q).value);
}

TEST_CASE("absurd query can drop citations") {
    const auto v = view_of(20'000, 0.5, 1.0);
    FaultProfile p;
    p.absurd_query_drops_citations = true;
    SimulatedEngine e(v, p);
    Query plain;
    Query absurd;
    absurd.term = "1";
    absurd.excluded_site = "ssstfsffsdffasdfs.com";
    Query records = plain;
    records.flags.include_citations = false;
    CHECK(e.count(absurd).value == e.count(records).value);
    CHECK(e.count(absurd).value < e.count(plain).value);
}

TEST_CASE("server error terms fail the all-inclusive site exclusion") {
    const auto v = view_of(2'000);
    FaultProfile p;
    p.server_error_terms = {"a"};
    SimulatedEngine e(v, p);
    Query q;
    q.term = "a";
    q.excluded_site = "x.com";
    CHECK_THROWS_AS(e.count(q), BackendError);
    q.flags.include_patents = false;
    CHECK_NOTHROW(e.count(q));
}

TEST_CASE("pages") {
    const auto v = view_of(10'000);
    SimulatedEngine e(v, {});

    SUBCASE("page 51 of 20 is beyond a 1000 cap") {
        Query q;
        q.page = 51;
        const auto page = e.fetch_page(q);
        CHECK(page.capped);
        CHECK(page.ids.empty());
        q.page = 50;
        CHECK_FALSE(e.fetch_page(q).capped);
    }
    SUBCASE("small result set fits on one page") {
        int year = 0;
        for (int y = 1700; y <= 2013; ++y)
            if (e.count(year_query(y)).value == 7) {
                year = y;
                break;
            }
        REQUIRE(year != 0);
        const auto page = e.fetch_page(year_query(year));
        CHECK(page.ids.size() == 7);
        CHECK_FALSE(page.false_serp);
        std::set<DocId> uniq(page.ids.begin(), page.ids.end());
        CHECK(uniq.size() == 7);
    }
    SUBCASE("pages do not overlap") {
        Query q;
        q.year_range = YearRange{2013, 2013};
        auto p1 = e.fetch_page(q);
        q.page = 2;
        auto p2 = e.fetch_page(q);
        REQUIRE(p1.ids.size() == 20);
        for (DocId d : p2.ids) CHECK(std::find(p1.ids.begin(), p1.ids.end(), d) == p1.ids.end());
    }
}

TEST_CASE("empty SERP fault with results promised is a false SERP") {
    const auto v = view_of(10'000);
    FaultProfile p;
    p.empty_serp_rate = 1.0;
    SimulatedEngine e(v, p);
    int year = 0;
    for (int y = 1700; y <= 2013; ++y)
        if (e.count(year_query(y)).value == 132) {
            year = y;
            break;
        }
    Query q = year ? year_query(year) : Query{};
    q.page = 6;
    const auto page = e.fetch_page(q);
    CHECK(page.ids.empty());
    CHECK(page.false_serp);
    REQUIRE_FALSE(page.diagnostics.empty());
    CHECK(page.diagnostics.front().find("false SERP") != std::string::npos);
}

TEST_CASE("token bucket") {
    TokenBucket off(0);
    for (int i = 0; i < 100; ++i) CHECK(off.try_acquire());
    TokenBucket slow(1.0, 2.0);
    CHECK(slow.try_acquire());
    CHECK(slow.try_acquire());
    CHECK_FALSE(slow.try_acquire());
    TokenBucket fast(6000.0);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) fast.acquire();
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(30));
}

TEST_CASE("fixture backend replays recorded rows") {
    const auto rows = load_query_fixture(FIXTURE_DIR "/gs_queries.csv");
    FixtureBackend b(rows);
    CHECK(b.capabilities().replays_aggregates);
    Query q;
    q.year_range = YearRange{1700, 2013};
    CHECK(b.count(q).value == 596'000);
    q.year_range = YearRange{2000, 2000};
    CHECK(b.count(q).value == 2'410'000);
    q.flags = {true, false};
    CHECK(b.count(q).value == 2'550'000);

    Query absurd;
    absurd.term = "a";
    absurd.excluded_site = "ssstfsffsdffasdfs.com";
    CHECK_THROWS_AS(b.count(absurd), BackendError);  // recorded server error
    absurd.flags = {true, false};
    CHECK(b.count(absurd).value == 154'000'000);

    Query missing;
    missing.year_range = YearRange{1800, 1801};
    CHECK_THROWS_AS(b.count(missing), BackendError);

    Query tmpl;
    const auto agg = b.recorded_aggregate(tmpl, YearRange{1700, 2013});
    REQUIRE(agg);
    CHECK(agg->value == 99'830'920);
    CHECK_FALSE(b.recorded_aggregate(tmpl, YearRange{1800, 2013}));
}

TEST_CASE("fixture loader rejects a wrong header") {
    std::istringstream dummy;
    const auto path = std::string(FIXTURE_DIR) + "/decades.csv";
    CHECK_THROWS_AS(load_query_fixture(path), SchemaError);
}

TEST_CASE("query log records every forwarded request") {
    const auto v = view_of(2'000);
    SimulatedEngine e(v, {});
    std::ostringstream sink;
    QueryLog log(&sink, [] { return std::string("T"); });
    LoggingBackend lb(e, log);
    std::vector<std::thread> ts;
    for (int t = 0; t < 4; ++t)
        ts.emplace_back([&, t] {
            for (int y = 0; y < 25; ++y) lb.count(year_query(1900 + t * 25 + y));
        });
    for (auto& t : ts) t.join();
    CHECK(log.size() == 100);
    std::istringstream lines(sink.str());
    std::string line;
    int n = 0;
    std::set<std::size_t> seqs;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["timestamp"] == "T");
        seqs.insert(j["seq"].get<std::size_t>());
        ++n;
    }
    CHECK(n == 100);
    CHECK(seqs.size() == 100);

    FaultProfile bad;
    bad.server_error_terms = {"a"};
    SimulatedEngine failing(v, bad);
    LoggingBackend lf(failing, log);
    Query q;
    q.term = "a";
    q.excluded_site = "x.com";
    CHECK_THROWS_AS(lf.count(q), BackendError);
    CHECK(log.entries().back()["hce"].is_null());
}
