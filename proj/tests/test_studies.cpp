#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "indexsize/errors.hpp"
#include "indexsize/studies.hpp"

using namespace indexsize;

namespace {

StudyParseResult parse(const std::string& text) {
    std::istringstream in(text);
    return parse_studies(in, "test");
}

const char* kHeader = "study_id,unit,database,count,language,sample_note\n";

}  // namespace

TEST_CASE("well-formed rows parse") {
    const auto r = parse(std::string(kHeader) +
                         "s1,documents,GS,300,english,a\n"
                         "s1,documents,WoS,100,english,a\n"
                         "s2,citations,GS,50,mixed,\"quoted, note\"\n");
    CHECK(r.errors.empty());
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].gs_count == 300);
    CHECK(r.records[0].wos_count == 100);
    CHECK(r.records[1].unit == StudyUnit::citations);
    CHECK(r.records[1].sample_note == "quoted, note");
}

TEST_CASE("columns may come in any order") {
    const auto r = parse("count,database,unit,study_id,sample_note,language\n7,GS,documents,s,,english\n");
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].gs_count == 7);
}

TEST_CASE("missing column is a schema error") {
    CHECK_THROWS_AS(parse("study_id,unit,database,count,language\n"), SchemaError);
    CHECK_THROWS_AS(parse(""), SchemaError);
}

TEST_CASE("bad rows are reported by line and the rest still parses") {
    const auto r = parse(std::string(kHeader) +
                         "s1,documents,GS,n/a,english,\n"
                         "s1,documents,WoS,100,english,\n"
                         "s2,documents,GS,-5,english,\n"
                         "s3,documents,GS,1,english\n"
                         "s1,documents,WoS,100,english,\n");
    REQUIRE(r.errors.size() == 4);
    CHECK(r.errors[0].line == 2);
    CHECK(r.errors[0].message.find("not a number") != std::string::npos);
    CHECK(r.errors[1].line == 4);
    CHECK(r.errors[2].line == 5);
    CHECK(r.errors[3].message.find("duplicate") != std::string::npos);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].wos_count == 100);
}

TEST_CASE("unknown unit labels classify as other") {
    CHECK(classify_unit("documents") == StudyUnit::documents);
    CHECK(classify_unit("unique-citing-documents") == StudyUnit::unique_citing_documents);
    CHECK(classify_unit("weekly-size") == StudyUnit::other);
}

TEST_CASE("transcribed fixture parses cleanly") {
    const auto r = parse_studies_csv(FIXTURE_DIR "/studies.csv");
    CHECK(r.errors.empty());
    CHECK(r.records.size() == 18);
}

TEST_CASE("parse, write, parse is the identity") {
    const auto a = parse_studies_csv(FIXTURE_DIR "/studies.csv");
    std::stringstream s;
    write_studies_csv(s, a.records);
    const auto b = parse_studies(s);
    CHECK(b.errors.empty());
    CHECK(a.records == b.records);
    std::stringstream s2;
    write_studies_csv(s2, b.records);
    CHECK(s.str() == s2.str());
}

TEST_CASE("ratios and filtering") {
    const auto r = parse(std::string(kHeader) +
                         "s1,documents,GS,300,english,\n"
                         "s1,documents,WoS,100,english,\n"
                         "s2,documents,GS,80,english,\n"
                         "s2,documents,WoS,5,english,\n"
                         "s3,documents,GS,80,english,\n"
                         "s3,documents,WoS,40,mixed,\n"
                         "s4,documents,GS,80,english,\n"
                         "s5,citations,GS,10,english,\n"
                         "s5,citations,WoS,10,english,\n");
    const auto set = study_ratios(r.records, StudyUnit::documents);
    REQUIRE(set.ratios.size() == 1);
    CHECK(set.ratios[0].ratio == 3.0);
    REQUIRE(set.excluded.size() == 3);
    CHECK(set.excluded[0].reason.find("below minimum 10") != std::string::npos);
    CHECK(set.excluded[1].reason.find("language") != std::string::npos);
    CHECK(set.excluded[2].reason.find("no WoS") != std::string::npos);

    FilterPolicy loose;
    loose.min_wos_count = 1;
    loose.require_same_language_basis = false;
    CHECK(study_ratios(r.records, StudyUnit::documents, loose).ratios.size() == 3);

    CHECK_THROWS_AS(study_ratios(r.records, StudyUnit::citations), ValidationError);
    CHECK_THROWS_AS(study_ratios(r.records, StudyUnit::unique_citing_documents), UndefinedEstimateError);
}

TEST_CASE("summaries") {
    const std::vector<double> one{5.0};
    const auto s = summarize_ratios(one);
    CHECK(s.median == 5.0);
    CHECK(s.geometric_mean == doctest::Approx(5.0));
    const std::vector<double> even{1, 2, 4, 8};
    CHECK(summarize_ratios(even).median == 3.0);
    CHECK(summarize_ratios(even).geometric_mean == doctest::Approx(std::sqrt(8.0)));
    CHECK_THROWS_AS(summarize_ratios(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(summarize_ratios(std::vector<double>{1.0, 0.0}), UndefinedEstimateError);
}

TEST_CASE("summary properties") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(1 + rng() % 15);
        for (auto& x : v) x = u(rng);
        const auto s = summarize_ratios(v);
        auto shuffled = v;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(summarize_ratios(shuffled).geometric_mean == s.geometric_mean);
        auto scaled = v;
        for (auto& x : scaled) x *= 2.5;
        CHECK(summarize_ratios(scaled).geometric_mean == doctest::Approx(2.5 * s.geometric_mean).epsilon(1e-12));
        CHECK(s.median >= *std::min_element(v.begin(), v.end()));
        CHECK(s.median <= *std::max_element(v.begin(), v.end()));
    }
}

TEST_CASE("fixture synthesis as transcribed") {
    const auto r = parse_studies_csv(FIXTURE_DIR "/studies.csv");
    const auto docs = study_ratios(r.records, StudyUnit::documents);
    CHECK(docs.ratios.size() == 5);
    const auto s = summarize_ratios(docs.values());
    CHECK(s.median == doctest::Approx(3023.0 / 1004.0));
    const auto uc = study_ratios(r.records, StudyUnit::unique_citing_documents);
    CHECK(uc.ratios.size() == 3);
}
