#include "indexsize/universe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "indexsize/csv.hpp"
#include "indexsize/errors.hpp"
#include "indexsize/random.hpp"

namespace indexsize {

namespace {

constexpr std::string_view kLanguageNames[] = {"english", "other"};
constexpr std::string_view kDocTypeNames[] = {"journal-article", "conference", "book",  "book-chapter",
                                              "thesis",          "report",     "other"};
constexpr std::string_view kCategoryNames[] = {"article", "patent", "case-law"};
constexpr std::string_view kEntryKindNames[] = {"full-record", "citation-stub"};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::string_view (&names)[N], const std::string& field) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<Enum>(i);
    throw ValidationError(field, "unknown value '" + std::string(s) + "'");
}

// Salts for keyed draws in derive_view; distinct so the decisions are independent.
constexpr std::uint64_t kSaltInclude = 1;
constexpr std::uint64_t kSaltDuplicate = 2;
constexpr std::uint64_t kSaltStub = 3;
constexpr std::uint64_t kSaltThesis = 4;

void check_fraction(double v, const std::string& field) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, "must be in [0, 1], got " + std::to_string(v));
}

template <typename Key>
void check_shares(const std::map<Key, double>& shares, const std::string& field) {
    double sum = 0.0;
    for (const auto& [key, v] : shares) {
        check_fraction(v, field + "." + std::string(to_string(key)));
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError(field, "shares must sum to 1, got " + std::to_string(sum));
}

// Largest-remainder apportionment of total over weights.
std::vector<Count> apportion(Count total, const std::vector<double>& weights) {
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<Count> out(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    remainders.reserve(weights.size());
    Count assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / wsum;
        out[i] = static_cast<Count>(std::floor(exact));
        assigned += out[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) out[remainders[k % remainders.size()].second] += 1;
    return out;
}

template <typename Key>
Key draw_from_shares(const std::map<Key, double>& shares, double u) {
    double acc = 0.0;
    Key last = shares.begin()->first;
    for (const auto& [key, v] : shares) {
        if (v <= 0.0) continue;
        acc += v;
        last = key;
        if (u < acc) return key;
    }
    return last;
}

bool matches(const DocumentRecord& d, const CountFilter& f) {
    if (f.years && !f.years->contains(d.year)) return false;
    if (f.language && *f.language != d.language) return false;
    if (f.doc_type && *f.doc_type != d.doc_type) return false;
    if (f.category && *f.category != d.category) return false;
    return true;
}

void validate_filter(const CountFilter& f) {
    if (f.years) f.years->validate("filter.years");
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string_view to_string(Language v) { return kLanguageNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(DocType v) { return kDocTypeNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Category v) { return kCategoryNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(EntryKind v) { return kEntryKindNames[static_cast<std::size_t>(v)]; }

Language parse_language(std::string_view s, const std::string& field) {
    return parse_enum<Language>(s, kLanguageNames, field);
}
DocType parse_doc_type(std::string_view s, const std::string& field) {
    return parse_enum<DocType>(s, kDocTypeNames, field);
}
Category parse_category(std::string_view s, const std::string& field) {
    return parse_enum<Category>(s, kCategoryNames, field);
}
EntryKind parse_entry_kind(std::string_view s, const std::string& field) {
    return parse_enum<EntryKind>(s, kEntryKindNames, field);
}

// ---------------------------------------------------------------------------
// YearRange

void YearRange::validate(const std::string& field) const {
    if (from > to) throw ValidationError(field, "inverted year range " + str());
}

std::string YearRange::str() const { return std::to_string(from) + "-" + std::to_string(to); }

YearRange YearRange::parse(std::string_view text, const std::string& field) {
    const std::string t = csv::trim(text);
    // Accept "1990", "1990-2000" and "1990:2000"; a leading '-' is not a year.
    auto sep = t.find_first_of("-:", 1);
    try {
        YearRange r;
        if (sep == std::string::npos) {
            r.from = r.to = std::stoi(t);
        } else {
            r.from = std::stoi(t.substr(0, sep));
            r.to = std::stoi(t.substr(sep + 1));
        }
        r.validate(field);
        return r;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw ValidationError(field, "not a year or year range: '" + t + "'");
    }
}

// ---------------------------------------------------------------------------
// UniverseConfig

void UniverseConfig::validate() const {
    if (total_docs < 1) throw ValidationError("total_docs", "must be >= 1");
    if (total_docs > static_cast<Count>(std::numeric_limits<DocId>::max()))
        throw ValidationError("total_docs", "exceeds the document id space");
    year_range.validate("year_range");
    if (!(growth_rate > 0.0) || !std::isfinite(growth_rate)) throw ValidationError("growth_rate", "must be > 0");
    if (language_shares.empty()) throw ValidationError("language_shares", "must not be empty");
    if (type_shares.empty()) throw ValidationError("type_shares", "must not be empty");
    check_shares(language_shares, "language_shares");
    check_shares(type_shares, "type_shares");
    check_fraction(patent_share, "patent_share");
    check_fraction(caselaw_share, "caselaw_share");
    if (patent_share + caselaw_share > 1.0 + 1e-12)
        throw ValidationError("patent_share", "patent_share + caselaw_share exceeds 1");
    if (!(citation_density >= 0.0) || !std::isfinite(citation_density))
        throw ValidationError("citation_density", "must be >= 0");
}

nlohmann::json UniverseConfig::to_json() const {
    nlohmann::json j;
    j["total_docs"] = total_docs;
    j["year_range"] = {year_range.from, year_range.to};
    j["growth_rate"] = growth_rate;
    for (const auto& [k, v] : language_shares) j["language_shares"][std::string(to_string(k))] = v;
    for (const auto& [k, v] : type_shares) j["type_shares"][std::string(to_string(k))] = v;
    j["patent_share"] = patent_share;
    j["caselaw_share"] = caselaw_share;
    j["citation_density"] = citation_density;
    j["seed"] = seed;
    return j;
}

UniverseConfig UniverseConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("universe", "config must be a JSON object");
    UniverseConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "total_docs") {
                c.total_docs = value.get<Count>();
            } else if (key == "year_range") {
                c.year_range = {value.at(0).get<int>(), value.at(1).get<int>()};
            } else if (key == "growth_rate") {
                c.growth_rate = value.get<double>();
            } else if (key == "language_shares") {
                c.language_shares.clear();
                for (const auto& [name, share] : value.items())
                    c.language_shares[parse_language(name, "language_shares")] = share.get<double>();
            } else if (key == "type_shares") {
                c.type_shares.clear();
                for (const auto& [name, share] : value.items())
                    c.type_shares[parse_doc_type(name, "type_shares")] = share.get<double>();
            } else if (key == "patent_share") {
                c.patent_share = value.get<double>();
            } else if (key == "caselaw_share") {
                c.caselaw_share = value.get<double>();
            } else if (key == "citation_density") {
                c.citation_density = value.get<double>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else {
                throw ValidationError(key, "unknown universe config key");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(key, e.what());
        }
    }
    c.validate();
    return c;
}

UniverseConfig UniverseConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("universe_config", "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("universe_config", std::string("malformed JSON: ") + e.what());
    }
    return from_json(j);
}

// ---------------------------------------------------------------------------
// GroundTruthUniverse

GroundTruthUniverse::GroundTruthUniverse(UniverseConfig config, std::vector<DocumentRecord> docs)
    : config_(std::move(config)), docs_(std::move(docs)) {
    per_year_.assign(static_cast<std::size_t>(config_.year_range.span()), 0);
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& d = docs_[i];
        if (d.id != i) throw ValidationError("id", "documents must be numbered densely from 0");
        if (!config_.year_range.contains(d.year))
            throw ValidationError("year", "document " + std::to_string(d.id) + " outside year range");
        for (DocId c : d.cites) {
            if (c == d.id) throw ValidationError("cites", "self-citation in document " + std::to_string(d.id));
            if (c >= docs_.size()) throw ValidationError("cites", "dangling citation in document " + std::to_string(d.id));
        }
        per_year_[static_cast<std::size_t>(d.year - config_.year_range.from)] += 1;
    }
    id_ = fnv1a(config_.to_json().dump());
}

GroundTruthUniverse generate_universe(const UniverseConfig& config) {
    config.validate();

    const auto years = static_cast<std::size_t>(config.year_range.span());
    std::vector<double> weights(years);
    // log-space so steep growth over three centuries does not overflow
    const double log_growth = std::log(config.growth_rate);
    const double top = log_growth * static_cast<double>(years - 1);
    for (std::size_t i = 0; i < years; ++i) {
        const double e = log_growth * static_cast<double>(i);
        weights[i] = std::exp(e - std::max(top, 0.0));
    }
    const std::vector<Count> per_year = apportion(config.total_docs, weights);

    Rng rng(config.seed);
    std::vector<DocumentRecord> docs;
    docs.reserve(static_cast<std::size_t>(config.total_docs));

    // Documents are numbered in year order, so "documents published no later
    // than year y" is the id prefix [0, end_of_year).
    DocId next = 0;
    for (std::size_t yi = 0; yi < years; ++yi) {
        const int year = config.year_range.from + static_cast<int>(yi);
        for (Count k = 0; k < per_year[yi]; ++k) {
            DocumentRecord d;
            d.id = next++;
            d.year = year;
            d.language = draw_from_shares(config.language_shares, rng.uniform());
            d.doc_type = draw_from_shares(config.type_shares, rng.uniform());
            const double u = rng.uniform();
            if (u < config.patent_share) d.category = Category::patent;
            else if (u < config.patent_share + config.caselaw_share) d.category = Category::case_law;
            else d.category = Category::article;
            docs.push_back(std::move(d));
        }
    }

    std::size_t year_end = 0;
    std::size_t cursor = 0;
    for (std::size_t yi = 0; yi < years; ++yi) {
        year_end += static_cast<std::size_t>(per_year[yi]);
        for (; cursor < year_end; ++cursor) {
            auto& d = docs[cursor];
            const std::uint64_t eligible = year_end - 1;  // everyone up to this year except self
            if (eligible == 0) continue;
            std::uint64_t want = std::min<std::uint64_t>(rng.poisson(config.citation_density), eligible);
            d.cites.reserve(want);
            for (std::uint64_t c = 0; c < want; ++c) {
                auto target = static_cast<DocId>(rng.below(eligible));
                if (target >= d.id) ++target;  // skip self
                d.cites.push_back(target);
            }
            std::sort(d.cites.begin(), d.cites.end());
            d.cites.erase(std::unique(d.cites.begin(), d.cites.end()), d.cites.end());
        }
    }

    return GroundTruthUniverse(config, std::move(docs));
}

// ---------------------------------------------------------------------------
// CoveragePolicy

std::string CoverageKey::str() const {
    std::string s = std::string(to_string(language)) + "/" + std::string(to_string(doc_type));
    if (category) s += "/" + std::string(to_string(*category));
    return s;
}

CoverageKey CoverageKey::parse(std::string_view text) {
    const auto parts = split(text, '/');
    if (parts.size() < 2 || parts.size() > 3)
        throw ValidationError("inclusion", "coverage key must be language/doc_type[/category], got '" +
                                               std::string(text) + "'");
    CoverageKey k;
    k.language = parse_language(parts[0], "inclusion." + std::string(text));
    k.doc_type = parse_doc_type(parts[1], "inclusion." + std::string(text));
    if (parts.size() == 3) k.category = parse_category(parts[2], "inclusion." + std::string(text));
    return k;
}

double CoveragePolicy::inclusion_for(const DocumentRecord& doc) const {
    if (!inclusion.empty()) {
        if (auto it = inclusion.find(CoverageKey{doc.language, doc.doc_type, doc.category}); it != inclusion.end())
            return it->second;
        if (auto it = inclusion.find(CoverageKey{doc.language, doc.doc_type, std::nullopt}); it != inclusion.end())
            return it->second;
    }
    return default_inclusion;
}

void CoveragePolicy::validate() const {
    check_fraction(default_inclusion, "default_inclusion");
    for (const auto& [k, p] : inclusion) check_fraction(p, "inclusion." + k.str());
    check_fraction(duplicate_rate, "duplicate_rate");
    check_fraction(stub_rate, "stub_rate");
    check_fraction(max_file_exclusion_rate, "max_file_exclusion_rate");
}

nlohmann::json CoveragePolicy::to_json() const {
    nlohmann::json j;
    j["default_inclusion"] = default_inclusion;
    j["inclusion"] = nlohmann::json::object();
    for (const auto& [k, p] : inclusion) j["inclusion"][k.str()] = p;
    j["duplicate_rate"] = duplicate_rate;
    j["stub_rate"] = stub_rate;
    j["max_file_exclusion_rate"] = max_file_exclusion_rate;
    return j;
}

CoveragePolicy CoveragePolicy::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("policy", "coverage policy must be a JSON object");
    CoveragePolicy p;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "default_inclusion") p.default_inclusion = value.get<double>();
            else if (key == "inclusion")
                for (const auto& [name, prob] : value.items()) p.inclusion[CoverageKey::parse(name)] = prob.get<double>();
            else if (key == "duplicate_rate") p.duplicate_rate = value.get<double>();
            else if (key == "stub_rate") p.stub_rate = value.get<double>();
            else if (key == "max_file_exclusion_rate") p.max_file_exclusion_rate = value.get<double>();
            else throw ValidationError(key, "unknown coverage policy key");
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(key, e.what());
        }
    }
    p.validate();
    return p;
}

CoveragePolicy CoveragePolicy::uniform(double p) {
    CoveragePolicy policy;
    policy.default_inclusion = p;
    return policy;
}

// ---------------------------------------------------------------------------
// IndexView

IndexView::IndexView(std::shared_ptr<const GroundTruthUniverse> universe, std::vector<IndexEntry> entries)
    : universe_(std::move(universe)), entries_(std::move(entries)) {
    if (!universe_) throw ValidationError("universe", "view needs a parent universe");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.version_count < 1) throw ValidationError("version_count", "must be >= 1");
        if (e.doc >= universe_->size()) throw ValidationError("doc", "entry references unknown document");
        if (i > 0 && entries_[i - 1].doc >= e.doc) throw ValidationError("entries", "entries must be sorted and unique");
    }
}

const IndexEntry* IndexView::find(DocId doc) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), doc,
                               [](const IndexEntry& e, DocId d) { return e.doc < d; });
    return (it != entries_.end() && it->doc == doc) ? &*it : nullptr;
}

bool IndexView::has_full_record(DocId doc) const {
    const auto* e = find(doc);
    return e && e->kind == EntryKind::full_record;
}

std::vector<DocId> IndexView::full_record_ids() const {
    std::vector<DocId> ids;
    for (const auto& e : entries_)
        if (e.kind == EntryKind::full_record) ids.push_back(e.doc);
    return ids;
}

IndexView derive_view(std::shared_ptr<const GroundTruthUniverse> universe, const CoveragePolicy& policy,
                      std::uint64_t seed) {
    if (!universe) throw ValidationError("universe", "null universe");
    policy.validate();

    const auto docs = universe->documents();
    std::vector<std::uint8_t> covered(docs.size(), 0);
    for (const auto& d : docs) {
        if (d.doc_type == DocType::thesis && policy.max_file_exclusion_rate > 0.0 &&
            keyed_uniform(seed, d.id, kSaltThesis) < policy.max_file_exclusion_rate)
            continue;
        if (keyed_uniform(seed, d.id, kSaltInclude) < policy.inclusion_for(d)) covered[d.id] = 1;
    }

    // Stubs: documents the engine only knows as references from its own full records.
    std::vector<std::uint8_t> stub(docs.size(), 0);
    if (policy.stub_rate > 0.0) {
        for (const auto& d : docs) {
            if (!covered[d.id]) continue;
            for (DocId c : d.cites)
                if (!covered[c]) stub[c] = 1;
        }
        for (const auto& d : docs)
            if (stub[d.id] && keyed_uniform(seed, d.id, kSaltStub) >= policy.stub_rate) stub[d.id] = 0;
    }

    std::vector<IndexEntry> entries;
    for (const auto& d : docs) {
        if (covered[d.id]) {
            const bool dup = policy.duplicate_rate > 0.0 && keyed_uniform(seed, d.id, kSaltDuplicate) < policy.duplicate_rate;
            entries.push_back({d.id, EntryKind::full_record, dup ? 2u : 1u});
        } else if (stub[d.id]) {
            entries.push_back({d.id, EntryKind::citation_stub, 1u});
        }
    }
    return IndexView(std::move(universe), std::move(entries));
}

// ---------------------------------------------------------------------------
// Counting

Count true_count(const GroundTruthUniverse& universe, const CountFilter& filter) {
    validate_filter(filter);
    if (filter.entry_kind && *filter.entry_kind != EntryKind::full_record) return 0;
    Count n = 0;
    for (const auto& d : universe.documents())
        if (matches(d, filter)) ++n;
    return n;
}

Count true_count(const IndexView& view, const CountFilter& filter) {
    validate_filter(filter);
    Count n = 0;
    for (const auto& e : view.entries()) {
        if (filter.entry_kind && *filter.entry_kind != e.kind) continue;
        if (matches(view.universe().document(e.doc), filter)) ++n;
    }
    return n;
}

Count hit_total(const IndexView& view, const CountFilter& filter) {
    validate_filter(filter);
    Count n = 0;
    for (const auto& e : view.entries()) {
        if (filter.entry_kind && *filter.entry_kind != e.kind) continue;
        if (matches(view.universe().document(e.doc), filter)) n += e.version_count;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Record files

namespace {
constexpr std::string_view kUniverseTag = "#indexsize-universe v1\t";
constexpr std::string_view kViewTag = "#indexsize-view v1\t";
}  // namespace

void write_universe(std::ostream& out, const GroundTruthUniverse& universe) {
    out << kUniverseTag << universe.config().to_json().dump() << '\n';
    for (const auto& d : universe.documents()) {
        out << d.id << '\t' << d.year << '\t' << to_string(d.language) << '\t' << to_string(d.doc_type) << '\t'
            << to_string(d.category) << '\t';
        for (std::size_t i = 0; i < d.cites.size(); ++i) {
            if (i) out << ',';
            out << d.cites[i];
        }
        out << '\n';
    }
}

GroundTruthUniverse read_universe(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kUniverseTag, 0) != 0)
        throw SchemaError("universe file: missing '#indexsize-universe v1' header");
    UniverseConfig config = UniverseConfig::from_json(nlohmann::json::parse(line.substr(kUniverseTag.size())));

    std::vector<DocumentRecord> docs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() != 6) throw SchemaError("universe file line " + std::to_string(lineno) + ": expected 6 fields");
        try {
            DocumentRecord d;
            d.id = static_cast<DocId>(std::stoul(f[0]));
            d.year = std::stoi(f[1]);
            d.language = parse_language(f[2]);
            d.doc_type = parse_doc_type(f[3]);
            d.category = parse_category(f[4]);
            if (!f[5].empty())
                for (const auto& c : split(f[5], ',')) d.cites.push_back(static_cast<DocId>(std::stoul(c)));
            docs.push_back(std::move(d));
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            throw SchemaError("universe file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return GroundTruthUniverse(std::move(config), std::move(docs));
}

void write_view(std::ostream& out, const IndexView& view) {
    nlohmann::json header{{"universe_id", view.universe_id()}};
    out << kViewTag << header.dump() << '\n';
    for (const auto& e : view.entries()) out << e.doc << '\t' << to_string(e.kind) << '\t' << e.version_count << '\n';
}

IndexView read_view(std::istream& in, std::shared_ptr<const GroundTruthUniverse> universe) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kViewTag, 0) != 0)
        throw SchemaError("view file: missing '#indexsize-view v1' header");
    const auto header = nlohmann::json::parse(line.substr(kViewTag.size()));
    if (header.at("universe_id").get<std::uint64_t>() != universe->id())
        throw ValidationError("universe_id", "view was derived from a different universe");

    std::vector<IndexEntry> entries;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() != 3) throw SchemaError("view file line " + std::to_string(lineno) + ": expected 3 fields");
        try {
            entries.push_back({static_cast<DocId>(std::stoul(f[0])), parse_entry_kind(f[1]),
                               static_cast<std::uint32_t>(std::stoul(f[2]))});
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            throw SchemaError("view file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return IndexView(std::move(universe), std::move(entries));
}

}  // namespace indexsize
