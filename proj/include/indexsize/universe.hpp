#pragma once

// Ground-truth scholarly corpus and the partial index views derived from it.
//
// A universe is generated once from a UniverseConfig and is immutable
// afterwards; views hold a shared pointer to their parent so they can be
// handed to engines and probes without lifetime bookkeeping.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace indexsize {

using DocId = std::uint32_t;
using Count = std::int64_t;

enum class Language : std::uint8_t { english, other };
enum class DocType : std::uint8_t { journal_article, conference, book, book_chapter, thesis, report, other };
enum class Category : std::uint8_t { article, patent, case_law };
enum class EntryKind : std::uint8_t { full_record, citation_stub };

inline constexpr std::size_t kLanguageCount = 2;
inline constexpr std::size_t kDocTypeCount = 7;
inline constexpr std::size_t kCategoryCount = 3;

std::string_view to_string(Language v);
std::string_view to_string(DocType v);
std::string_view to_string(Category v);
std::string_view to_string(EntryKind v);

// Parsers throw ValidationError(field, ...) on unknown names.
Language parse_language(std::string_view s, const std::string& field = "language");
DocType parse_doc_type(std::string_view s, const std::string& field = "doc_type");
Category parse_category(std::string_view s, const std::string& field = "category");
EntryKind parse_entry_kind(std::string_view s, const std::string& field = "entry_kind");

/// Closed interval of publication years.
struct YearRange {
    int from = 0;
    int to = 0;

    constexpr bool contains(int year) const noexcept { return from <= year && year <= to; }
    constexpr bool contains(const YearRange& r) const noexcept { return from <= r.from && r.to <= to; }
    constexpr int span() const noexcept { return to - from + 1; }
    constexpr bool single_year() const noexcept { return from == to; }

    /// Throws ValidationError when from > to.
    void validate(const std::string& field) const;
    std::string str() const;
    static YearRange parse(std::string_view text, const std::string& field = "period");

    auto operator<=>(const YearRange&) const = default;
};

struct DocumentRecord {
    DocId id = 0;
    int year = 0;
    Language language = Language::english;
    DocType doc_type = DocType::journal_article;
    Category category = Category::article;
    std::vector<DocId> cites;  // sorted, unique, never contains id

    bool operator==(const DocumentRecord&) const = default;
};

/// Generation parameters. Share defaults follow the WoS-like profile: about
/// 90% English and 75% journal documents. These are synthesis choices, not
/// measured properties of any particular engine.
struct UniverseConfig {
    Count total_docs = 10'000;
    YearRange year_range{1700, 2013};
    double growth_rate = 1.03;
    std::map<Language, double> language_shares{{Language::english, 0.9}, {Language::other, 0.1}};
    std::map<DocType, double> type_shares{
        {DocType::journal_article, 0.75}, {DocType::conference, 0.10}, {DocType::book, 0.005},
        {DocType::book_chapter, 0.005},   {DocType::thesis, 0.04},     {DocType::report, 0.05},
        {DocType::other, 0.05},
    };
    double patent_share = 0.0092;
    double caselaw_share = 0.05;
    double citation_density = 10.0;
    std::uint64_t seed = 42;

    /// Throws ValidationError naming the first bad field.
    void validate() const;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static UniverseConfig from_json(const nlohmann::json& j);
    static UniverseConfig load(const std::string& path);
};

class GroundTruthUniverse {
public:
    GroundTruthUniverse(UniverseConfig config, std::vector<DocumentRecord> docs);

    /// Stable identifier derived from the generating config.
    std::uint64_t id() const noexcept { return id_; }
    const UniverseConfig& config() const noexcept { return config_; }
    std::span<const DocumentRecord> documents() const noexcept { return docs_; }
    const DocumentRecord& document(DocId id) const { return docs_.at(id); }
    std::size_t size() const noexcept { return docs_.size(); }

    /// Documents per year, indexed from config().year_range.from.
    const std::vector<Count>& per_year_counts() const noexcept { return per_year_; }

private:
    UniverseConfig config_;
    std::vector<DocumentRecord> docs_;
    std::vector<Count> per_year_;
    std::uint64_t id_ = 0;
};

GroundTruthUniverse generate_universe(const UniverseConfig& config);

/// Inclusion probability keyed by language and type, optionally narrowed to a
/// category. Lookups prefer the (language, type, category) entry, then
/// (language, type), then default_inclusion.
struct CoverageKey {
    Language language = Language::english;
    DocType doc_type = DocType::journal_article;
    std::optional<Category> category{};

    auto operator<=>(const CoverageKey&) const = default;
    std::string str() const;
    static CoverageKey parse(std::string_view text);
};

struct CoveragePolicy {
    double default_inclusion = 1.0;
    std::map<CoverageKey, double> inclusion;
    double duplicate_rate = 0.0;
    double stub_rate = 0.0;
    double max_file_exclusion_rate = 0.0;

    double inclusion_for(const DocumentRecord& doc) const;
    void validate() const;

    nlohmann::json to_json() const;
    static CoveragePolicy from_json(const nlohmann::json& j);

    static CoveragePolicy uniform(double p);
};

struct IndexEntry {
    DocId doc = 0;
    EntryKind kind = EntryKind::full_record;
    std::uint32_t version_count = 1;

    bool operator==(const IndexEntry&) const = default;
};

/// One engine's partial view of a universe. Entries are sorted by document id
/// and a document appears at most once.
class IndexView {
public:
    IndexView(std::shared_ptr<const GroundTruthUniverse> universe, std::vector<IndexEntry> entries);

    const GroundTruthUniverse& universe() const noexcept { return *universe_; }
    std::shared_ptr<const GroundTruthUniverse> universe_ptr() const noexcept { return universe_; }
    std::uint64_t universe_id() const noexcept { return universe_->id(); }
    std::span<const IndexEntry> entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    const IndexEntry* find(DocId doc) const;
    bool has_full_record(DocId doc) const;

    /// Ids of documents indexed as full records, ascending.
    std::vector<DocId> full_record_ids() const;

private:
    std::shared_ptr<const GroundTruthUniverse> universe_;
    std::vector<IndexEntry> entries_;
};

IndexView derive_view(std::shared_ptr<const GroundTruthUniverse> universe, const CoveragePolicy& policy,
                      std::uint64_t seed);

struct CountFilter {
    std::optional<YearRange> years{};
    std::optional<Language> language{};
    std::optional<DocType> doc_type{};
    std::optional<Category> category{};
    std::optional<EntryKind> entry_kind{};
};

/// Exact number of documents matching the filter. A universe treats every
/// document as a full record.
Count true_count(const GroundTruthUniverse& universe, const CountFilter& filter = {});
/// Exact number of unique view entries matching the filter.
Count true_count(const IndexView& view, const CountFilter& filter = {});
/// Like true_count but every entry weighs its version_count, which is what a
/// hit counter that does not collapse versions reports.
Count hit_total(const IndexView& view, const CountFilter& filter = {});

// Newline-delimited record files. The first line is a header carrying the
// format tag; every further line is one tab-separated record:
//   universe: id, year, language, type, category, comma-separated cites
//   view:     id, entry_kind, version_count
void write_universe(std::ostream& out, const GroundTruthUniverse& universe);
GroundTruthUniverse read_universe(std::istream& in);
void write_view(std::ostream& out, const IndexView& view);
IndexView read_view(std::istream& in, std::shared_ptr<const GroundTruthUniverse> universe);

}  // namespace indexsize
