#pragma once

// Query facade over an index. EngineBackend is the contract every backend
// satisfies: the simulated engine over an IndexView, the fixture-replay
// ("mock-live") backend, and any future live adapter.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "indexsize/universe.hpp"

namespace indexsize {

enum class SearchCategory : std::uint8_t { articles, case_law };

std::string_view to_string(SearchCategory c);
SearchCategory parse_search_category(std::string_view s);

struct SearchFlags {
    bool include_citations = true;
    bool include_patents = true;

    bool operator==(const SearchFlags&) const = default;
};

/// Fixture-style label: all | records+citations | records+patents | records.
std::string flags_label(SearchFlags f);
SearchFlags parse_flags_label(std::string_view s);

/// Syntactic hostname check (labels of letters, digits and hyphens, at least one dot).
bool is_hostname(std::string_view s);

/// Largest page the modeled engine serves.
inline constexpr int kMaxPageSize = 20;

struct Query {
    std::string term;
    std::optional<std::string> excluded_site;
    std::optional<YearRange> year_range;
    SearchFlags flags;
    SearchCategory category = SearchCategory::articles;
    int page = 1;
    int page_size = kMaxPageSize;

    /// Throws ValidationError. A site exclusion needs a term next to it.
    void validate() const;

    /// "<term -site:host>" style rendering plus the filters, stable across runs.
    std::string canonical() const;
    /// Hash of canonical() ignoring pagination.
    std::uint64_t key() const;
    bool has_site_exclusion() const { return excluded_site.has_value(); }

    nlohmann::json to_json() const;
};

struct HitCountEstimate {
    Count value = 0;
    bool rounded = false;
    std::optional<Count> raw_true_count;  // simulator only

    bool operator==(const HitCountEstimate&) const = default;
};

/// Engine pathologies. Everything defaults to off except the 1,000-result cap.
struct FaultProfile {
    bool hce_rounding = false;
    double multiplicative_noise_sigma = 0.0;
    Count result_cap = 1000;
    bool custom_range_malfunction = false;
    double flag_exclusion_inconsistency_rate = 0.0;
    double citation_toggle_inconsistency_rate = 0.0;
    double stub_duplicity_rate = 0.0;
    double empty_serp_rate = 0.0;
    bool absurd_query_drops_citations = false;
    /// Terms whose all-inclusive site-exclusion query fails with a server error.
    std::vector<std::string> server_error_terms;

    void validate() const;
    nlohmann::json to_json() const;
    static FaultProfile from_json(const nlohmann::json& j);
};

/// Rounds to three significant digits (half-up) for n >= 1000 when
/// profile.hce_rounding is on. With multiplicative_noise_sigma > 0 the value is
/// first scaled by exp(sigma * z), z a standard normal drawn from noise_key.
HitCountEstimate round_hce(Count n, const FaultProfile& profile, std::uint64_t noise_key = 0);

struct ResultPage {
    std::vector<DocId> ids;
    HitCountEstimate hce;
    bool capped = false;      // requested page lies beyond the result cap
    bool false_serp = false;  // empty page although the HCE promises results
    std::vector<std::string> diagnostics;
};

struct Capabilities {
    std::string name;
    bool year_filter = true;
    bool site_exclusion = true;
    bool result_pages = true;
    bool replays_aggregates = false;
};

class EngineBackend {
public:
    virtual ~EngineBackend() = default;

    /// Thread-safe. Throws BackendError on transport/server failure.
    virtual HitCountEstimate count(const Query& query) const = 0;
    virtual ResultPage fetch_page(const Query& query) const = 0;
    virtual Capabilities capabilities() const = 0;

    /// A pre-summed year-by-year total recorded for this query template over
    /// span, when the backend replays published aggregates instead of answering
    /// each year. Live and simulated backends return nullopt.
    virtual std::optional<HitCountEstimate> recorded_aggregate(const Query& /*tmpl*/, YearRange /*span*/) const {
        return std::nullopt;
    }
};

/// Simulated opaque engine over an IndexView.
///
/// Matching rules: every term matches every document (the corpus carries no
/// text) and no site exists, so excluding a site removes nothing. Articles
/// cover article records plus patents when include_patents is set; case-law
/// covers case-law records. Citation stubs count only with include_citations.
/// Hit counts weigh duplicated entries by their version count.
///
/// Fault randomness is keyed by (seed, query), never by call order, so
/// concurrent or repeated queries always see the same answer.
class SimulatedEngine final : public EngineBackend {
public:
    SimulatedEngine(std::shared_ptr<const IndexView> view, FaultProfile profile, std::uint64_t seed = 0);

    HitCountEstimate count(const Query& query) const override;
    ResultPage fetch_page(const Query& query) const override;
    Capabilities capabilities() const override;

    const FaultProfile& profile() const noexcept { return profile_; }
    const IndexView& view() const noexcept { return *view_; }
    YearRange years() const noexcept { return years_; }

    /// Matching entries (version weighted) with every fault off.
    Count exact_count(const Query& query) const;

private:
    struct Cell {
        Count full_hits = 0;
        Count stub_hits = 0;
        Count duplicity_hits = 0;
        std::vector<DocId> full_ids;
        std::vector<DocId> stub_ids;
        std::vector<DocId> duplicity_ids;
    };

    const Cell& cell(int year, Category c) const;
    Count matched(YearRange range, SearchCategory category, bool citations, bool patents) const;
    YearRange effective_range(const Query& q) const;

    std::shared_ptr<const IndexView> view_;
    FaultProfile profile_;
    std::uint64_t seed_;
    YearRange years_;
    std::vector<Cell> cells_;  // [year][category]
};

/// Blocking token bucket: `per_minute` requests per minute, bursts up to
/// `burst`. per_minute <= 0 disables limiting.
class TokenBucket {
public:
    explicit TokenBucket(double per_minute, double burst = 1.0);
    void acquire();
    bool try_acquire();

private:
    void refill_locked(std::chrono::steady_clock::time_point now);

    double rate_per_sec_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

/// One transcribed observation of a live engine.
struct FixtureRow {
    SearchCategory category = SearchCategory::articles;
    std::string procedure;  // total | time-span | year | longitudinal
    std::string term;
    std::string excluded_site;
    std::optional<YearRange> period;
    SearchFlags flags;
    std::optional<Count> hce;  // nullopt: the engine answered with a server error
    std::string source;
};

/// Columns: category, procedure, term, excluded_site, period, flags, hce, source.
/// hce "ERROR" records a server failure.
std::vector<FixtureRow> load_query_fixture(const std::string& path);

/// "mock-live" backend: replays recorded responses through the backend
/// contract, paced by a token bucket as a live adapter would be.
class FixtureBackend final : public EngineBackend {
public:
    explicit FixtureBackend(std::vector<FixtureRow> rows, double requests_per_minute = 0.0,
                            std::string source_path = {});

    HitCountEstimate count(const Query& query) const override;
    ResultPage fetch_page(const Query& query) const override;
    Capabilities capabilities() const override;
    std::optional<HitCountEstimate> recorded_aggregate(const Query& tmpl, YearRange span) const override;

    const std::string& source_path() const noexcept { return source_path_; }
    std::span<const FixtureRow> rows() const noexcept { return rows_; }

private:
    const FixtureRow* lookup(const Query& q, bool aggregate, std::optional<YearRange> span) const;

    std::vector<FixtureRow> rows_;
    std::string source_path_;
    mutable TokenBucket bucket_;
};

/// JSON-lines query log (query, HCE, timestamp, diagnostics). Thread-safe.
class QueryLog {
public:
    using Clock = std::function<std::string()>;

    explicit QueryLog(std::ostream* sink = nullptr, Clock clock = {});

    void record(const Query& query, const std::optional<HitCountEstimate>& hce,
                std::vector<std::string> diagnostics = {});
    std::vector<nlohmann::json> entries() const;
    std::size_t size() const;
    void write(std::ostream& out) const;

private:
    std::ostream* sink_;
    Clock clock_;
    mutable std::mutex mu_;
    std::vector<nlohmann::json> entries_;
};

/// Decorator that logs every request it forwards.
class LoggingBackend final : public EngineBackend {
public:
    LoggingBackend(const EngineBackend& inner, QueryLog& log) : inner_(inner), log_(log) {}

    HitCountEstimate count(const Query& query) const override;
    ResultPage fetch_page(const Query& query) const override;
    Capabilities capabilities() const override { return inner_.capabilities(); }
    std::optional<HitCountEstimate> recorded_aggregate(const Query& tmpl, YearRange span) const override;

private:
    const EngineBackend& inner_;
    QueryLog& log_;
};

}  // namespace indexsize
