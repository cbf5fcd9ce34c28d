#include "indexsize/engine.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <regex>
#include <thread>

#include "indexsize/csv.hpp"
#include "indexsize/errors.hpp"
#include "indexsize/random.hpp"

namespace indexsize {

namespace {

constexpr std::uint64_t kSaltNoise = 0x6e6f697365;
constexpr std::uint64_t kSaltMalfunction = 11;
constexpr std::uint64_t kSaltFlagTrigger = 12;
constexpr std::uint64_t kSaltFlagMagnitude = 13;
constexpr std::uint64_t kSaltToggleTrigger = 14;
constexpr std::uint64_t kSaltToggleMagnitude = 15;
constexpr std::uint64_t kSaltDuplicity = 16;
constexpr std::uint64_t kSaltSerp = 17;

void check_rate(double v, const char* field) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, "must be in [0, 1]");
}

Count pow10(int e) {
    Count v = 1;
    while (e-- > 0) v *= 10;
    return v;
}

int decimal_digits(Count v) {
    int d = 1;
    while (v >= 10) {
        v /= 10;
        ++d;
    }
    return d;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json hce_json(const HitCountEstimate& h) {
    nlohmann::json j{{"value", h.value}, {"rounded", h.rounded}};
    if (h.raw_true_count) j["raw_true_count"] = *h.raw_true_count;
    return j;
}

}  // namespace

bool is_hostname(std::string_view s) {
    static const std::regex re(R"(^[A-Za-z0-9]([A-Za-z0-9-]*[A-Za-z0-9])?(\.[A-Za-z0-9]([A-Za-z0-9-]*[A-Za-z0-9])?)+$)");
    return s.size() <= 253 && std::regex_match(s.begin(), s.end(), re);
}

std::string_view to_string(SearchCategory c) { return c == SearchCategory::articles ? "articles" : "case-law"; }

SearchCategory parse_search_category(std::string_view s) {
    if (s == "articles") return SearchCategory::articles;
    if (s == "case-law") return SearchCategory::case_law;
    throw ValidationError("category", "expected articles or case-law, got '" + std::string(s) + "'");
}

std::string flags_label(SearchFlags f) {
    if (f.include_citations && f.include_patents) return "all";
    if (f.include_citations) return "records+citations";
    if (f.include_patents) return "records+patents";
    return "records";
}

SearchFlags parse_flags_label(std::string_view s) {
    if (s == "all") return {true, true};
    if (s == "records+citations") return {true, false};
    if (s == "records+patents") return {false, true};
    if (s == "records") return {false, false};
    throw ValidationError("flags", "unknown flag combination '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Query

void Query::validate() const {
    if (page < 1) throw ValidationError("page", "must be >= 1");
    if (page_size < 1 || page_size > kMaxPageSize)
        throw ValidationError("page_size", "must be in [1, " + std::to_string(kMaxPageSize) + "]");
    if (year_range) year_range->validate("year_range");
    if (excluded_site) {
        if (term.empty()) throw ValidationError("term", "a site exclusion does not work without a term");
        if (!is_hostname(*excluded_site))
            throw ValidationError("excluded_site", "not a hostname: '" + *excluded_site + "'");
    }
}

std::string Query::canonical() const {
    std::string s = std::string(to_string(category)) + "|<" + term;
    if (excluded_site) s += (term.empty() ? "" : " ") + std::string("-site:") + *excluded_site;
    s += ">|" + (year_range ? year_range->str() : std::string("any")) + "|" + flags_label(flags);
    return s;
}

std::uint64_t Query::key() const { return fnv1a(canonical()); }

nlohmann::json Query::to_json() const {
    nlohmann::json j{{"category", std::string(to_string(category))},
                     {"term", term},
                     {"flags", flags_label(flags)},
                     {"page", page},
                     {"page_size", page_size}};
    j["excluded_site"] = excluded_site ? nlohmann::json(*excluded_site) : nlohmann::json(nullptr);
    j["year_range"] = year_range ? nlohmann::json(year_range->str()) : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// FaultProfile

void FaultProfile::validate() const {
    if (!(multiplicative_noise_sigma >= 0.0)) throw ValidationError("multiplicative_noise_sigma", "must be >= 0");
    if (result_cap < kMaxPageSize) throw ValidationError("result_cap", "must be >= the page size");
    check_rate(flag_exclusion_inconsistency_rate, "flag_exclusion_inconsistency_rate");
    check_rate(citation_toggle_inconsistency_rate, "citation_toggle_inconsistency_rate");
    check_rate(stub_duplicity_rate, "stub_duplicity_rate");
    check_rate(empty_serp_rate, "empty_serp_rate");
}

nlohmann::json FaultProfile::to_json() const {
    return {{"hce_rounding", hce_rounding},
            {"multiplicative_noise_sigma", multiplicative_noise_sigma},
            {"result_cap", result_cap},
            {"custom_range_malfunction", custom_range_malfunction},
            {"flag_exclusion_inconsistency_rate", flag_exclusion_inconsistency_rate},
            {"citation_toggle_inconsistency_rate", citation_toggle_inconsistency_rate},
            {"stub_duplicity_rate", stub_duplicity_rate},
            {"empty_serp_rate", empty_serp_rate},
            {"absurd_query_drops_citations", absurd_query_drops_citations},
            {"server_error_terms", server_error_terms}};
}

FaultProfile FaultProfile::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("faults", "fault profile must be a JSON object");
    FaultProfile p;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "hce_rounding") p.hce_rounding = v.get<bool>();
            else if (key == "multiplicative_noise_sigma") p.multiplicative_noise_sigma = v.get<double>();
            else if (key == "result_cap") p.result_cap = v.get<Count>();
            else if (key == "custom_range_malfunction") p.custom_range_malfunction = v.get<bool>();
            else if (key == "flag_exclusion_inconsistency_rate") p.flag_exclusion_inconsistency_rate = v.get<double>();
            else if (key == "citation_toggle_inconsistency_rate") p.citation_toggle_inconsistency_rate = v.get<double>();
            else if (key == "stub_duplicity_rate") p.stub_duplicity_rate = v.get<double>();
            else if (key == "empty_serp_rate") p.empty_serp_rate = v.get<double>();
            else if (key == "absurd_query_drops_citations") p.absurd_query_drops_citations = v.get<bool>();
            else if (key == "server_error_terms") p.server_error_terms = v.get<std::vector<std::string>>();
            else throw ValidationError(key, "unknown fault profile key");
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(key, e.what());
        }
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// round_hce

HitCountEstimate round_hce(Count n, const FaultProfile& profile, std::uint64_t noise_key) {
    if (n < 0) throw ValidationError("n", "hit counts are non-negative");
    HitCountEstimate h;
    Count v = n;
    if (profile.multiplicative_noise_sigma > 0.0) {
        const double z = keyed_normal(noise_key, kSaltNoise);
        v = std::llround(static_cast<double>(n) * std::exp(profile.multiplicative_noise_sigma * z));
    }
    if (profile.hce_rounding && v >= 1000) {
        const Count unit = pow10(decimal_digits(v) - 3);
        v = ((v + unit / 2) / unit) * unit;
        h.rounded = true;
    }
    h.value = v;
    return h;
}

// ---------------------------------------------------------------------------
// SimulatedEngine

SimulatedEngine::SimulatedEngine(std::shared_ptr<const IndexView> view, FaultProfile profile, std::uint64_t seed)
    : view_(std::move(view)), profile_(std::move(profile)), seed_(seed) {
    if (!view_) throw ValidationError("view", "engine needs an index view");
    profile_.validate();
    years_ = view_->universe().config().year_range;
    cells_.resize(static_cast<std::size_t>(years_.span()) * kCategoryCount);

    for (const auto& e : view_->entries()) {
        const auto& doc = view_->universe().document(e.doc);
        auto& c = cells_[static_cast<std::size_t>(doc.year - years_.from) * kCategoryCount +
                         static_cast<std::size_t>(doc.category)];
        if (e.kind == EntryKind::full_record) {
            c.full_hits += e.version_count;
            c.full_ids.push_back(e.doc);
            if (profile_.stub_duplicity_rate > 0.0 &&
                keyed_uniform(seed_, e.doc, kSaltDuplicity) < profile_.stub_duplicity_rate) {
                c.duplicity_hits += 1;
                c.duplicity_ids.push_back(e.doc);
            }
        } else {
            c.stub_hits += e.version_count;
            c.stub_ids.push_back(e.doc);
        }
    }
}

const SimulatedEngine::Cell& SimulatedEngine::cell(int year, Category c) const {
    return cells_[static_cast<std::size_t>(year - years_.from) * kCategoryCount + static_cast<std::size_t>(c)];
}

YearRange SimulatedEngine::effective_range(const Query& q) const { return q.year_range.value_or(years_); }

Count SimulatedEngine::matched(YearRange range, SearchCategory category, bool citations, bool patents) const {
    const int from = std::max(range.from, years_.from);
    const int to = std::min(range.to, years_.to);
    Count n = 0;
    auto add = [&](const Cell& c) {
        n += c.full_hits;
        if (citations) n += c.stub_hits + c.duplicity_hits;
    };
    for (int y = from; y <= to; ++y) {
        if (category == SearchCategory::articles) {
            add(cell(y, Category::article));
            if (patents) add(cell(y, Category::patent));
        } else {
            add(cell(y, Category::case_law));
        }
    }
    return n;
}

Count SimulatedEngine::exact_count(const Query& query) const {
    query.validate();
    return matched(effective_range(query), query.category, query.flags.include_citations, query.flags.include_patents);
}

HitCountEstimate SimulatedEngine::count(const Query& q) const {
    q.validate();
    if (q.has_site_exclusion() && q.flags.include_citations && q.flags.include_patents &&
        std::find(profile_.server_error_terms.begin(), profile_.server_error_terms.end(), q.term) !=
            profile_.server_error_terms.end())
        throw BackendError("server error: technical problems to deliver results for " + q.canonical());

    const bool citations = q.flags.include_citations && !(profile_.absurd_query_drops_citations && q.has_site_exclusion());
    const YearRange range = effective_range(q);
    const Count truth = matched(range, q.category, citations, q.flags.include_patents);
    Count value = truth;

    if (q.year_range && range.single_year()) {
        // Flag faults are keyed without the flags so every flag combination of
        // one (category, term, year) query agrees on whether it misbehaves.
        std::string fk = std::string(to_string(q.category)) + "|" + q.term + "|" + q.excluded_site.value_or("") + "|" +
                         range.str();
        const std::uint64_t fault_key = fnv1a(fk);

        if (profile_.flag_exclusion_inconsistency_rate > 0.0 && q.category == SearchCategory::articles &&
            !q.flags.include_patents &&
            keyed_uniform(seed_, fault_key, kSaltFlagTrigger) < profile_.flag_exclusion_inconsistency_rate) {
            const Count inclusive = matched(range, q.category, citations, true);
            const double frac = 0.01 + 0.04 * keyed_uniform(seed_, fault_key, kSaltFlagMagnitude);
            value = inclusive + std::max<Count>(1, static_cast<Count>(std::ceil(static_cast<double>(inclusive) * frac)));
        }
        if (profile_.citation_toggle_inconsistency_rate > 0.0 && q.flags.include_citations &&
            keyed_uniform(seed_, fault_key, kSaltToggleTrigger) < profile_.citation_toggle_inconsistency_rate) {
            const Count without = matched(range, q.category, false, q.flags.include_patents);
            if (without > 0) {
                const double frac = 0.1 + 0.8 * keyed_uniform(seed_, fault_key, kSaltToggleMagnitude);
                value = std::min(without - 1, static_cast<Count>(std::floor(static_cast<double>(without) * frac)));
            }
        }
    } else if (q.year_range && profile_.custom_range_malfunction) {
        const double frac = 0.001 + 0.009 * keyed_uniform(seed_, q.key(), kSaltMalfunction);
        value = std::llround(static_cast<double>(truth) * frac);
    }

    HitCountEstimate h = round_hce(value, profile_, mix_keys(seed_, q.key()));
    h.raw_true_count = truth;
    return h;
}

ResultPage SimulatedEngine::fetch_page(const Query& q) const {
    q.validate();
    ResultPage page;
    const Count offset = static_cast<Count>(q.page - 1) * q.page_size;
    if (offset >= profile_.result_cap) {
        page.capped = true;
        page.diagnostics.push_back("page " + std::to_string(q.page) + " lies beyond the " +
                                   std::to_string(profile_.result_cap) + "-result cap");
        return page;
    }

    page.hce = count(q);

    if (profile_.empty_serp_rate > 0.0 &&
        keyed_uniform(seed_, mix_keys(q.key(), static_cast<std::uint64_t>(q.page)), kSaltSerp) < profile_.empty_serp_rate) {
        page.false_serp = page.hce.value > offset;
        page.diagnostics.push_back(page.false_serp ? "false SERP: empty page despite HCE " + std::to_string(page.hce.value)
                                                   : "empty SERP");
        return page;
    }

    const bool citations =
        q.flags.include_citations && !(profile_.absurd_query_drops_citations && q.has_site_exclusion());
    const YearRange range = effective_range(q);
    const Count limit = std::min<Count>(q.page_size, profile_.result_cap - offset);
    Count skip = offset;

    auto take = [&](const std::vector<DocId>& ids) {
        if (static_cast<Count>(page.ids.size()) >= limit) return;
        const auto n = static_cast<Count>(ids.size());
        if (skip >= n) {
            skip -= n;
            return;
        }
        for (Count i = skip; i < n && static_cast<Count>(page.ids.size()) < limit; ++i)
            page.ids.push_back(ids[static_cast<std::size_t>(i)]);
        skip = 0;
    };
    auto take_cell = [&](const Cell& c) {
        take(c.full_ids);
        if (citations) {
            take(c.stub_ids);
            take(c.duplicity_ids);
        }
    };
    for (int y = std::max(range.from, years_.from); y <= std::min(range.to, years_.to); ++y) {
        if (q.category == SearchCategory::articles) {
            take_cell(cell(y, Category::article));
            if (q.flags.include_patents) take_cell(cell(y, Category::patent));
        } else {
            take_cell(cell(y, Category::case_law));
        }
    }

    if (page.ids.empty() && page.hce.value > offset) {
        page.false_serp = true;
        page.diagnostics.push_back("false SERP: empty page despite HCE " + std::to_string(page.hce.value));
    }
    return page;
}

Capabilities SimulatedEngine::capabilities() const { return {"simulated", true, true, true, false}; }

// ---------------------------------------------------------------------------
// TokenBucket

TokenBucket::TokenBucket(double per_minute, double burst)
    : rate_per_sec_(per_minute / 60.0), capacity_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::refill_locked(std::chrono::steady_clock::time_point now) {
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
    last_ = now;
}

bool TokenBucket::try_acquire() {
    if (rate_per_sec_ <= 0.0) return true;
    std::lock_guard lock(mu_);
    refill_locked(std::chrono::steady_clock::now());
    if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return true;
    }
    return false;
}

void TokenBucket::acquire() {
    if (rate_per_sec_ <= 0.0) return;
    while (true) {
        double wait_sec;
        {
            std::lock_guard lock(mu_);
            refill_locked(std::chrono::steady_clock::now());
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait_sec = (1.0 - tokens_) / rate_per_sec_;
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_sec));
    }
}

// ---------------------------------------------------------------------------
// Fixture replay

std::vector<FixtureRow> load_query_fixture(const std::string& path) {
    const auto rows = csv::read_file(path);
    if (rows.empty()) throw SchemaError(path + ": empty fixture");
    const std::vector<std::string> expected{"category", "procedure", "term", "excluded_site",
                                            "period",   "flags",     "hce",  "source"};
    std::vector<std::string> header;
    for (const auto& h : rows.front().fields) header.push_back(csv::trim(h));
    if (header != expected)
        throw SchemaError(path + ": header must be category,procedure,term,excluded_site,period,flags,hce,source");

    std::vector<FixtureRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        const std::string where = path + ":" + std::to_string(rows[i].line);
        if (f.size() != expected.size()) throw SchemaError(where + ": expected 8 fields");
        FixtureRow r;
        try {
            r.category = parse_search_category(csv::trim(f[0]));
            r.procedure = csv::trim(f[1]);
            if (r.procedure != "total" && r.procedure != "time-span" && r.procedure != "year" &&
                r.procedure != "longitudinal")
                throw ValidationError("procedure", "unknown procedure '" + r.procedure + "'");
            r.term = csv::trim(f[2]);
            r.excluded_site = csv::trim(f[3]);
            if (const auto p = csv::trim(f[4]); !p.empty()) r.period = YearRange::parse(p);
            r.flags = parse_flags_label(csv::trim(f[5]));
            if (const auto h = csv::trim(f[6]); h != "ERROR") r.hce = csv::parse_count(h);
            r.source = csv::trim(f[7]);
        } catch (const std::exception& e) {
            throw SchemaError(where + ": " + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

FixtureBackend::FixtureBackend(std::vector<FixtureRow> rows, double requests_per_minute, std::string source_path)
    : rows_(std::move(rows)), source_path_(std::move(source_path)), bucket_(requests_per_minute) {}

const FixtureRow* FixtureBackend::lookup(const Query& q, bool aggregate, std::optional<YearRange> span) const {
    const std::string site = q.excluded_site.value_or("");
    auto same_flags = [&](const FixtureRow& r) {
        // Case law has no patent toggle.
        if (q.category == SearchCategory::case_law) return r.flags.include_citations == q.flags.include_citations;
        return r.flags == q.flags;
    };
    auto same_query = [&](const FixtureRow& r) {
        return r.category == q.category && r.term == q.term && r.excluded_site == site && same_flags(r);
    };

    if (aggregate) {
        for (const auto& r : rows_)
            if (r.procedure == "longitudinal" && same_query(r) && r.period == span) return &r;
        return nullptr;
    }
    if (!q.year_range) {
        for (const auto& r : rows_)
            if (r.procedure == "total" && same_query(r)) return &r;
        return nullptr;
    }
    const char* preferred = q.year_range->single_year() ? "year" : "time-span";
    for (const char* proc : {preferred, "time-span"})
        for (const auto& r : rows_)
            if (r.procedure == proc && same_query(r) && r.period == q.year_range) return &r;
    return nullptr;
}

HitCountEstimate FixtureBackend::count(const Query& q) const {
    q.validate();
    bucket_.acquire();
    const FixtureRow* r = lookup(q, false, std::nullopt);
    if (!r) throw BackendError("mock-live: no recorded response for " + q.canonical());
    if (!r->hce) throw BackendError("server error: technical problems to deliver results for " + q.canonical());
    return HitCountEstimate{*r->hce, false, std::nullopt};
}

ResultPage FixtureBackend::fetch_page(const Query& q) const {
    ResultPage page;
    page.hce = count(q);
    page.diagnostics.push_back("mock-live backend records hit counts only; no result lists");
    return page;
}

Capabilities FixtureBackend::capabilities() const { return {"mock-live", true, true, false, true}; }

std::optional<HitCountEstimate> FixtureBackend::recorded_aggregate(const Query& tmpl, YearRange span) const {
    const FixtureRow* r = lookup(tmpl, true, span);
    if (!r) return std::nullopt;
    if (!r->hce) throw BackendError("server error recorded for aggregate " + tmpl.canonical());
    return HitCountEstimate{*r->hce, false, std::nullopt};
}

// ---------------------------------------------------------------------------
// QueryLog

QueryLog::QueryLog(std::ostream* sink, Clock clock) : sink_(sink), clock_(clock ? std::move(clock) : Clock(utc_now)) {}

void QueryLog::record(const Query& query, const std::optional<HitCountEstimate>& hce,
                      std::vector<std::string> diagnostics) {
    nlohmann::json j;
    j["query"] = query.to_json();
    j["hce"] = hce ? hce_json(*hce) : nlohmann::json(nullptr);
    j["diagnostics"] = std::move(diagnostics);
    std::lock_guard lock(mu_);
    j["seq"] = entries_.size();
    j["timestamp"] = clock_();
    if (sink_) *sink_ << j.dump() << '\n';
    entries_.push_back(std::move(j));
}

std::vector<nlohmann::json> QueryLog::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::size_t QueryLog::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

void QueryLog::write(std::ostream& out) const {
    std::lock_guard lock(mu_);
    for (const auto& e : entries_) out << e.dump() << '\n';
}

HitCountEstimate LoggingBackend::count(const Query& query) const {
    try {
        auto h = inner_.count(query);
        log_.record(query, h);
        return h;
    } catch (const BackendError& e) {
        log_.record(query, std::nullopt, {std::string("error: ") + e.what()});
        throw;
    }
}

ResultPage LoggingBackend::fetch_page(const Query& query) const {
    try {
        auto page = inner_.fetch_page(query);
        auto diag = page.diagnostics;
        diag.push_back("page " + std::to_string(query.page) + ": " + std::to_string(page.ids.size()) + " ids");
        log_.record(query, page.hce, std::move(diag));
        return page;
    } catch (const BackendError& e) {
        log_.record(query, std::nullopt, {std::string("error: ") + e.what()});
        throw;
    }
}

std::optional<HitCountEstimate> LoggingBackend::recorded_aggregate(const Query& tmpl, YearRange span) const {
    auto h = inner_.recorded_aggregate(tmpl, span);
    if (h) log_.record(tmpl, h, {"replayed aggregate " + span.str()});
    return h;
}

}  // namespace indexsize
