#include "indexsize/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "indexsize/errors.hpp"

namespace indexsize {

namespace {

std::vector<DocId> sorted_unique(std::span<const DocId> ids) {
    std::vector<DocId> v(ids.begin(), ids.end());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::size_t intersection_size(const std::vector<DocId>& a, const std::vector<DocId>& b) {
    std::size_t n = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) ++i;
        else if (*j < *i) ++j;
        else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

void check_fraction(double v, double lo, bool lo_open, double hi, bool hi_open, const char* field) {
    const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
    if (!ok) throw ValidationError(field, "out of range: " + std::to_string(v));
}

}  // namespace

Count round_half_up(long double x) { return static_cast<Count>(std::floor(x + 0.5L)); }

void CaptureRecaptureInput::validate() const {
    if (M < 0) throw ValidationError("M", "must be non-negative");
    if (C < 0) throw ValidationError("C", "must be non-negative");
    if (R < 0) throw ValidationError("R", "must be non-negative");
    if (R > std::min(M, C)) throw ValidationError("R", "recaptures cannot exceed min(M, C)");
}

CaptureRecaptureInput CaptureRecaptureInput::from_sets(std::span<const DocId> a, std::span<const DocId> b) {
    const auto sa = sorted_unique(a);
    const auto sb = sorted_unique(b);
    return {static_cast<Count>(sa.size()), static_cast<Count>(sb.size()),
            static_cast<Count>(intersection_size(sa, sb))};
}

std::string_view to_string(OverlapKind k) {
    switch (k) {
        case OverlapKind::jaccard: return "jaccard";
        case OverlapKind::containment_in_a: return "containment-in-A";
        case OverlapKind::containment_in_b: return "containment-in-B";
    }
    return "jaccard";
}

OverlapKind parse_overlap_kind(std::string_view s) {
    if (s == "jaccard") return OverlapKind::jaccard;
    if (s == "containment-in-A") return OverlapKind::containment_in_a;
    if (s == "containment-in-B") return OverlapKind::containment_in_b;
    throw ValidationError("overlap", "unknown overlap kind '" + std::string(s) + "'");
}

OverlapStatistic overlap(std::span<const DocId> a, std::span<const DocId> b, OverlapKind kind) {
    const auto sa = sorted_unique(a);
    const auto sb = sorted_unique(b);
    const auto inter = intersection_size(sa, sb);
    std::size_t denom = 0;
    switch (kind) {
        case OverlapKind::jaccard: denom = sa.size() + sb.size() - inter; break;
        case OverlapKind::containment_in_a: denom = sa.size(); break;
        case OverlapKind::containment_in_b: denom = sb.size(); break;
    }
    if (denom == 0) return {kind, 0.0, true};
    return {kind, static_cast<double>(inter) / static_cast<double>(denom), false};
}

OverlapStatistic jaccard(std::span<const DocId> a, std::span<const DocId> b) {
    return overlap(a, b, OverlapKind::jaccard);
}

nlohmann::json EstimateResult::to_json() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& [k, v] : inputs) in.push_back({{"name", k}, {"value", v}});
    nlohmann::json alt = nlohmann::json::array();
    for (const auto& [k, v] : alternatives) alt.push_back({{"name", k}, {"value", v}});
    return {{"method", method},       {"estimate", estimate}, {"inputs", in},
            {"diagnostics", diagnostics}, {"alternatives", alt}, {"provenance", provenance}};
}

EstimateResult EstimateResult::from_json(const nlohmann::json& j) {
    EstimateResult r;
    r.method = j.at("method").get<std::string>();
    r.estimate = j.at("estimate").get<Count>();
    for (const auto& e : j.at("inputs")) r.inputs.emplace_back(e.at("name").get<std::string>(), e.at("value").get<double>());
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    for (const auto& e : j.at("alternatives"))
        r.alternatives.emplace_back(e.at("name").get<std::string>(), e.at("value").get<Count>());
    r.provenance = j.at("provenance").get<std::string>();
    return r;
}

EstimateResult lincoln_petersen(const CaptureRecaptureInput& in) {
    in.validate();
    if (in.R == 0) throw UndefinedEstimateError("Lincoln-Petersen undefined: no recaptures, population unbounded");
    const long double m = in.M, c = in.C, r = in.R;
    EstimateResult res;
    res.method = "lincoln-petersen";
    res.estimate = round_half_up(m * c / r);
    res.inputs = {{"M", static_cast<double>(in.M)}, {"C", static_cast<double>(in.C)}, {"R", static_cast<double>(in.R)}};
    res.alternatives.emplace_back("chapman", round_half_up((m + 1) * (c + 1) / (r + 1) - 1));
    res.diagnostics.push_back("population under LP assumptions: closed population, independent samples, equal catchability");
    if (in.R == std::min(in.M, in.C)) res.diagnostics.push_back("complete recapture of the smaller sample");
    return res;
}

EstimateResult khabsa_giles_estimate(Count c, const OverlapStatistic& ov) {
    if (c < 0) throw ValidationError("C", "must be non-negative");
    if (ov.degenerate || !(ov.value > 0.0))
        throw UndefinedEstimateError("overlap-based estimate undefined: zero overlap");
    if (ov.value > 1.0) throw ValidationError("overlap", "must be <= 1");
    EstimateResult res;
    res.method = "overlap-isolation";
    // whole documents only: the fractional part is dropped, not rounded
    const long double q = static_cast<long double>(c) / static_cast<long double>(ov.value);
    res.estimate = static_cast<Count>(std::floor(q + 1e-6L));
    res.inputs = {{"C", static_cast<double>(c)}, {"overlap", ov.value}};
    res.diagnostics.push_back("overlap statistic: " + std::string(to_string(ov.kind)));
    return res;
}

Count english_correction(Count raw, double factor) {
    if (raw < 0) throw ValidationError("raw", "must be non-negative");
    check_fraction(factor, 0.0, true, 1.0, false, "factor");
    return round_half_up(static_cast<long double>(raw) * static_cast<long double>(factor));
}

void RatioModel::validate() const {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("factor", "must be positive");
    if (wos_size < 0) throw ValidationError("wos_size", "must be non-negative");
    check_fraction(wos_english_share, 0.0, false, 1.0, false, "wos_english_share");
    check_fraction(gs_english_share, 0.0, false, 1.0, false, "gs_english_share");
}

EstimateResult ratio_project(const RatioModel& model) {
    model.validate();
    EstimateResult res;
    res.method = "ratio-projection";
    res.estimate = round_half_up(static_cast<long double>(model.factor) * static_cast<long double>(model.wos_size));
    res.inputs = {{"factor", model.factor}, {"wos_size", static_cast<double>(model.wos_size)}};
    return res;
}

namespace {

std::pair<Count, Count> split(Count total, double share) {
    Count e = round_half_up(static_cast<long double>(total) * share);
    Count o = round_half_up(static_cast<long double>(total) * (1.0L - share));
    const Count gap = total - (e + o);
    if (gap != 0) (e >= o ? e : o) += gap;
    return {e, o};
}

}  // namespace

LanguageSplit language_decompose(const RatioModel& model, std::optional<Count> gs_total) {
    model.validate();
    LanguageSplit s;
    s.gs = gs_total ? *gs_total : ratio_project(model).estimate;
    if (s.gs < 0) throw ValidationError("gs_total", "must be non-negative");
    s.wos = model.wos_size;
    std::tie(s.gs_english, s.gs_other) = split(s.gs, model.gs_english_share);
    std::tie(s.wos_english, s.wos_other) = split(s.wos, model.wos_english_share);
    return s;
}

Count scale_by_english_share(Count english_estimate, double share) {
    if (english_estimate < 0) throw ValidationError("english_estimate", "must be non-negative");
    check_fraction(share, 0.0, true, 1.0, false, "share");
    return round_half_up(static_cast<long double>(english_estimate) / static_cast<long double>(share));
}

Count error_adjust(Count value, double error_rate) {
    if (value < 0) throw ValidationError("value", "must be non-negative");
    check_fraction(error_rate, 0.0, false, 1.0, true, "error_rate");
    return round_half_up(static_cast<long double>(value) * (1.0L - static_cast<long double>(error_rate)));
}

}  // namespace indexsize
