#pragma once

// Size estimators: capture-recapture, overlap-based isolation and GS/WoS ratio
// projection with its language split. All functions are pure.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "indexsize/universe.hpp"

namespace indexsize {

/// Half-up rounding to a whole document count.
Count round_half_up(long double x);

struct CaptureRecaptureInput {
    Count M = 0;  // first index
    Count C = 0;  // second index
    Count R = 0;  // recaptured

    /// Non-negative counts with R <= min(M, C).
    void validate() const;
    /// M = |A|, C = |B|, R = |A ∩ B| over de-duplicated id sets.
    static CaptureRecaptureInput from_sets(std::span<const DocId> a, std::span<const DocId> b);
};

enum class OverlapKind { jaccard, containment_in_a, containment_in_b };

std::string_view to_string(OverlapKind k);
OverlapKind parse_overlap_kind(std::string_view s);

struct OverlapStatistic {
    OverlapKind kind = OverlapKind::jaccard;
    double value = 0.0;
    bool degenerate = false;  // denominator was empty; value reported as 0
};

/// |A∩B| / |A∪B|. Inputs need not be sorted or unique.
OverlapStatistic jaccard(std::span<const DocId> a, std::span<const DocId> b);
/// Containment in A is |A∩B| / |A|, in B |A∩B| / |B|.
OverlapStatistic overlap(std::span<const DocId> a, std::span<const DocId> b, OverlapKind kind);

struct EstimateResult {
    std::string method;
    Count estimate = 0;
    std::vector<std::pair<std::string, double>> inputs;
    std::vector<std::string> diagnostics;
    std::vector<std::pair<std::string, Count>> alternatives;
    std::string provenance;

    nlohmann::json to_json() const;
    static EstimateResult from_json(const nlohmann::json& j);
    bool operator==(const EstimateResult&) const = default;
};

/// N = M*C/R; the Chapman variant goes to alternatives.
/// Throws UndefinedEstimateError when R == 0.
EstimateResult lincoln_petersen(const CaptureRecaptureInput& input);

/// N = C / overlap. Throws UndefinedEstimateError on zero overlap.
EstimateResult khabsa_giles_estimate(Count c, const OverlapStatistic& overlap);

/// round(raw * factor), factor in (0, 1].
Count english_correction(Count raw, double factor);

struct RatioModel {
    double factor = 3.0;
    Count wos_size = 0;
    double wos_english_share = 0.9;
    double gs_english_share = 0.65;

    void validate() const;
};

/// GS = factor * WoS.
EstimateResult ratio_project(const RatioModel& model);

struct LanguageSplit {
    Count gs = 0, gs_english = 0, gs_other = 0;
    Count wos = 0, wos_english = 0, wos_other = 0;
};

/// Splits both totals by their English share. Each pair sums back to its total
/// exactly; a rounding mismatch is absorbed by the larger component. The GS
/// total defaults to ratio_project(model).
LanguageSplit language_decompose(const RatioModel& model, std::optional<Count> gs_total = std::nullopt);

/// round(english / share), share in (0, 1].
Count scale_by_english_share(Count english_estimate, double share);

/// round(value * (1 - rate)), rate in [0, 1).
Count error_adjust(Count value, double error_rate);

}  // namespace indexsize
