#pragma once

#include <optional>
#include <string>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/nifti.hpp"
#include "segrank/stats.hpp"

namespace segrank::cohort {

enum class SrMethod { MialSr, Irtk };
enum class Quality { Excellent = 0, Good = 1, Poor = 2 };
enum class Split { Train, Test };
enum class GaBand { Young, Old };

std::string sr_method_name(SrMethod method);
std::string quality_name(Quality quality);
std::string split_name(Split split);
SrMethod parse_sr_method(const std::string& text);
Quality parse_quality(const std::string& text);
Split parse_split(const std::string& text);

struct CaseMeta {
    std::string case_id;
    double ga_weeks = 0.0;
    bool pathological = false;
    SrMethod sr_method = SrMethod::MialSr;
    /// Raw per-rater ordinal levels, kept for agreement analysis.
    std::vector<Quality> ratings;
    /// Median rating when any rater scored the case.
    std::optional<Quality> quality;
    Split split = Split::Test;
};

struct Manifest {
    std::vector<CaseMeta> cases;
    io::LabelScheme scheme = io::LabelScheme::fetal_tissue_default();
    /// Soft validation notes (gestational ages outside the usual envelope).
    std::vector<std::string> warnings;

    const CaseMeta* find(const std::string& case_id) const;
};

/// Reads a case manifest from CSV or JSON (sniffed from the content).
/// Columns: case_id, ga_weeks, pathological, sr_method,
/// quality_r1..quality_r3 (each may be blank), split.
Manifest load_manifest(const std::string& path);
Manifest manifest_from_csv_text(const std::string& text);
Manifest manifest_from_json_text(const std::string& text);

/// All absent fields match everything; present fields must all match.
struct CasePredicate {
    std::optional<bool> pathological;
    std::optional<SrMethod> sr_method;
    std::optional<Quality> quality;
    std::optional<GaBand> ga_band;
    std::optional<Split> split;
};

/// Gestational-age band by floor week: Young is weeks 21-28, Old is 29-35.
std::optional<GaBand> ga_band_of(double ga_weeks);

std::vector<std::string> filter_cases(const Manifest& manifest, const CasePredicate& predicate);

enum class CaseAttribute { GaWeeks, Pathological };

/// Two-sample KS comparison of one attribute between train and test cases.
stats::KsResult compare_splits(const Manifest& manifest, CaseAttribute attribute);

} // namespace segrank::cohort
