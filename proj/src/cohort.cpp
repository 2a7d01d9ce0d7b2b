#include "segrank/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "segrank/csv.hpp"

namespace segrank::cohort {

std::string sr_method_name(SrMethod method) {
    return method == SrMethod::MialSr ? "mialSR" : "IRTK";
}

std::string quality_name(Quality quality) {
    switch (quality) {
    case Quality::Excellent:
        return "Excellent";
    case Quality::Good:
        return "Good";
    default:
        return "Poor";
    }
}

std::string split_name(Split split) {
    return split == Split::Train ? "train" : "test";
}

SrMethod parse_sr_method(const std::string& text) {
    if (text == "mialSR")
        return SrMethod::MialSr;
    if (text == "IRTK")
        return SrMethod::Irtk;
    throw ParseError("unknown SR method: " + text);
}

Quality parse_quality(const std::string& text) {
    if (text == "Excellent")
        return Quality::Excellent;
    if (text == "Good")
        return Quality::Good;
    if (text == "Poor")
        return Quality::Poor;
    throw ParseError("unknown quality level: " + text);
}

Split parse_split(const std::string& text) {
    if (text == "train")
        return Split::Train;
    if (text == "test")
        return Split::Test;
    throw ParseError("unknown split: " + text);
}

const CaseMeta* Manifest::find(const std::string& case_id) const {
    for (const auto& meta : cases)
        if (meta.case_id == case_id)
            return &meta;
    return nullptr;
}

namespace {

bool parse_flag(const std::string& text) {
    if (text == "1" || text == "true" || text == "True")
        return true;
    if (text == "0" || text == "false" || text == "False")
        return false;
    throw ParseError("expected a boolean, got: " + text);
}

void finish_case(CaseMeta& meta, Manifest& manifest, std::set<std::string>& seen) {
    if (meta.case_id.empty())
        throw ParseError("manifest row without a case_id");
    if (!seen.insert(meta.case_id).second)
        throw DuplicateCase("duplicate case_id: " + meta.case_id);
    if (meta.ga_weeks < 20.0 || meta.ga_weeks > 40.0)
        throw ParseError("gestational age out of range for " + meta.case_id + ": " +
                         csv::fmt_double(meta.ga_weeks));
    if (meta.ga_weeks > 35.0)
        manifest.warnings.push_back("case " + meta.case_id + " gestational age " +
                                    csv::fmt_double(meta.ga_weeks) +
                                    " outside the 20-35 week envelope");
    if (!meta.ratings.empty()) {
        std::vector<int> levels;
        for (Quality q : meta.ratings)
            levels.push_back(static_cast<int>(q));
        meta.quality = static_cast<Quality>(stats::median_ordinal(levels));
    }
    manifest.cases.push_back(std::move(meta));
}

Manifest from_table(const csv::Table& table) {
    auto require = [&](const std::string& name) {
        try {
            return table.column(name);
        } catch (const SchemaError& e) {
            throw ParseError(e.what());
        }
    };
    const int col_id = require("case_id");
    const int col_ga = require("ga_weeks");
    const int col_path = require("pathological");
    const int col_sr = require("sr_method");
    const int col_split = require("split");
    std::vector<int> rater_cols;
    for (int r = 1; r <= 3; ++r) {
        const std::string name = "quality_r" + std::to_string(r);
        if (std::find(table.header.begin(), table.header.end(), name) != table.header.end())
            rater_cols.push_back(require(name));
    }

    Manifest manifest;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        CaseMeta meta;
        meta.case_id = row[static_cast<std::size_t>(col_id)];
        meta.ga_weeks = csv::parse_double(row[static_cast<std::size_t>(col_ga)]);
        meta.pathological = parse_flag(row[static_cast<std::size_t>(col_path)]);
        meta.sr_method = parse_sr_method(row[static_cast<std::size_t>(col_sr)]);
        meta.split = parse_split(row[static_cast<std::size_t>(col_split)]);
        for (int col : rater_cols) {
            const auto& cell = row[static_cast<std::size_t>(col)];
            if (!cell.empty())
                meta.ratings.push_back(parse_quality(cell));
        }
        finish_case(meta, manifest, seen);
    }
    if (manifest.cases.empty())
        throw ParseError("manifest lists no cases");
    return manifest;
}

} // namespace

Manifest manifest_from_csv_text(const std::string& text) {
    return from_table(csv::read_csv_text(text));
}

Manifest manifest_from_json_text(const std::string& text) {
    const auto parsed = nlohmann::json::parse(text, nullptr, false);
    if (parsed.is_discarded())
        throw ParseError("manifest is not valid JSON");
    const nlohmann::json* rows = &parsed;
    if (parsed.is_object()) {
        if (!parsed.contains("cases"))
            throw ParseError("JSON manifest object lacks a cases array");
        rows = &parsed.at("cases");
    }
    if (!rows->is_array())
        throw ParseError("JSON manifest must be an array of cases");

    Manifest manifest;
    std::set<std::string> seen;
    for (const auto& row : *rows) {
        if (!row.is_object())
            throw ParseError("JSON manifest entries must be objects");
        CaseMeta meta;
        try {
            meta.case_id = row.at("case_id").get<std::string>();
            meta.ga_weeks = row.at("ga_weeks").get<double>();
            const auto& flag = row.at("pathological");
            meta.pathological =
                flag.is_boolean() ? flag.get<bool>() : parse_flag(flag.get<std::string>());
            meta.sr_method = parse_sr_method(row.at("sr_method").get<std::string>());
            meta.split = parse_split(row.at("split").get<std::string>());
            for (int r = 1; r <= 3; ++r) {
                const std::string key = "quality_r" + std::to_string(r);
                if (row.contains(key) && !row.at(key).is_null()) {
                    const auto cell = row.at(key).get<std::string>();
                    if (!cell.empty())
                        meta.ratings.push_back(parse_quality(cell));
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("JSON manifest field error: ") + e.what());
        }
        finish_case(meta, manifest, seen);
    }
    if (manifest.cases.empty())
        throw ParseError("manifest lists no cases");
    return manifest;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoFailure("cannot open manifest: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '['))
        return manifest_from_json_text(text);
    return manifest_from_csv_text(text);
}

std::optional<GaBand> ga_band_of(double ga_weeks) {
    const double week = std::floor(ga_weeks);
    if (week >= 21.0 && week <= 28.0)
        return GaBand::Young;
    if (week >= 29.0 && week <= 35.0)
        return GaBand::Old;
    return std::nullopt;
}

std::vector<std::string> filter_cases(const Manifest& manifest, const CasePredicate& predicate) {
    std::vector<std::string> out;
    for (const auto& meta : manifest.cases) {
        if (predicate.pathological && meta.pathological != *predicate.pathological)
            continue;
        if (predicate.sr_method && meta.sr_method != *predicate.sr_method)
            continue;
        if (predicate.quality && meta.quality != *predicate.quality)
            continue;
        if (predicate.ga_band && ga_band_of(meta.ga_weeks) != *predicate.ga_band)
            continue;
        if (predicate.split && meta.split != *predicate.split)
            continue;
        out.push_back(meta.case_id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

stats::KsResult compare_splits(const Manifest& manifest, CaseAttribute attribute) {
    std::vector<double> train, test;
    for (const auto& meta : manifest.cases) {
        const double value = attribute == CaseAttribute::GaWeeks
                                 ? meta.ga_weeks
                                 : (meta.pathological ? 1.0 : 0.0);
        (meta.split == Split::Train ? train : test).push_back(value);
    }
    if (train.empty() || test.empty())
        throw EmptySplit("both train and test cases are required");
    return stats::ks_two_sample(train, test);
}

} // namespace segrank::cohort
