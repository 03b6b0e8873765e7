#pragma once

// JSON and CSV emission for harness reports.
//
// JSON output is canonical: object keys sorted, two-space indent, doubles in
// shortest round-trip form. CSV tables use one row per method and one column
// per metric.

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "promix/harness.hpp"

namespace promix {

using Json = nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

std::string canonical_dump(const Json& value);
// FNV-1a of the canonical dump, as 16 hex digits.
std::string config_hash(const Json& config);

Json to_json(const SplitMetrics& m);
Json to_json(const LossConfig& loss);
Json to_json(const MixtureWeightSummary& w);
Json to_json(const TTestOutcome& outcome);
Json to_json(const SubsetAccuracy& acc);
Json to_json(const CategoryCounts& counts);
Json to_json(const WeightFitResult& fit);

Json to_json(const BaseToNewReport& report);
Json to_json(const FscilReport& report);
Json to_json(const AssumptionReport& report);
Json to_json(const ConfusingGainReport& report);
Json to_json(const BoundSweepReport& report);
Json to_json(const std::vector<LossZooRow>& rows);

// Method,Base,New,H
std::string base_to_new_csv(const BaseToNewReport& report);
// Method,S1..Sn,Mean,PD
std::string fscil_csv(const FscilReport& report);
// Loss,Base,New,H
std::string loss_zoo_csv(const std::vector<LossZooRow>& rows);
// run,epoch,easy,confusing,hard,all
std::string confusing_curve_csv(const ConfusingGainReport& report);

}  // namespace promix
