#pragma once

#include "vmem/cluster.hpp"
#include "vmem/estimate.hpp"
#include "vmem/factor.hpp"
#include "vmem/model.hpp"

#include "json.hpp"

#include <filesystem>

namespace vmem {

using Json = nlohmann::ordered_json;

/// Group maps are written as ticker -> group objects.
Json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const Json& j);

/// m is not stored; it is rebuilt from V.
Json to_json(const ParamSet& params);
ParamSet params_from_json(const Json& j);

Json to_json(const FitResult& fit);
FitResult fit_from_json(const Json& j);

/// Scores are not stored; factor_from_json recomputes them on `panel`.
Json to_json(const PcFactor& factor, const std::vector<std::string>& tickers);
PcFactor factor_from_json(const Json& j, const VolatilityPanel& panel);

Json to_json(const Partition& partition);
Json to_json(const Dendrogram& dendrogram);

/// Non-finite numbers are written as null and read back as NaN.
Json number(double value);
double number_from(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace vmem
