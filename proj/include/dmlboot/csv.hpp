#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dmlboot/core.hpp"

namespace dmlboot {

/// Load a dataset from a simple CSV file (header row, comma-separated
/// numeric fields, no quoting). Column roles are assigned by name; an empty
/// covariate list means "every column that is not outcome or treatment".
/// Throws FileIoError / InvalidSpecError on unreadable or malformed input.
std::shared_ptr<const Dataset> load_dataset_csv(
    const std::string& path, const std::string& outcome,
    const std::optional<std::string>& treatment = std::nullopt,
    std::vector<std::string> covariates = {});

/// Write a dataset back out as CSV with its schema's column names.
void write_dataset_csv(const Dataset& data, std::ostream& os);

}  // namespace dmlboot
