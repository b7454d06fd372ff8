#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "triagenet/record.hpp"

namespace triagenet {

// Cohort CSV: UTF-8, one visit per row, fixed column order, empty cell =
// missing, booleans as 0/1, enums as canonical snake_case tokens, comorbidity
// sets as semicolon-joined tokens ("no_comorbidities" when empty). Lines
// starting with '#' before the header carry provenance and are ignored on
// read. This file format is the interchange contract for every CLI command.

/// The header row, in order.
const std::vector<std::string>& cohort_csv_columns();

/// One serialized row (no trailing newline); used by commands that append
/// extra columns to cohort rows.
std::string record_to_csv_row(const PatientRecord& r);

void write_cohort_csv(std::ostream& out, std::span<const PatientRecord> records,
                      std::span<const std::string> comment_lines = {});
void write_cohort_csv(const std::filesystem::path& path, std::span<const PatientRecord> records,
                      std::span<const std::string> comment_lines = {});

/// Throws ValidationError (with a line number) on malformed input.
std::vector<PatientRecord> read_cohort_csv(std::istream& in);
std::vector<PatientRecord> read_cohort_csv(const std::filesystem::path& path);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

} // namespace triagenet
