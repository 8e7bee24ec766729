#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "smoothdiff/analysis.hpp"
#include "smoothdiff/sim.hpp"

namespace smoothdiff {

/// Shortest decimal text that parses back to the same double; "nan", "inf", "-inf".
std::string format_double(double v);

/// Stratum CSV: header row with `y`, `z`, optional `stratum`, and fixed-effect
/// columns prefixed `x_`; other columns are ignored. Errors name the line.
StratumData read_stratum_csv(std::istream& in, Family family, std::string_view source = "<input>");
StratumData read_stratum_csv(const std::filesystem::path& path, Family family);

/// Splits one CSV on its `stratum` column, which must hold exactly two labels.
/// The label seen first is the first stratum.
std::pair<StratumData, StratumData> read_strata_csv(std::istream& in, Family family,
                                                    std::string_view source = "<input>");
std::pair<StratumData, StratumData> read_strata_csv(const std::filesystem::path& path,
                                                    Family family);

/// Both strata in one file, labelled 1 and 2; values are written round-trip exact.
void write_strata_csv(std::ostream& out, const StratumData& first, const StratumData& second);

/// Flat `key = value` text; `#` starts a comment.
std::map<std::string, std::string> read_key_values(std::istream& in,
                                                   std::string_view source = "<input>");
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

std::string fits_json(const StrataComparison& cmp);
std::string report_json(const TdpReport& report);
/// Columns: k, region_lo, region_hi, T, p.
void write_windows_csv(std::ostream& out, const WindowTestSeries& series);
/// One row per (threshold, interval).
void write_regions_csv(std::ostream& out, const TdpReport& report);
/// Columns: z, fit1, se1, fit2, se2, diff, diff_se on an even grid over the domain.
void write_curves_csv(std::ostream& out, const StrataComparison& cmp, int points = 201);

std::string sim_outcome_json(const SimOutcome& outcome);
/// Columns: alpha, tdp_threshold, value, n_replicates, mc_se.
void write_table_csv(std::ostream& out, std::span<const TableCell> table);
/// Per replicate, alpha and threshold: plot-ready effect-size rows.
void write_replicates_csv(std::ostream& out, const SimOutcome& outcome);
void write_sweep_csv(std::ostream& out, const SimOutcome& outcome);
/// Alpha rows by threshold columns, for the terminal.
std::string format_table(std::span<const TableCell> table, std::string_view title);

void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace smoothdiff
