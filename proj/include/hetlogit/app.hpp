#ifndef HETLOGIT_APP_HPP
#define HETLOGIT_APP_HPP

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hetlogit/config.hpp"
#include "hetlogit/swissmetro.hpp"

// Pipelines behind the command-line subcommands. Each configured run writes
// into run.output: the resolved config (config.ini), a manifest with the
// command, seed and input hash, and its result files. Progress goes to `log`.
namespace hetlogit::app {

// Lower-case hex SHA-256 of a file's bytes. Throws DataError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

// Ingests `raw` and writes the cleaned frame to `out` plus a data dictionary
// next to it (<stem>_dictionary.md).
IngestReport prepare(const std::string& raw, const std::string& out, std::ostream& log);

// Monte Carlo experiment: mean_table.csv, median_table.csv, tstats.csv,
// raw_records.csv and report.md.
void mc_run(const ConfigValues& values, std::ostream& log);

// Application: seeded row split; conditional logits, the influence-function
// estimator and the naive network on the training rows. Writes estimates.csv,
// log_likelihood.csv, coefficients_test.csv, logit report CSVs and report.md.
void estimate(const ConfigValues& values, std::ostream& log);

// Own and cross travel-time elasticities at the mean attributes:
// elasticities.csv and elasticities.md.
void elasticities(const ConfigValues& values, std::ostream& log);

}  // namespace hetlogit::app

#endif  // HETLOGIT_APP_HPP
