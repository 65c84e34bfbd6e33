#ifndef HETLOGIT_SWISSMETRO_HPP
#define HETLOGIT_SWISSMETRO_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hetlogit/dataset.hpp"

namespace hetlogit {

// Layout of the cleaned frame: alternatives (train, sm, car) with car the
// reference; attributes (cost, freq, time); socio-demographics below.
inline const std::vector<std::string> kSwissmetroAlternatives{"train", "sm", "car"};
inline const std::vector<std::string> kSwissmetroAttributes{"cost", "freq", "time"};
inline const std::vector<std::string> kSwissmetroFeatures{"age", "income", "male", "who1", "who2", "who3", "luggage"};
// Inputs of the simulation networks and of the application networks.
inline const std::vector<std::string> kSimulationFeatures{"age", "income", "male", "who1", "who2", "who3"};
inline const std::vector<std::string> kApplicationFeatures{"age", "income", "who1", "who2", "who3", "luggage"};

struct IngestReport {
  std::size_t raw_rows = 0;
  std::size_t dropped_unavailable = 0;  // not all three alternatives available
  std::size_t dropped_no_choice = 0;    // available to all but CHOICE = 0
  std::vector<std::string> warnings;
  bool cleaned_input = false;  // the file was already a cleaned frame
};

struct IngestResult {
  ChoiceDataset data;
  IngestReport report;
};

// Reads either the raw survey file (tab, comma or whitespace delimited, header
// names matched case-insensitively through a synonym table) or a cleaned frame
// written by write_cleaned_csv. Raw rows are kept when all three alternatives
// are available and a choice is recorded; times, costs and headways are divided
// by 100, train and Swissmetro costs are zero for GA holders, car frequency is 0
// and WHO becomes three dummies with category 0 as reference.
// Throws DataError on missing columns or unparsable rows (with line numbers).
IngestResult ingest_swissmetro(const std::string& path);
IngestResult ingest_swissmetro(std::istream& in, const std::string& source_name = "<stream>");

// Cleaned frame CSV: choice then <alt>_<attribute> columns then features.
void write_cleaned_csv(std::ostream& out, const ChoiceDataset& data);

// Rows, columns and value counts of the cleaned data, for a data dictionary.
void write_data_dictionary(std::ostream& out, const ChoiceDataset& data);

}  // namespace hetlogit

#endif  // HETLOGIT_SWISSMETRO_HPP
