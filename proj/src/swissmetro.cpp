#include "hetlogit/swissmetro.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "hetlogit/errors.hpp"

namespace hetlogit {

namespace {

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

char detect_delimiter(const std::string& header) {
  if (header.find('\t') != std::string::npos) return '\t';
  if (header.find(',') != std::string::npos) return ',';
  if (header.find(';') != std::string::npos) return ';';
  return ' ';
}

// Canonical raw column -> accepted spellings (upper-cased).
const std::map<std::string, std::vector<std::string>>& raw_schema() {
  static const std::map<std::string, std::vector<std::string>> m{
      {"CHOICE", {"CHOICE", "CHOSEN"}},
      {"TRAIN_AV", {"TRAIN_AV", "AV_TRAIN", "TRAIN_AVAIL"}},
      {"SM_AV", {"SM_AV", "AV_SM", "SM_AVAIL", "SWISSMETRO_AV"}},
      {"CAR_AV", {"CAR_AV", "AV_CAR", "CAR_AVAIL"}},
      {"TRAIN_TT", {"TRAIN_TT", "TRAIN_TIME"}},
      {"TRAIN_CO", {"TRAIN_CO", "TRAIN_COST"}},
      {"TRAIN_HE", {"TRAIN_HE", "TRAIN_HEADWAY", "TRAIN_FREQ"}},
      {"SM_TT", {"SM_TT", "SM_TIME"}},
      {"SM_CO", {"SM_CO", "SM_COST"}},
      {"SM_HE", {"SM_HE", "SM_HEADWAY", "SM_FREQ"}},
      {"CAR_TT", {"CAR_TT", "CAR_TIME"}},
      {"CAR_CO", {"CAR_CO", "CAR_COST"}},
      {"GA", {"GA", "GA_PASS"}},
      {"AGE", {"AGE"}},
      {"INCOME", {"INCOME"}},
      {"MALE", {"MALE", "GENDER", "SEX"}},
      {"WHO", {"WHO"}},
      {"LUGGAGE", {"LUGGAGE"}},
  };
  return m;
}

// Columns of the canonical source that are read silently even though unused.
const std::set<std::string>& known_unused() {
  static const std::set<std::string> s{"GROUP", "SURVEY", "SP", "ID", "PURPOSE", "FIRST", "TICKET",
                                       "ORIGIN", "DEST", "SM_SEATS"};
  return s;
}

double parse_number(const std::string& tok, const std::string& source, std::size_t line, const std::string& col) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  if (!tok.empty() && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (tok.empty() || ec != std::errc() || ptr != e)
    throw DataError(source + ":" + std::to_string(line) + ": cannot parse '" + tok + "' in column " + col);
  return v;
}

ChoiceDataset empty_frame() {
  ChoiceDataset d;
  d.alternatives = kSwissmetroAlternatives;
  d.attributes = kSwissmetroAttributes;
  d.features = kSwissmetroFeatures;
  d.reference = 2;
  return d;
}

std::vector<std::string> cleaned_header() {
  std::vector<std::string> h{"choice"};
  for (const auto& a : kSwissmetroAlternatives)
    for (const auto& k : kSwissmetroAttributes) h.push_back(a + "_" + k);
  for (const auto& f : kSwissmetroFeatures) h.push_back(f);
  return h;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DataError("cannot format number");
  return std::string(buf, ptr);
}

struct RowBuffer {
  std::vector<int> choice;
  std::vector<Eigen::MatrixXd> x;
  std::vector<Eigen::VectorXd> w;
};

ChoiceDataset finish(RowBuffer& rows) {
  ChoiceDataset d = empty_frame();
  d.choice = std::move(rows.choice);
  d.x = std::move(rows.x);
  d.w.resize(static_cast<Eigen::Index>(rows.w.size()), static_cast<Eigen::Index>(kSwissmetroFeatures.size()));
  for (std::size_t i = 0; i < rows.w.size(); ++i) d.w.row(static_cast<Eigen::Index>(i)) = rows.w[i].transpose();
  d.validate();
  return d;
}

IngestResult read_cleaned(std::istream& in, const std::vector<std::string>& header, char delim,
                          const std::string& source) {
  const auto expected = cleaned_header();
  if (header != expected) throw DataError(source + ": cleaned frame header does not match the expected layout");
  IngestResult out;
  out.report.cleaned_input = true;
  RowBuffer rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tok = split(line, delim);
    if (tok.size() != expected.size())
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected.size()) +
                      " fields, found " + std::to_string(tok.size()));
    ++out.report.raw_rows;
    const auto alt = std::find(kSwissmetroAlternatives.begin(), kSwissmetroAlternatives.end(), tok[0]);
    if (alt == kSwissmetroAlternatives.end())
      throw DataError(source + ":" + std::to_string(line_no) + ": unknown alternative '" + tok[0] + "'");
    rows.choice.push_back(static_cast<int>(alt - kSwissmetroAlternatives.begin()));
    Eigen::MatrixXd x(3, 3);
    std::size_t c = 1;
    for (Eigen::Index j = 0; j < 3; ++j)
      for (Eigen::Index k = 0; k < 3; ++k, ++c) x(j, k) = parse_number(tok[c], source, line_no, expected[c]);
    Eigen::VectorXd w(static_cast<Eigen::Index>(kSwissmetroFeatures.size()));
    for (Eigen::Index f = 0; f < w.size(); ++f, ++c) w[f] = parse_number(tok[c], source, line_no, expected[c]);
    rows.x.push_back(std::move(x));
    rows.w.push_back(std::move(w));
  }
  out.data = finish(rows);
  return out;
}

}  // namespace

IngestResult ingest_swissmetro(std::istream& in, const std::string& source) {
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError(source + ": file is empty");
  const char delim = detect_delimiter(header_line);
  const auto header = split(header_line, delim);
  if (!header.empty() && header.front() == "choice" && header.size() > 1 && header[1] == "train_cost")
    return read_cleaned(in, header, delim, source);

  std::map<std::string, std::size_t> position;  // canonical -> column
  std::vector<std::string> unknown;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = upper(header[c]);
    bool matched = false;
    for (const auto& [canon, spellings] : raw_schema()) {
      if (std::find(spellings.begin(), spellings.end(), name) != spellings.end()) {
        if (!position.count(canon)) position[canon] = c;
        matched = true;
        break;
      }
    }
    if (!matched && !known_unused().count(name)) unknown.push_back(header[c]);
  }
  std::vector<std::string> missing;
  for (const auto& [canon, spellings] : raw_schema())
    if (!position.count(canon)) missing.push_back(canon);
  if (!missing.empty()) {
    std::string msg = source + ": missing required columns:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }

  IngestResult out;
  if (!unknown.empty()) {
    std::string msg = "ignored unknown columns:";
    for (const auto& u : unknown) msg += " " + u;
    out.report.warnings.push_back(msg);
  }
  RowBuffer rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tok = split(line, delim);
    if (tok.size() < header.size())
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(tok.size()));
    ++out.report.raw_rows;
    auto get = [&](const std::string& canon) {
      const std::size_t c = position.at(canon);
      return parse_number(tok[c], source, line_no, header[c]);
    };
    if (get("TRAIN_AV") != 1.0 || get("SM_AV") != 1.0 || get("CAR_AV") != 1.0) {
      ++out.report.dropped_unavailable;
      continue;
    }
    const double choice = get("CHOICE");
    if (choice == 0.0) {
      ++out.report.dropped_no_choice;
      continue;
    }
    if (choice != 1.0 && choice != 2.0 && choice != 3.0)
      throw DataError(source + ":" + std::to_string(line_no) + ": CHOICE must be 0, 1, 2 or 3");
    const bool ga = get("GA") == 1.0;
    Eigen::MatrixXd x(3, 3);
    x << (ga ? 0.0 : get("TRAIN_CO") / 100.0), get("TRAIN_HE") / 100.0, get("TRAIN_TT") / 100.0,
        (ga ? 0.0 : get("SM_CO") / 100.0), get("SM_HE") / 100.0, get("SM_TT") / 100.0,
        get("CAR_CO") / 100.0, 0.0, get("CAR_TT") / 100.0;
    const double who = get("WHO");
    if (who != 0.0 && who != 1.0 && who != 2.0 && who != 3.0)
      throw DataError(source + ":" + std::to_string(line_no) + ": WHO must be 0, 1, 2 or 3");
    Eigen::VectorXd w(7);
    w << get("AGE"), get("INCOME"), get("MALE"), who == 1.0 ? 1.0 : 0.0, who == 2.0 ? 1.0 : 0.0,
        who == 3.0 ? 1.0 : 0.0, get("LUGGAGE");
    rows.choice.push_back(static_cast<int>(choice) - 1);
    rows.x.push_back(std::move(x));
    rows.w.push_back(std::move(w));
  }
  out.data = finish(rows);
  return out;
}

IngestResult ingest_swissmetro(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return ingest_swissmetro(in, path);
}

void write_cleaned_csv(std::ostream& out, const ChoiceDataset& data) {
  if (data.alternatives != kSwissmetroAlternatives || data.attributes != kSwissmetroAttributes ||
      data.features != kSwissmetroFeatures)
    throw DataError("only Swissmetro frames can be written in the cleaned layout");
  const auto header = cleaned_header();
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.alternatives[static_cast<std::size_t>(data.choice[i])];
    for (Eigen::Index j = 0; j < 3; ++j)
      for (Eigen::Index k = 0; k < 3; ++k) out << ',' << format_number(data.x[i](j, k));
    for (Eigen::Index f = 0; f < data.w.cols(); ++f) out << ',' << format_number(data.w(static_cast<Eigen::Index>(i), f));
    out << '\n';
  }
}

void write_data_dictionary(std::ostream& out, const ChoiceDataset& data) {
  out << "# Data dictionary\n\n";
  out << "Rows: " << data.size() << "\n\n";
  out << "Alternatives (reference " << data.alternatives[data.reference] << "):";
  for (const auto& a : data.alternatives) out << ' ' << a;
  out << "\n\nAttributes are divided by 100; cost is 0 for GA holders on train and sm; car freq is 0.\n\n";
  out << "| column | min | max | mean |\n|---|---|---|---|\n";
  for (Eigen::Index f = 0; f < data.w.cols(); ++f) {
    const auto col = data.w.col(f);
    out << "| " << data.features[static_cast<std::size_t>(f)] << " | " << col.minCoeff() << " | " << col.maxCoeff()
        << " | " << col.mean() << " |\n";
  }
  out << "\nage and income enter the simulation formulas as their raw category codes.\n";
  std::vector<std::size_t> shares(data.num_alternatives(), 0);
  for (int c : data.choice) ++shares[static_cast<std::size_t>(c)];
  out << "\n| choice | count |\n|---|---|\n";
  for (std::size_t j = 0; j < shares.size(); ++j) out << "| " << data.alternatives[j] << " | " << shares[j] << " |\n";
}

}  // namespace hetlogit
