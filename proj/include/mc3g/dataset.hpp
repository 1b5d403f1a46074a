#ifndef MC3G_DATASET_HPP
#define MC3G_DATASET_HPP

#include <algorithm>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mc3g/csv.hpp"
#include "mc3g/error.hpp"
#include "mc3g/schema.hpp"

namespace mc3g {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Schema documents

inline std::vector<Feature> parse_schema_features(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("features")) throw ParseError("schema object lacks 'features'");
    list = &doc.at("features");
  }
  if (!list->is_array()) throw ParseError("schema must be a list of features");

  std::vector<Feature> features;
  for (const auto& item : *list) {
    if (!item.is_object()) throw ParseError("schema entry is not an object");
    Feature f;
    try {
      f.name = item.at("name").get<std::string>();
      f.kind = parse_feature_kind(item.at("kind").get<std::string>());
      const auto& domain = item.at("domain");
      if (!domain.is_array()) throw ParseError("domain of '" + f.name + "' is not a list");
      if (f.kind == FeatureKind::numeric) {
        if (domain.size() != 2 || !domain[0].is_number() || !domain[1].is_number())
          throw ParseError("numeric domain of '" + f.name + "' must be [lo, hi]");
        f.lo = domain[0].get<double>();
        f.hi = domain[1].get<double>();
      } else {
        for (const auto& level : domain) {
          if (level.is_string())
            f.levels.push_back(level.get<std::string>());
          else if (level.is_number())
            f.levels.push_back(format_number(level.get<double>()));
          else
            throw ParseError("level of '" + f.name + "' is neither text nor number");
        }
      }
      f.actionable = item.value("actionable", true);
      f.weight = item.value("weight", 1.0);
      if (item.contains("norm_range") && !item.at("norm_range").is_null())
        f.norm_range = item.at("norm_range").get<double>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("schema: ") + e.what());
    }
    features.push_back(std::move(f));
  }
  return features;
}

inline std::vector<Feature> parse_schema_features(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  return parse_schema_features(doc);
}

inline SchemaPtr load_schema(std::istream& in) { return make_schema(parse_schema_features(in)); }

inline ordered_json schema_to_json(const Schema& schema) {
  ordered_json list = ordered_json::array();
  for (const auto& f : schema.features()) {
    ordered_json item;
    item["name"] = f.name;
    item["kind"] = std::string(to_string(f.kind));
    if (f.kind == FeatureKind::numeric)
      item["domain"] = {f.lo, f.hi};
    else
      item["domain"] = f.levels;
    item["actionable"] = f.actionable;
    item["weight"] = f.weight;
    if (f.norm_range) item["norm_range"] = *f.norm_range;
    list.push_back(std::move(item));
  }
  return list;
}

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
  SchemaPtr schema;
  std::vector<State> rows;
  std::optional<std::vector<std::string>> labels;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

// Numeric features without a declared norm_range get max - min of `values`.
template <class Rows>
void set_observed_ranges(std::vector<Feature>& features, const Rows& values) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& f = features[i];
    f.observed_range.reset();
    if (f.kind != FeatureKind::numeric || f.norm_range || std::empty(values)) continue;
    double lo = std::data(*std::begin(values))[i], hi = lo;
    for (const auto& v : values) {
      lo = std::min(lo, std::data(v)[i]);
      hi = std::max(hi, std::data(v)[i]);
    }
    if (hi > lo) f.observed_range = hi - lo;
  }
}

// Rebinds the rows to a schema whose scales come from the rows themselves,
// as if the dataset had been read back from CSV.
inline void normalize_by_rows(Dataset& data) {
  auto features = data.schema->features();
  std::vector<std::span<const double>> values;
  for (const auto& r : data.rows) values.push_back(r.values());
  set_observed_ranges(features, values);
  auto schema = make_schema(std::move(features));
  for (auto& r : data.rows)
    r = State(schema, std::vector<double>(r.values().begin(), r.values().end()));
  data.schema = std::move(schema);
}

struct LoadOptions {
  // Column holding class labels; absent or not in the header means no labels.
  std::optional<std::string> label_column;
};

/// Reads a CSV table against a schema document.
///
/// Columns are matched by name, so column order is free. Numeric features
/// without a declared norm_range get the observed max - min of the column.
inline Dataset load_dataset(std::istream& csv_source, std::istream& schema_source,
                            const LoadOptions& options = {}) {
  auto features = parse_schema_features(schema_source);
  Schema probe(features);  // validates the declarations

  auto records = csv::read(csv_source);
  if (records.empty()) throw SchemaMismatch("CSV has no header row");
  const auto& header = records.front();

  std::vector<std::size_t> column_of(probe.size(), std::numeric_limits<std::size_t>::max());
  std::optional<std::size_t> label_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (options.label_column && header[c] == *options.label_column) {
      label_col = c;
      continue;
    }
    auto i = probe.index_of(header[c]);
    if (!i) throw SchemaMismatch("CSV column '" + header[c] + "' is not a schema feature");
    if (column_of[*i] != std::numeric_limits<std::size_t>::max())
      throw SchemaMismatch("CSV column '" + header[c] + "' appears twice");
    column_of[*i] = c;
  }
  for (std::size_t i = 0; i < probe.size(); ++i)
    if (column_of[i] == std::numeric_limits<std::size_t>::max())
      throw SchemaMismatch("schema feature '" + probe[i].name + "' missing from CSV header");

  std::vector<std::vector<double>> values;
  std::vector<std::string> labels;
  values.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t row = r - 1;
    if (rec.size() != header.size())
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(rec.size()) +
                           " fields, header has " + std::to_string(header.size()),
                       r + 1, 1);
    std::vector<double> v(probe.size());
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const auto& f = probe[i];
      const auto& cell = rec[column_of[i]];
      if (cell.empty()) throw DomainViolation("missing value", row, f.name);
      if (f.kind == FeatureKind::numeric) {
        auto num = parse_number(cell);
        if (!num) throw ParseError("'" + cell + "' is not a number in column '" + f.name + "'",
                                   r + 1, column_of[i] + 1);
        if (!f.contains(*num))
          throw DomainViolation("value " + cell + " outside [" + format_number(f.lo) + ", " +
                                    format_number(f.hi) + "]",
                                row, f.name);
        v[i] = *num;
      } else {
        auto idx = f.level_index(cell);
        if (!idx) throw DomainViolation("'" + cell + "' is not a declared level", row, f.name);
        v[i] = *idx;
      }
    }
    values.push_back(std::move(v));
    if (label_col) labels.push_back(rec[*label_col]);
  }

  set_observed_ranges(features, values);

  Dataset out;
  out.schema = make_schema(std::move(features));
  out.rows.reserve(values.size());
  for (auto& v : values) out.rows.emplace_back(out.schema, std::move(v));
  if (label_col) out.labels = std::move(labels);
  return out;
}

inline Dataset load_dataset(const std::string& csv_text, const std::string& schema_text,
                            const LoadOptions& options = {}) {
  std::istringstream csv_in(csv_text), schema_in(schema_text);
  return load_dataset(csv_in, schema_in, options);
}

// Writes the rows (and the label column, when present) as CSV in schema order.
inline void write_dataset(std::ostream& out, const Dataset& data,
                          const std::string& label_column = "label") {
  csv::Record header = data.schema->names();
  if (data.labels) header.push_back(label_column);
  csv::write_record(out, header);
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    csv::Record rec;
    rec.reserve(header.size());
    for (std::size_t i = 0; i < data.schema->size(); ++i) rec.push_back(data.rows[r].text(i));
    if (data.labels) rec.push_back((*data.labels)[r]);
    csv::write_record(out, rec);
  }
}

}  // namespace mc3g

#endif  // MC3G_DATASET_HPP
