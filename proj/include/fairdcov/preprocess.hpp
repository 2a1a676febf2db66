// Schema-driven preprocessing: one-hot, ordinal, and min-max encodings fitted
// on one split and frozen for reuse on the others. Protected attributes are
// materialised as sample blocks for the regulariser alongside (optionally)
// appearing among the model inputs.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairdcov/fairness.hpp"
#include "fairdcov/objective.hpp"
#include "fairdcov/table.hpp"

namespace fairdcov {

enum class ColumnRole { response, exposure, feature, protected_attr, drop };
enum class Encoding { onehot, ordinal, minmax, none };

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::feature;
  Encoding encoding = Encoding::none;
  ProtectedKind protected_kind = ProtectedKind::binary;  // protected_attr only
  bool also_feature = false;                             // protected_attr only
  std::vector<std::string> ordinal_order;                // ordinal only
};

struct DatasetSchema {
  Task task = Task::binary;
  Recipe recipe = Recipe::generic;
  std::vector<ColumnSpec> columns;
  BinningSpec binning;

  const ColumnSpec& response() const {
    const ColumnSpec* found = nullptr;
    for (const auto& c : columns)
      if (c.role == ColumnRole::response) {
        if (found) throw SchemaError("schema: multiple response columns");
        found = &c;
      }
    if (!found) throw SchemaError("schema: no response column");
    return *found;
  }

  void validate() const {
    (void)response();
    bool has_exposure = false;
    for (const auto& c : columns)
      if (c.role == ColumnRole::exposure) has_exposure = true;
    if (task == Task::poisson && !has_exposure)
      throw SchemaError("schema: poisson task requires an exposure column");
    for (const auto& c : columns)
      if (c.role == ColumnRole::protected_attr && c.protected_kind == ProtectedKind::continuous &&
          c.encoding == Encoding::onehot)
        throw SchemaError("schema: continuous protected attribute cannot be one-hot");
  }
};

// Per-column statistics fitted on one split and frozen.
struct ColumnTransform {
  Encoding encoding = Encoding::none;
  std::vector<std::string> categories;  // onehot/ordinal, sorted or schema order
  double min = 0.0, max = 0.0;          // minmax
};

struct FittedTransforms {
  std::map<std::string, ColumnTransform> by_column;
  std::map<std::string, FittedBins> protected_bins;  // continuous protected attrs
};

enum class UnseenCategoryPolicy { error, ignore_row };

namespace detail {

inline ColumnTransform fit_column(const Table& t, const ColumnSpec& spec) {
  ColumnTransform tr;
  tr.encoding = spec.encoding;
  const std::size_t col = t.col_index(spec.name);
  switch (spec.encoding) {
    case Encoding::onehot: {
      std::set<std::string> cats;
      for (const auto& row : t.rows) cats.insert(row[col]);
      tr.categories.assign(cats.begin(), cats.end());
      break;
    }
    case Encoding::ordinal: {
      if (spec.ordinal_order.empty())
        throw SchemaError("schema: ordinal column " + spec.name + " needs an explicit order");
      tr.categories = spec.ordinal_order;
      break;
    }
    case Encoding::minmax: {
      bool first = true;
      for (const auto& row : t.rows) {
        const double v = to_number(row[col], spec.name.c_str());
        if (first) {
          tr.min = tr.max = v;
          first = false;
        } else {
          tr.min = std::min(tr.min, v);
          tr.max = std::max(tr.max, v);
        }
      }
      break;
    }
    case Encoding::none:
      break;
  }
  return tr;
}

inline std::size_t category_index(const ColumnTransform& tr, const std::string& value,
                                  const std::string& column) {
  for (std::size_t i = 0; i < tr.categories.size(); ++i)
    if (tr.categories[i] == value) return i;
  throw SchemaError("unseen category '" + value + "' in column " + column);
}

// Width-0-range guard: a constant fitted column maps to all zeros.
inline double minmax_apply(const ColumnTransform& tr, double v) {
  if (tr.max <= tr.min) return 0.0;
  return (v - tr.min) / (tr.max - tr.min);
}

}  // namespace detail

inline FittedTransforms fit_transforms(const Table& fit_split, const DatasetSchema& schema) {
  schema.validate();
  FittedTransforms out;
  for (const auto& spec : schema.columns) {
    if (spec.role == ColumnRole::drop) continue;
    out.by_column[spec.name] = detail::fit_column(fit_split, spec);
    if (spec.role == ColumnRole::protected_attr &&
        spec.protected_kind == ProtectedKind::continuous) {
      const std::size_t col = fit_split.col_index(spec.name);
      const auto& tr = out.by_column[spec.name];
      std::vector<double> values;
      values.reserve(fit_split.rows.size());
      for (const auto& row : fit_split.rows)
        values.push_back(spec.encoding == Encoding::minmax
                             ? detail::minmax_apply(tr, detail::to_number(row[col], spec.name.c_str()))
                             : detail::to_number(row[col], spec.name.c_str()));
      out.protected_bins[spec.name] = fit_quantile_bins(values, schema.binning.quantiles);
    }
  }
  return out;
}

struct PreparedData {
  Dataset data;  // X over feature columns; attrs hold the protected blocks
  std::vector<ProtectedAttributeSpec> protected_specs;
  std::vector<std::string> feature_names;
};

// Applies frozen transforms; never recomputes statistics from the given
// table.
inline PreparedData apply_transforms(const Table& t, const DatasetSchema& schema,
                                     const FittedTransforms& transforms) {
  schema.validate();
  const std::size_t n = t.rows.size();
  if (n == 0) throw EmptyInput("apply_transforms: empty table");

  std::vector<std::vector<double>> feature_cols;
  std::vector<std::string> feature_names;
  PreparedData out;

  const auto encoded_width = [&](const ColumnSpec& spec) -> std::size_t {
    if (spec.encoding == Encoding::onehot)
      return transforms.by_column.at(spec.name).categories.size();
    return 1;
  };

  const auto encode_into = [&](const ColumnSpec& spec, Matrix& block) {
    const std::size_t col = t.col_index(spec.name);
    const ColumnTransform& tr = transforms.by_column.at(spec.name);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& raw = t.rows[i][col];
      switch (spec.encoding) {
        case Encoding::onehot:
          block(i, detail::category_index(tr, raw, spec.name)) = 1.0;
          break;
        case Encoding::ordinal:
          block(i, 0) = static_cast<double>(detail::category_index(tr, raw, spec.name));
          break;
        case Encoding::minmax:
          block(i, 0) = detail::minmax_apply(tr, detail::to_number(raw, spec.name.c_str()));
          break;
        case Encoding::none:
          block(i, 0) = detail::to_number(raw, spec.name.c_str());
          break;
      }
    }
  };

  for (const auto& spec : schema.columns) {
    switch (spec.role) {
      case ColumnRole::drop:
        break;
      case ColumnRole::response: {
        const std::size_t col = t.col_index(spec.name);
        out.data.y.resize(n);
        for (std::size_t i = 0; i < n; ++i)
          out.data.y[i] = detail::to_number(t.rows[i][col], spec.name.c_str());
        break;
      }
      case ColumnRole::exposure: {
        const std::size_t col = t.col_index(spec.name);
        out.data.exposure.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          out.data.exposure[i] = detail::to_number(t.rows[i][col], spec.name.c_str());
          if (!(out.data.exposure[i] > 0.0))
            throw SchemaError("exposure must be positive in column " + spec.name);
        }
        break;
      }
      case ColumnRole::feature:
      case ColumnRole::protected_attr: {
        Matrix block(n, encoded_width(spec));
        encode_into(spec, block);
        const bool as_feature =
            spec.role == ColumnRole::feature ||
            (spec.role == ColumnRole::protected_attr && spec.also_feature);
        if (as_feature) {
          for (std::size_t j = 0; j < block.cols(); ++j) {
            std::vector<double> column(n);
            for (std::size_t i = 0; i < n; ++i) column[i] = block(i, j);
            feature_cols.push_back(std::move(column));
            feature_names.push_back(block.cols() == 1 ? spec.name
                                                      : spec.name + ":" +
                                                            transforms.by_column.at(spec.name)
                                                                .categories[j]);
          }
        }
        if (spec.role == ColumnRole::protected_attr) {
          ProtectedAttributeSpec pa;
          pa.name = spec.name;
          pa.kind = spec.protected_kind;
          if (pa.kind == ProtectedKind::binary && block.cols() == 2) {
            // Two-category one-hot collapses to an indicator of the second
            // sorted category.
            Matrix indicator(n, 1);
            for (std::size_t i = 0; i < n; ++i) indicator(i, 0) = block(i, 1);
            pa.block = std::move(indicator);
          } else {
            pa.block = block;
          }
          if (pa.kind == ProtectedKind::continuous)
            pa.bins = transforms.protected_bins.at(spec.name);
          out.data.attrs.push_back(pa.block);
          out.protected_specs.push_back(std::move(pa));
        }
        break;
      }
    }
  }

  out.data.X = Matrix(n, feature_cols.size());
  for (std::size_t j = 0; j < feature_cols.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) out.data.X(i, j) = feature_cols[j][i];
  out.feature_names = std::move(feature_names);

  if (schema.task == Task::binary) {
    for (double v : out.data.y)
      if (v != 0.0 && v != 1.0) throw SchemaError("binary response must be 0/1");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transform serialisation (bundle artefact)
// ---------------------------------------------------------------------------

inline nlohmann::json transforms_to_json(const FittedTransforms& tr) {
  nlohmann::json j;
  for (const auto& [name, t] : tr.by_column) {
    nlohmann::json c;
    c["encoding"] = static_cast<int>(t.encoding);
    c["categories"] = t.categories;
    c["min"] = t.min;
    c["max"] = t.max;
    j["columns"][name] = std::move(c);
  }
  for (const auto& [name, bins] : tr.protected_bins) j["protected_bins"][name] = bins.cuts;
  return j;
}

inline FittedTransforms transforms_from_json(const nlohmann::json& j) {
  FittedTransforms tr;
  if (j.contains("columns"))
    for (const auto& [name, c] : j.at("columns").items()) {
      ColumnTransform t;
      t.encoding = static_cast<Encoding>(c.at("encoding").get<int>());
      t.categories = c.at("categories").get<std::vector<std::string>>();
      t.min = c.at("min").get<double>();
      t.max = c.at("max").get<double>();
      tr.by_column[name] = std::move(t);
    }
  if (j.contains("protected_bins"))
    for (const auto& [name, cuts] : j.at("protected_bins").items())
      tr.protected_bins[name] = FittedBins{cuts.get<std::vector<double>>()};
  return tr;
}

}  // namespace fairdcov
