#pragma once

#include "aeal/csv.hpp"
#include "aeal/error.hpp"
#include "aeal/linalg.hpp"
#include "aeal/rng.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace aeal {

enum class Agent { A, B };
enum class Owner { A, B, Shared };

inline bool visible_to(Owner o, Agent a) noexcept {
  return o == Owner::Shared || (a == Agent::A ? o == Owner::A : o == Owner::B);
}

struct Column {
  std::string name;
  Vector values;
  Owner owner = Owner::A;
};

/// One agent's design: its own columns plus the shared ones, in dataset order.
struct AgentView {
  Matrix design;
  std::vector<std::string> column_names;
  Agent owner = Agent::A;

  Eigen::Index rows() const { return design.rows(); }
  Eigen::Index cols() const { return design.cols(); }
};

/// Checks that `x` has full column rank; on failure names the first column
/// that is (numerically) a combination of the ones before it.
inline void check_full_rank(const MatrixRef& x, const std::vector<std::string>& names, Errc code,
                            const std::string& what) {
  if (numerical_rank(x) == x.cols()) return;
  for (Eigen::Index j = 1; j <= x.cols(); ++j) {
    if (numerical_rank(x.leftCols(j)) < j) {
      const std::string col = j - 1 < static_cast<Eigen::Index>(names.size()) ? names[j - 1] : std::to_string(j - 1);
      fail(code, what + ": column '" + col + "' is linearly dependent on earlier columns");
    }
  }
  fail(code, what + " is rank deficient");
}

class AlignedDataset {
 public:
  AlignedDataset() = default;

  AlignedDataset(Vector y, std::vector<Column> columns, std::vector<std::string> ids = {})
      : y_(std::move(y)), columns_(std::move(columns)), ids_(std::move(ids)) {
    validate();
  }

  Eigen::Index n() const { return y_.size(); }
  const Vector& y() const { return y_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::string>& ids() const { return ids_; }

  std::vector<int> column_indices(Agent a) const {
    std::vector<int> idx;
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (visible_to(columns_[j].owner, a)) idx.push_back(static_cast<int>(j));
    return idx;
  }

  AgentView view(Agent a) const {
    const auto idx = column_indices(a);
    AgentView v;
    v.owner = a;
    v.design.resize(n(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      v.design.col(static_cast<Eigen::Index>(k)) = columns_[idx[k]].values;
      v.column_names.push_back(columns_[idx[k]].name);
    }
    return v;
  }

  /// Pooled design with every column once (shared columns deduplicated).
  Matrix pooled_design() const {
    Matrix x(n(), static_cast<Eigen::Index>(columns_.size()));
    for (std::size_t j = 0; j < columns_.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = columns_[j].values;
    return x;
  }

  std::vector<Owner> ownership() const {
    std::vector<Owner> o;
    for (const auto& c : columns_) o.push_back(c.owner);
    return o;
  }

  AlignedDataset subset(std::span<const int> rows) const {
    std::vector<Column> cols = columns_;
    for (auto& c : cols) c.values = select_rows(c.values, rows);
    std::vector<std::string> ids;
    if (!ids_.empty())
      for (int r : rows) ids.push_back(ids_[r]);
    return AlignedDataset(select_rows(y_, rows), std::move(cols), std::move(ids));
  }

  /// Writes A's file (id, response, A-only and shared columns) and B's file
  /// (id, B-only and shared columns). Ids default to 1..n when absent.
  void write_csv(const std::string& path_a, const std::string& path_b, const std::string& id_column = "id",
                 const std::string& response_column = "y") const {
    const auto write = [&](const std::string& path, Agent a) {
      std::ofstream out(path, std::ios::binary);
      if (!out) fail(Errc::CsvParse, "cannot write '" + path + "'");
      const auto idx = column_indices(a);
      std::vector<std::string> header{id_column};
      if (a == Agent::A) header.push_back(response_column);
      for (int j : idx) header.push_back(columns_[j].name);
      csv::write_row(out, header);
      for (Eigen::Index i = 0; i < n(); ++i) {
        std::vector<std::string> row{ids_.empty() ? std::to_string(i + 1) : ids_[i]};
        if (a == Agent::A) row.push_back(csv::format_double(y_[i]));
        for (int j : idx) row.push_back(csv::format_double(columns_[j].values[i]));
        csv::write_row(out, row);
      }
    };
    write(path_a, Agent::A);
    write(path_b, Agent::B);
  }

 private:
  void validate() const {
    require(n() > 0, Errc::BadDimensions, "dataset has no rows");
    require(ids_.empty() || static_cast<Eigen::Index>(ids_.size()) == n(), Errc::DimensionMismatch,
            "id vector length differs from n");
    for (const auto& c : columns_)
      require(c.values.size() == n(), Errc::DimensionMismatch, "column '" + c.name + "' has wrong length");
    for (Agent a : {Agent::A, Agent::B}) {
      std::set<std::string> seen;
      for (int j : column_indices(a))
        require(seen.insert(columns_[j].name).second, Errc::InvalidArgument,
                "duplicate column name '" + columns_[j].name + "' in one agent's view");
      const AgentView v = view(a);
      check_full_rank(v.design, v.column_names, Errc::RankDeficientView,
                      std::string(a == Agent::A ? "A" : "B") + "'s view");
    }
  }

  Vector y_;
  std::vector<Column> columns_;
  std::vector<std::string> ids_;
};

/// Splits rows at random; the first part has round(fraction * n) rows. Row
/// order inside each part follows the original order.
inline std::pair<AlignedDataset, AlignedDataset> split_rows(const AlignedDataset& ds, double fraction, Rng& rng) {
  require(ds.n() >= 2, Errc::InvalidArgument, "split_rows needs at least two rows");
  require(fraction > 0.0 && fraction < 1.0, Errc::InvalidArgument, "split fraction must lie in (0,1)");
  const auto n = static_cast<int>(ds.n());
  const int first = static_cast<int>(std::lround(fraction * n));
  require(first >= 1 && first <= n - 1, Errc::InvalidArgument, "split leaves an empty part");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  std::vector<int> a(perm.begin(), perm.begin() + first);
  std::vector<int> b(perm.begin() + first, perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {ds.subset(a), ds.subset(b)};
}

/// A single agent's CSV: ids, named numeric columns, optionally a response.
struct OwnerTable {
  std::vector<std::string> ids;
  std::vector<std::string> names;
  Matrix values;
  std::optional<Vector> y;
};

inline OwnerTable load_owner_csv(const std::string& path, const std::string& id_column,
                                 const std::optional<std::string>& response_column = std::nullopt) {
  const csv::Table t = csv::read_file(path);
  const int id_col = t.find(id_column);
  require(id_col >= 0, Errc::MissingId, "'" + path + "' has no id column '" + id_column + "'");
  int y_col = -1;
  if (response_column) {
    y_col = t.find(*response_column);
    require(y_col >= 0, Errc::CsvParse, "'" + path + "' has no response column '" + *response_column + "'");
  }

  OwnerTable out;
  std::vector<int> value_cols;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (static_cast<int>(j) == id_col || static_cast<int>(j) == y_col) continue;
    value_cols.push_back(static_cast<int>(j));
    out.names.push_back(t.header[j]);
  }
  const auto rows = static_cast<Eigen::Index>(t.rows.size());
  out.values.resize(rows, static_cast<Eigen::Index>(value_cols.size()));
  if (y_col >= 0) out.y = Vector(rows);

  std::set<std::string> seen;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = t.rows[i];
    require(seen.insert(r[id_col]).second, Errc::DuplicateId, "id '" + r[id_col] + "' appears twice in '" + path + "'");
    out.ids.push_back(r[id_col]);
    for (std::size_t k = 0; k < value_cols.size(); ++k)
      out.values(i, static_cast<Eigen::Index>(k)) = csv::to_double(r[value_cols[k]]);
    if (y_col >= 0) (*out.y)[i] = csv::to_double(r[y_col]);
  }
  return out;
}

/// Rows of `ids` (in order) that appear in `other`, as index pairs.
inline std::vector<std::pair<int, int>> match_ids(const std::vector<std::string>& ids,
                                                  const std::vector<std::string>& other) {
  std::unordered_map<std::string, int> pos;
  for (std::size_t i = 0; i < other.size(); ++i) pos.emplace(other[i], static_cast<int>(i));
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (auto it = pos.find(ids[i]); it != pos.end()) out.emplace_back(static_cast<int>(i), it->second);
  return out;
}

/// Joins A's file (which holds the response) and B's file on the id column.
/// Columns present in both files with equal name and equal values become
/// Shared; equal name with different values is a ColumnConflict.
inline AlignedDataset load_aligned_csv(const std::string& path_a, const std::string& path_b,
                                       const std::string& id_column, const std::string& response_column = "y") {
  const OwnerTable a = load_owner_csv(path_a, id_column, response_column);
  const OwnerTable b = load_owner_csv(path_b, id_column);
  const auto pairs = match_ids(a.ids, b.ids);
  require(!pairs.empty(), Errc::EmptyIntersection, "no common ids between '" + path_a + "' and '" + path_b + "'");

  std::vector<int> ra, rb;
  for (auto [i, j] : pairs) {
    ra.push_back(i);
    rb.push_back(j);
  }
  const Matrix xa = select_rows(a.values, ra);
  const Matrix xb = select_rows(b.values, rb);

  std::vector<Column> cols;
  std::vector<bool> b_taken(b.names.size(), false);
  for (std::size_t j = 0; j < a.names.size(); ++j) {
    Owner owner = Owner::A;
    for (std::size_t k = 0; k < b.names.size(); ++k) {
      if (b.names[k] != a.names[j]) continue;
      // bitwise equality of the parsed doubles
      if (xa.col(static_cast<Eigen::Index>(j)) != xb.col(static_cast<Eigen::Index>(k)))
        fail(Errc::ColumnConflict, "column '" + a.names[j] + "' appears in both files with different values");
      owner = Owner::Shared;
      b_taken[k] = true;
    }
    cols.push_back({a.names[j], xa.col(static_cast<Eigen::Index>(j)), owner});
  }
  for (std::size_t k = 0; k < b.names.size(); ++k)
    if (!b_taken[k]) cols.push_back({b.names[k], xb.col(static_cast<Eigen::Index>(k)), Owner::B});

  std::vector<std::string> ids;
  for (int i : ra) ids.push_back(a.ids[i]);
  Vector y = select_rows(*a.y, ra);
  return AlignedDataset(std::move(y), std::move(cols), std::move(ids));
}

}  // namespace aeal
