// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_TABLE_HPP
#define NEOXSIM_TABLE_HPP

#include <string>
#include <variant>
#include <vector>

namespace neoxsim {

using Cell = std::variant<double, std::string>;

struct Column {
  std::string name;
  int decimals = 2;   // numeric columns only
  bool text = false;

  static Column number(std::string name, int decimals) { return {std::move(name), decimals, false}; }
  static Column label(std::string name) { return {std::move(name), 0, true}; }

  friend bool operator==(const Column&, const Column&) = default;
};

/// A results table. Numeric cells are rounded to their column's decimals
/// when added, so emitting and re-parsing reproduces the table exactly.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<Column> columns);

  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  std::size_t column_index(const std::string& name) const;
  double number(std::size_t row, const std::string& column) const;

  void add_row(std::vector<Cell> row);

  /// Header row, then one line per row. Text cells are double-quoted.
  std::string to_csv() const;
  /// {"columns":[{"name","decimals","text"}...],"rows":[[...]...]}
  std::string to_json() const;
  /// Right-aligned fixed-width text for terminals.
  std::string to_console() const;

  static Table from_csv(const std::string& text);
  static Table from_json(const std::string& text);

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
};

/// Renders a numeric cell with the column's decimals.
std::string format_cell(const Cell& cell, const Column& column);

}  // namespace neoxsim

#endif  // NEOXSIM_TABLE_HPP
