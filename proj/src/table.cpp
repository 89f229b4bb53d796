// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace neoxsim {

namespace {

double parse_number(const std::string& s, bool* ok) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  *ok = !s.empty() && end == begin + s.size();
  return v;
}

double round_to(double v, int decimals) {
  if (!std::isfinite(v)) return v;
  bool ok = false;
  const double r = parse_number(fmt::format("{:.{}f}", v, decimals), &ok);
  return r == 0.0 ? 0.0 : r;  // drop negative zero
}

// Splits one CSV line; returns (cell, was_quoted) pairs.
std::vector<std::pair<std::string, bool>> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::pair<std::string, bool>> cells;
  std::size_t i = 0;
  while (true) {
    std::string cell;
    bool quoted = false;
    if (i < line.size() && line[i] == '"') {
      quoted = true;
      ++i;
      while (true) {
        if (i >= line.size()) {
          throw std::invalid_argument("csv line " + std::to_string(line_no) + ": unterminated quote");
        }
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cell += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        cell += line[i++];
      }
    } else {
      while (i < line.size() && line[i] != ',') cell += line[i++];
    }
    cells.emplace_back(std::move(cell), quoted);
    if (i >= line.size()) break;
    if (line[i] != ',') {
      throw std::invalid_argument("csv line " + std::to_string(line_no) +
                                  ": expected ',' after quoted cell");
    }
    ++i;
  }
  return cells;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_cell(const Cell& cell, const Column& column) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  return fmt::format("{:.{}f}", std::get<double>(cell), column.decimals);
}

Table::Table(std::vector<Column> columns) : columns_(std::move(columns)) {
  for (const auto& c : columns_) {
    if (c.name.empty()) throw std::invalid_argument("table: empty column name");
    if (c.decimals < 0 || c.decimals > 17) throw std::invalid_argument("table: bad decimals");
  }
}

std::size_t Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  throw std::out_of_range("table: no column '" + name + "'");
}

double Table::number(std::size_t row, const std::string& column) const {
  return std::get<double>(rows_.at(row).at(column_index(column)));
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw std::invalid_argument("table: row has " + std::to_string(row.size()) + " cells, expected " +
                                std::to_string(columns_.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    const bool is_text = std::holds_alternative<std::string>(row[i]);
    if (is_text != columns_[i].text) {
      throw std::invalid_argument("table: cell type mismatch in column '" + columns_[i].name + "'");
    }
    if (!is_text) {
      const double v = std::get<double>(row[i]);
      if (!std::isfinite(v)) {
        throw std::invalid_argument("table: non-finite value in column '" + columns_[i].name + "'");
      }
      row[i] = round_to(v, columns_[i].decimals);
    }
  }
  rows_.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    out += (i ? "," : "") + columns_[i].name;
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += columns_[i].text ? quote(std::get<std::string>(row[i])) : format_cell(row[i], columns_[i]);
    }
    out += '\n';
  }
  return out;
}

std::string Table::to_json() const {
  nlohmann::ordered_json j;
  j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : columns_) {
    j["columns"].push_back({{"name", c.name}, {"decimals", c.decimals}, {"text", c.text}});
  }
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : rows_) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& cell : row) {
      if (const auto* s = std::get_if<std::string>(&cell)) {
        r.push_back(*s);
      } else {
        r.push_back(std::get<double>(cell));
      }
    }
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string Table::to_console() const {
  std::vector<std::size_t> width(columns_.size());
  for (std::size_t i = 0; i < columns_.size(); ++i) width[i] = columns_[i].name.size();
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      width[i] = std::max(width[i], format_cell(row[i], columns_[i]).size());
    }
  }
  std::string out;
  auto line = [&](auto cell_text) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      out += fmt::format("{}{:>{}}", i ? "  " : "", cell_text(i), width[i]);
    }
    out += '\n';
  };
  line([&](std::size_t i) { return columns_[i].name; });
  line([&](std::size_t i) { return std::string(width[i], '-'); });
  for (const auto& row : rows_) line([&](std::size_t i) { return format_cell(row[i], columns_[i]); });
  return out;
}

Table Table::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: missing header");
  std::vector<std::string> names;
  for (auto& [name, quoted] : split_csv(line, 1)) names.push_back(name);

  std::vector<std::vector<std::pair<std::string, bool>>> raw;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv(line, line_no);
    if (cells.size() != names.size()) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(names.size()) + " cells, got " +
                                  std::to_string(cells.size()));
    }
    raw.push_back(std::move(cells));
  }

  std::vector<Column> columns;
  for (std::size_t i = 0; i < names.size(); ++i) {
    Column c{names[i], 0, false};
    if (!raw.empty()) {
      c.text = raw.front()[i].second;
      if (!c.text) {
        const auto& s = raw.front()[i].first;
        const auto dot = s.find('.');
        c.decimals = dot == std::string::npos ? 0 : static_cast<int>(s.size() - dot - 1);
      }
    }
    columns.push_back(std::move(c));
  }
  Table t(std::move(columns));
  for (std::size_t r = 0; r < raw.size(); ++r) {
    std::vector<Cell> row;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto& [s, quoted] = raw[r][i];
      if (t.columns_[i].text) {
        row.emplace_back(s);
        continue;
      }
      bool ok = false;
      const double v = parse_number(s, &ok);
      if (!ok || quoted) {
        throw std::invalid_argument("csv row " + std::to_string(r + 1) + ", column '" + names[i] +
                                    "': not a number: '" + s + "'");
      }
      row.emplace_back(v);
    }
    t.add_row(std::move(row));
  }
  return t;
}

Table Table::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<Column> columns;
  for (const auto& c : j.at("columns")) {
    columns.push_back({c.at("name").get<std::string>(), c.at("decimals").get<int>(),
                       c.at("text").get<bool>()});
  }
  Table t(std::move(columns));
  for (const auto& r : j.at("rows")) {
    std::vector<Cell> row;
    for (const auto& cell : r) {
      if (cell.is_string()) {
        row.emplace_back(cell.get<std::string>());
      } else {
        row.emplace_back(cell.get<double>());
      }
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace neoxsim
