#include "vmtco2/panel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "vmtco2/errors.hpp"

namespace vmtco2 {

namespace {

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '.'; });
}

FormulaFactor parse_factor(const std::string& raw) {
  const std::string s = io::trim(raw);
  const auto open = s.find('(');
  if (open == std::string::npos) {
    if (!is_identifier(s)) throw InputError("formula: bad column name '" + s + "'");
    return {s, FormulaFactor::Transform::None};
  }
  if (s.back() != ')') throw InputError("formula: unbalanced parentheses in '" + s + "'");
  const std::string fn = io::trim(s.substr(0, open));
  const std::string arg = io::trim(s.substr(open + 1, s.size() - open - 2));
  if (!is_identifier(arg)) throw InputError("formula: bad column name '" + arg + "'");
  if (fn == "log") return {arg, FormulaFactor::Transform::Log};
  if (fn == "logsq") return {arg, FormulaFactor::Transform::LogSquared};
  if (fn == "sq") return {arg, FormulaFactor::Transform::Squared};
  throw InputError("formula: unknown function '" + fn + "'");
}

std::string factor_name(const FormulaFactor& f) {
  switch (f.transform) {
    case FormulaFactor::Transform::None: return f.column;
    case FormulaFactor::Transform::Log: return "log(" + f.column + ")";
    case FormulaFactor::Transform::LogSquared: return "logsq(" + f.column + ")";
    case FormulaFactor::Transform::Squared: return "sq(" + f.column + ")";
  }
  return f.column;
}

FormulaTerm parse_term(const std::string& raw) {
  FormulaTerm term;
  std::size_t start = 0;
  while (true) {
    const auto colon = raw.find(':', start);
    term.factors.push_back(parse_factor(raw.substr(start, colon == std::string::npos ? std::string::npos : colon - start)));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  for (const auto& f : term.factors) term.name += (term.name.empty() ? "" : ":") + factor_name(f);
  return term;
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string l;
  for (unsigned char c : cell) l.push_back(static_cast<char>(std::tolower(c)));
  return l == "na" || l == "nan" || l == "null";
}

// Evaluates a factor; nullopt marks a value that drops the row.
std::optional<double> eval_factor(const FormulaFactor& f, double v) {
  switch (f.transform) {
    case FormulaFactor::Transform::None: return v;
    case FormulaFactor::Transform::Squared: return v * v;
    case FormulaFactor::Transform::Log:
      if (!(v > 0.0)) return std::nullopt;
      return std::log(v);
    case FormulaFactor::Transform::LogSquared:
      if (!(v > 0.0)) return std::nullopt;
      return std::log(v) * std::log(v);
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> Formula::columns() const {
  std::vector<std::string> cols;
  auto add = [&](const FormulaTerm& t) {
    for (const auto& f : t.factors)
      if (std::find(cols.begin(), cols.end(), f.column) == cols.end()) cols.push_back(f.column);
  };
  add(outcome);
  for (const auto& t : terms) add(t);
  return cols;
}

Formula parse_formula(const std::string& text) {
  Formula f;
  f.text = io::trim(text);
  const auto tilde = f.text.find('~');
  if (tilde == std::string::npos) throw InputError("formula: expected 'outcome ~ terms', got '" + f.text + "'");
  f.outcome = parse_term(f.text.substr(0, tilde));
  if (f.outcome.factors.size() != 1) throw InputError("formula: outcome must be a single column");
  const std::string rhs = f.text.substr(tilde + 1);
  std::set<std::string> seen;
  std::size_t start = 0;
  while (true) {
    const auto plus = rhs.find('+', start);
    const std::string piece = io::trim(rhs.substr(start, plus == std::string::npos ? std::string::npos : plus - start));
    if (piece.empty()) throw InputError("formula: empty term");
    if (piece != "1") {
      auto term = parse_term(piece);
      if (!seen.insert(term.name).second) throw InputError("formula: duplicate term " + term.name);
      f.terms.push_back(std::move(term));
    }
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return f;
}

Formula load_formula(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = io::trim(line);
    if (t.empty() || t.front() == '#') continue;
    return parse_formula(t);
  }
  throw InputError(path.string() + ": no formula line");
}

std::string TractPanel::signature() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const auto rows = static_cast<std::int64_t>(n());
  mix(&rows, sizeof rows);
  for (const auto& id : ids) mix(id.data(), id.size() + 1);
  mix(y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TractPanel build_panel(const io::CsvTable& table, const Formula& formula, const PanelOptions& options) {
  const auto needed = formula.columns();
  const auto cols = table.require(needed);
  std::map<std::string, std::size_t> col_of;
  for (std::size_t i = 0; i < needed.size(); ++i) col_of[needed[i]] = cols[i];

  const auto id_col = table.column(options.id_column);
  const auto group_col = table.column(options.group_column);
  const auto cx = table.column(options.centroid_x);
  const auto cy = table.column(options.centroid_y);
  const bool have_centroids = cx && cy;

  TractPanel panel;
  panel.outcome_name = formula.outcome.name;
  panel.names.push_back("const");
  for (const auto& t : formula.terms) panel.names.push_back(t.name);

  std::vector<double> ys;
  std::vector<std::vector<double>> rows;
  std::set<std::string> ids_seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.lines[r];
    std::map<std::string, double> raw;
    bool drop = false;
    for (const auto& [name, c] : col_of) {
      if (is_missing(row[c])) {
        drop = true;
        break;
      }
      const double v = io::parse_double(row[c], name, line);
      if (!std::isfinite(v)) {
        drop = true;
        break;
      }
      if (std::find(options.unit_interval_columns.begin(), options.unit_interval_columns.end(), name) !=
              options.unit_interval_columns.end() &&
          (v < 0.0 || v > 1.0))
        throw InputError("line " + std::to_string(line) + ": " + name + " must lie in [0, 1], got " + row[c]);
      raw[name] = v;
    }
    auto eval_term = [&](const FormulaTerm& t) -> std::optional<double> {
      double prod = 1.0;
      for (const auto& f : t.factors) {
        const auto v = eval_factor(f, raw.at(f.column));
        if (!v) return std::nullopt;
        prod *= *v;
      }
      return prod;
    };
    std::vector<double> xrow{1.0};
    std::optional<double> yv;
    if (!drop) {
      yv = eval_term(formula.outcome);
      drop = !yv;
    }
    for (std::size_t t = 0; !drop && t < formula.terms.size(); ++t) {
      const auto v = eval_term(formula.terms[t]);
      if (!v) drop = true; else xrow.push_back(*v);
    }
    if (!drop && have_centroids && (is_missing(row[*cx]) || is_missing(row[*cy]))) drop = true;
    if (drop) {
      ++panel.dropped_rows;
      continue;
    }
    const std::string id = id_col ? row[*id_col] : std::to_string(r);
    if (!ids_seen.insert(id).second) throw InputError("line " + std::to_string(line) + ": duplicate id " + id);
    panel.ids.push_back(id);
    ys.push_back(*yv);
    rows.push_back(std::move(xrow));
    if (group_col) panel.groups.push_back(row[*group_col]);
    if (have_centroids)
      panel.centroids.emplace_back(io::parse_double(row[*cx], options.centroid_x, line),
                                   io::parse_double(row[*cy], options.centroid_y, line));
  }
  const auto n = static_cast<Eigen::Index>(ys.size());
  panel.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  panel.x.resize(n, static_cast<Eigen::Index>(panel.names.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < panel.x.cols(); ++j) panel.x(i, j) = rows[i][j];
  return panel;
}

TractPanel make_panel(Eigen::VectorXd y, const Eigen::MatrixXd& covariates, std::vector<std::string> covariate_names,
                      std::vector<std::string> ids) {
  const auto n = y.size();
  if (covariates.rows() != n) throw InputError("covariate rows differ from outcome length");
  if (static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols()) throw InputError("covariate name count");
  TractPanel p;
  p.y = std::move(y);
  p.x.resize(n, covariates.cols() + 1);
  p.x.col(0).setOnes();
  p.x.rightCols(covariates.cols()) = covariates;
  p.names.push_back("const");
  for (auto& c : covariate_names) p.names.push_back(std::move(c));
  p.outcome_name = "y";
  if (ids.empty())
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  p.ids = std::move(ids);
  return p;
}

TractPanel permute_rows(const TractPanel& panel, const std::vector<Eigen::Index>& perm) {
  std::vector<bool> seen(perm.size(), false);
  for (const auto r : perm) {
    if (r < 0 || r >= panel.n() || seen[static_cast<std::size_t>(r)])
      throw InputError("row permutation is not a permutation of 0.." + std::to_string(panel.n() - 1));
    seen[static_cast<std::size_t>(r)] = true;
  }
  if (static_cast<Eigen::Index>(perm.size()) != panel.n())
    throw InputError("row permutation has " + std::to_string(perm.size()) + " entries for " +
                     std::to_string(panel.n()) + " rows");
  TractPanel out = panel;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto src = perm[i];
    out.ids[i] = panel.ids[src];
    out.y(static_cast<Eigen::Index>(i)) = panel.y(src);
    out.x.row(static_cast<Eigen::Index>(i)) = panel.x.row(src);
    if (!panel.groups.empty()) out.groups[i] = panel.groups[src];
    if (!panel.centroids.empty()) out.centroids[i] = panel.centroids[src];
  }
  return out;
}

}  // namespace vmtco2
