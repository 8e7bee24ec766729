#include "smoothdiff/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "smoothdiff/errors.hpp"

namespace smoothdiff {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

double parse_field(const std::string& text, std::string_view source, std::size_t line,
                   const std::string& column) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw InputError("io::read_csv: " + where(source, line) + ": column '" + column +
                     "' is not a finite number: '" + text + "'");
  }
  return v;
}

struct ParsedRows {
  std::vector<double> y, z;
  std::vector<std::vector<double>> x;  // per column
  std::vector<std::string> stratum;
  std::vector<std::string> x_names;
};

ParsedRows parse_rows(std::istream& in, std::string_view source) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) header = split_csv(line);
  }
  if (header.empty()) throw InputError("io::read_csv: " + std::string(source) + ": missing header");
  if (!header[0].empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  int iy = -1, iz = -1, is = -1;
  std::vector<int> ix;
  ParsedRows rows;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const auto& h = header[c];
    auto claim = [&](int& slot) {
      if (slot >= 0) {
        throw InputError("io::read_csv: " + where(source, lineno) + ": duplicate column '" + h + "'");
      }
      slot = c;
    };
    if (h == "y") claim(iy);
    else if (h == "z") claim(iz);
    else if (h == "stratum") claim(is);
    else if (h.rfind("x_", 0) == 0) {
      ix.push_back(c);
      rows.x_names.push_back(h);
    }
  }
  if (iy < 0 || iz < 0) {
    throw InputError("io::read_csv: " + where(source, lineno) + ": header needs columns 'y' and 'z'");
  }
  rows.x.resize(ix.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw InputError("io::read_csv: " + where(source, lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    rows.y.push_back(parse_field(fields[iy], source, lineno, "y"));
    rows.z.push_back(parse_field(fields[iz], source, lineno, "z"));
    for (std::size_t j = 0; j < ix.size(); ++j) {
      rows.x[j].push_back(parse_field(fields[ix[j]], source, lineno, rows.x_names[j]));
    }
    if (is >= 0) rows.stratum.push_back(fields[is]);
  }
  if (rows.y.empty()) throw InputError("io::read_csv: " + std::string(source) + ": no data rows");
  return rows;
}

StratumData gather(const ParsedRows& rows, Family family, const std::vector<std::size_t>& idx) {
  StratumData d;
  d.family = family;
  const auto n = static_cast<Eigen::Index>(idx.size());
  d.y.resize(n);
  d.z.resize(n);
  d.x.resize(n, static_cast<Eigen::Index>(rows.x.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = idx[static_cast<std::size_t>(i)];
    d.y[i] = rows.y[r];
    d.z[i] = rows.z[r];
    for (std::size_t j = 0; j < rows.x.size(); ++j) d.x(i, static_cast<Eigen::Index>(j)) = rows.x[j][r];
  }
  return d;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("io: cannot open '" + path.string() + "'");
  return in;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

json fit_json(const StratumFit& f) {
  json j;
  j["family"] = to_string(f.family);
  j["n"] = f.n;
  j["lambda"] = number(f.lambda);
  j["edf"] = number(f.edf);
  j["dispersion"] = number(f.dispersion);
  j["deviance"] = number(f.deviance);
  j["iterations"] = f.iterations;
  j["dropped_columns"] = f.dropped_columns;
  j["coefficients"] = vector_json(f.coef);
  j["fixed_effects"] = vector_json(f.fixed);
  json se = json::array();
  for (Eigen::Index i = 0; i < f.covariance.rows(); ++i) se.push_back(number(std::sqrt(f.covariance(i, i))));
  j["coefficient_se"] = se;
  json cov = json::array();
  for (Eigen::Index i = 0; i < f.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(number(f.covariance(i, c)));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  return j;
}

json table_json(std::span<const TableCell> table) {
  json a = json::array();
  for (const auto& c : table) {
    a.push_back({{"alpha", c.alpha}, {"tdp_threshold", c.threshold}, {"value", number(c.value)},
                 {"n_replicates", c.n_replicates}, {"mc_se", number(c.mc_se)}});
  }
  return a;
}

json scenario_json(const SimScenario& s) {
  json j;
  j["name"] = s.name;
  j["basis_dim"] = s.basis_dim;
  j["degree"] = s.degree;
  j["penalty_order"] = s.penalty_order;
  j["n_nonzero"] = s.n_nonzero;
  j["clumping"] = s.clumping;
  j["coef_var"] = s.coef_var;
  j["diff_var"] = s.diff_var;
  j["min_diff"] = s.min_diff;
  j["noise_var"] = s.noise_var;
  j["n_per_stratum"] = s.n_per_stratum;
  j["domain"] = {s.domain.lo, s.domain.hi};
  j["family"] = to_string(s.family);
  j["alphas"] = s.alphas;
  j["thresholds"] = s.thresholds;
  j["replicates"] = s.replicates;
  j["seed"] = s.seed;
  j["sweep"] = s.sweep ? json{s.sweep->from, s.sweep->to} : json(nullptr);
  j["lambda"] = s.lambda ? json(*s.lambda) : json(nullptr);
  j["covariance"] = to_string(s.covariance);
  j["selector"] = to_string(s.selector);
  return j;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

StratumData read_stratum_csv(std::istream& in, Family family, std::string_view source) {
  const auto rows = parse_rows(in, source);
  std::vector<std::size_t> idx(rows.y.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather(rows, family, idx);
}

StratumData read_stratum_csv(const std::filesystem::path& path, Family family) {
  auto in = open_input(path);
  return read_stratum_csv(in, family, path.string());
}

std::pair<StratumData, StratumData> read_strata_csv(std::istream& in, Family family,
                                                    std::string_view source) {
  const auto rows = parse_rows(in, source);
  if (rows.stratum.empty()) {
    throw InputError("io::read_strata_csv: " + std::string(source) + ": no 'stratum' column");
  }
  std::vector<std::string> labels;
  std::vector<std::size_t> a, b;
  for (std::size_t i = 0; i < rows.stratum.size(); ++i) {
    const auto& s = rows.stratum[i];
    if (std::find(labels.begin(), labels.end(), s) == labels.end()) labels.push_back(s);
    if (labels.size() > 2) {
      throw InputError("io::read_strata_csv: " + std::string(source) +
                       ": more than two stratum labels (third: '" + s + "')");
    }
    (s == labels[0] ? a : b).push_back(i);
  }
  if (labels.size() != 2) {
    throw InputError("io::read_strata_csv: " + std::string(source) + ": need two stratum labels");
  }
  return {gather(rows, family, a), gather(rows, family, b)};
}

std::pair<StratumData, StratumData> read_strata_csv(const std::filesystem::path& path,
                                                    Family family) {
  auto in = open_input(path);
  return read_strata_csv(in, family, path.string());
}

void write_strata_csv(std::ostream& out, const StratumData& first, const StratumData& second) {
  if (first.x.cols() != second.x.cols()) {
    throw ParameterError("io::write_strata_csv: strata have different fixed effects");
  }
  out << "stratum,y,z";
  for (Eigen::Index j = 0; j < first.x.cols(); ++j) out << ",x_" << j + 1;
  out << '\n';
  auto rows = [&](const StratumData& d, int label) {
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      out << label << ',' << format_double(d.y[i]) << ',' << format_double(d.z[i]);
      for (Eigen::Index j = 0; j < d.x.cols(); ++j) out << ',' << format_double(d.x(i, j));
      out << '\n';
    }
  };
  rows(first, 1);
  rows(second, 2);
}

std::map<std::string, std::string> read_key_values(std::istream& in, std::string_view source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw InputError("io::read_key_values: " + where(source, lineno) + ": expected key = value");
    }
    auto key = trim(std::string_view(text).substr(0, eq));
    auto value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw InputError("io::read_key_values: " + where(source, lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_key_values(in, path.string());
}

std::string fits_json(const StrataComparison& cmp) {
  json j;
  j["basis"] = {{"dim", cmp.spec.dim()},
                {"degree", cmp.spec.degree()},
                {"domain", {cmp.spec.domain().lo, cmp.spec.domain().hi}},
                {"knots", cmp.spec.knots()},
                {"penalty_order", cmp.penalty.order}};
  j["strata"] = {fit_json(cmp.fit1), fit_json(cmp.fit2)};
  j["window_width"] = cmp.series.width;
  return j.dump(2) + "\n";
}

std::string report_json(const TdpReport& report) {
  json j;
  j["alpha"] = report.alpha;
  j["h"] = report.h;
  json regions = json::array();
  for (const auto& r : report.regions) {
    json iv = json::array();
    for (const auto& p : r.intervals.pieces()) iv.push_back({p.lo, p.hi});
    regions.push_back({{"threshold", r.threshold},
                       {"alpha", report.alpha},
                       {"tdp_bound", number(r.tdp_bound)},
                       {"discoveries", r.discoveries},
                       {"windows", r.windows},
                       {"intervals", iv}});
  }
  j["regions"] = regions;
  json queries = json::array();
  for (const auto& q : report.queries) {
    queries.push_back({{"set", q.set}, {"discoveries", q.discoveries}, {"tdp_bound", number(q.tdp_bound)}});
  }
  j["queries"] = queries;
  return j.dump(2) + "\n";
}

void write_windows_csv(std::ostream& out, const WindowTestSeries& series) {
  out << "k,region_lo,region_hi,T,p\n";
  for (Eigen::Index k = 0; k < series.statistic.size(); ++k) {
    const auto& r = series.regions[static_cast<std::size_t>(k)];
    out << k << ',' << format_double(r.lo) << ',' << format_double(r.hi) << ','
        << format_double(series.statistic[k]) << ',' << format_double(series.pvalue[k]) << '\n';
  }
}

void write_regions_csv(std::ostream& out, const TdpReport& report) {
  out << "alpha,tdp_threshold,tdp_bound,discoveries,n_windows,lo,hi\n";
  for (const auto& r : report.regions) {
    for (const auto& p : r.intervals.pieces()) {
      out << format_double(report.alpha) << ',' << format_double(r.threshold) << ','
          << format_double(r.tdp_bound) << ',' << r.discoveries << ',' << r.windows.size() << ','
          << format_double(p.lo) << ',' << format_double(p.hi) << '\n';
    }
  }
}

void write_curves_csv(std::ostream& out, const StrataComparison& cmp, int points) {
  if (points < 2) throw ParameterError("io::write_curves_csv: need at least two grid points");
  const auto dom = cmp.spec.domain();
  const int d = cmp.spec.degree();
  std::vector<double> local(static_cast<std::size_t>(d + 1));
  out << "z,fit1,se1,fit2,se2,diff,diff_se\n";
  for (int i = 0; i < points; ++i) {
    const double z = i + 1 == points ? dom.hi : dom.lo + (dom.hi - dom.lo) * i / (points - 1);
    const int first = eval_basis_local(cmp.spec, z, local);
    double f1 = 0, f2 = 0, v1 = 0, v2 = 0;
    for (int r = 0; r <= d; ++r) {
      f1 += local[r] * cmp.fit1.coef[first + r];
      f2 += local[r] * cmp.fit2.coef[first + r];
      for (int s = 0; s <= d; ++s) {
        v1 += local[r] * local[s] * cmp.fit1.covariance(first + r, first + s);
        v2 += local[r] * local[s] * cmp.fit2.covariance(first + r, first + s);
      }
    }
    out << format_double(z) << ',' << format_double(f1) << ',' << format_double(std::sqrt(v1))
        << ',' << format_double(f2) << ',' << format_double(std::sqrt(v2)) << ','
        << format_double(f1 - f2) << ',' << format_double(std::sqrt(v1 + v2)) << '\n';
  }
}

std::string sim_outcome_json(const SimOutcome& o) {
  json j;
  j["scenario"] = scenario_json(o.scenario);
  j["replicates_run"] = o.replicates.size();
  j["replicates_failed"] = o.failed;
  j["error_table"] = table_json(o.error_table);
  j["tdp_table"] = table_json(o.tdp_table);
  j["coverage_table"] = table_json(o.coverage_table);
  json summary = json::array();
  for (const auto& a : o.alpha_summary) {
    summary.push_back({{"alpha", a.alpha},
                       {"any_discovery_rate", number(a.any_discovery_rate)},
                       {"any_discovery_se", number(a.any_discovery_se)},
                       {"mean_truth_tdp", number(a.mean_truth_tdp)},
                       {"n_replicates", a.n_replicates}});
  }
  j["alpha_summary"] = summary;
  json sweep = json::array();
  for (const auto& b : o.sweep_curve) {
    sweep.push_back({{"alpha", b.alpha}, {"tdp_threshold", b.threshold},
                     {"min_diff_lo", b.min_diff_lo}, {"min_diff_hi", b.min_diff_hi},
                     {"mean_empirical_tdp", number(b.mean_empirical_tdp)},
                     {"mean_truth_tdp", number(b.mean_truth_tdp)},
                     {"mean_coverage", number(b.mean_coverage)}, {"n_replicates", b.n_replicates}});
  }
  j["sweep_curve"] = sweep;
  json reps = json::array();
  for (const auto& r : o.replicates) {
    json rj{{"index", r.index}, {"min_diff", r.min_diff}, {"failed", r.failed}};
    if (r.failed) {
      rj["failure"] = r.failure;
      reps.push_back(rj);
      continue;
    }
    rj["different"] = r.different;
    rj["lambda"] = {r.lambda_first, r.lambda_second};
    json per = json::array();
    for (const auto& a : r.per_alpha) {
      json th = json::array();
      for (const auto& t : a.thresholds) {
        th.push_back({{"threshold", t.threshold}, {"selected", t.selected},
                      {"tdp_bound", number(t.tdp_bound)}, {"empirical_tdp", number(t.empirical_tdp)},
                      {"coverage", number(t.coverage)}, {"error", t.error}});
      }
      per.push_back({{"alpha", a.alpha}, {"h", a.h}, {"truth_tdp_bound", number(a.truth_tdp_bound)},
                     {"any_discovery", a.any_discovery}, {"thresholds", th}});
    }
    rj["per_alpha"] = per;
    reps.push_back(rj);
  }
  j["replicates"] = reps;
  return j.dump(2) + "\n";
}

void write_table_csv(std::ostream& out, std::span<const TableCell> table) {
  out << "alpha,tdp_threshold,value,n_replicates,mc_se\n";
  for (const auto& c : table) {
    out << format_double(c.alpha) << ',' << format_double(c.threshold) << ','
        << format_double(c.value) << ',' << c.n_replicates << ',' << format_double(c.mc_se) << '\n';
  }
}

void write_replicates_csv(std::ostream& out, const SimOutcome& o) {
  out << "replicate,min_diff,alpha,tdp_threshold,selected,tdp_bound,empirical_tdp,coverage,error,"
         "truth_tdp_bound\n";
  for (const auto& r : o.replicates) {
    if (r.failed) continue;
    for (const auto& a : r.per_alpha) {
      for (const auto& t : a.thresholds) {
        out << r.index << ',' << format_double(r.min_diff) << ',' << format_double(a.alpha) << ','
            << format_double(t.threshold) << ',' << t.selected << ',' << format_double(t.tdp_bound)
            << ',' << format_double(t.empirical_tdp) << ',' << format_double(t.coverage) << ','
            << (t.error ? 1 : 0) << ',' << format_double(a.truth_tdp_bound) << '\n';
      }
    }
  }
}

void write_sweep_csv(std::ostream& out, const SimOutcome& o) {
  out << "alpha,tdp_threshold,min_diff_lo,min_diff_hi,mean_empirical_tdp,mean_truth_tdp,"
         "mean_coverage,n_replicates\n";
  for (const auto& b : o.sweep_curve) {
    out << format_double(b.alpha) << ',' << format_double(b.threshold) << ','
        << format_double(b.min_diff_lo) << ',' << format_double(b.min_diff_hi) << ','
        << format_double(b.mean_empirical_tdp) << ',' << format_double(b.mean_truth_tdp) << ','
        << format_double(b.mean_coverage) << ',' << b.n_replicates << '\n';
  }
}

std::string format_table(std::span<const TableCell> table, std::string_view title) {
  std::vector<double> alphas, thresholds;
  for (const auto& c : table) {
    if (std::find(alphas.begin(), alphas.end(), c.alpha) == alphas.end()) alphas.push_back(c.alpha);
    if (std::find(thresholds.begin(), thresholds.end(), c.threshold) == thresholds.end()) {
      thresholds.push_back(c.threshold);
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  std::ostringstream os;
  os << title << '\n' << std::setw(8) << "alpha";
  for (double t : thresholds) os << std::setw(10) << ("tdp " + format_double(t));
  os << '\n' << std::fixed << std::setprecision(3);
  for (double a : alphas) {
    os << std::setw(8) << a;
    for (double t : thresholds) {
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const TableCell& c) { return c.alpha == a && c.threshold == t; });
      if (it == table.end() || !std::isfinite(it->value)) {
        os << std::setw(10) << "-";
      } else {
        os << std::setw(10) << it->value;
      }
    }
    os << '\n';
  }
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("io::write_file: cannot open '" + path.string() + "' for writing");
  out << contents;
  if (!out) throw InputError("io::write_file: write to '" + path.string() + "' failed");
}

}  // namespace smoothdiff
