#pragma once

// Benchmark analysis: latency statistics, percent changes, per-case deltas
// across model labels, hallucination detectors and the sequential suite
// runner that writes samples.csv / summary.json / series.json.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "jarvis/pipelines.hpp"
#include "jarvis/text.hpp"

namespace jarvis {

// ---------------------------------------------------------------------------
// statistics

struct StatsSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 when n == 1
};

inline StatsSummary mean_sd(const std::vector<double>& samples) {
  if (samples.empty()) throw std::invalid_argument("mean_sd of an empty sample");
  // Welford's update keeps the variance stable for large offsets.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : samples) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  StatsSummary s;
  s.n = n;
  s.mean = mean;
  s.sd = n > 1 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(n - 1))) : 0.0;
  return s;
}

// (next - base) / base * 100; negative means faster than base.
inline double pct_change(double base, double next) {
  if (!(base > 0.0)) throw std::invalid_argument("pct_change requires base > 0");
  return (next - base) / base * 100.0;
}

struct LatencySample {
  std::int64_t case_id = 0;
  PipelineKind variant = PipelineKind::Standard;
  std::string model_label;
  double seconds = 0.0;
};

struct DeltaReport {
  std::int64_t case_id = 0;
  double abs_delta_s = 0.0;
  double rel_delta_pct = 0.0;
};

// Per-case (b - a). Repeated samples of one case are averaged first. Both
// lists must cover the same case ids of a single variant.
inline std::vector<DeltaReport> per_case_deltas(const std::vector<LatencySample>& a,
                                                const std::vector<LatencySample>& b) {
  auto per_case = [](const std::vector<LatencySample>& xs, std::optional<PipelineKind>& variant) {
    std::map<std::int64_t, std::pair<double, std::size_t>> acc;
    for (const auto& s : xs) {
      if (variant && *variant != s.variant) {
        throw std::invalid_argument("per_case_deltas needs samples of a single variant");
      }
      variant = s.variant;
      auto& slot = acc[s.case_id];
      slot.first += s.seconds;
      slot.second += 1;
    }
    std::map<std::int64_t, double> out;
    for (const auto& [id, sum] : acc) out[id] = sum.first / static_cast<double>(sum.second);
    return out;
  };
  std::optional<PipelineKind> variant;
  const auto ma = per_case(a, variant);
  const auto mb = per_case(b, variant);

  std::vector<std::int64_t> missing;
  for (const auto& [id, v] : ma) {
    if (!mb.count(id)) missing.push_back(id);
  }
  for (const auto& [id, v] : mb) {
    if (!ma.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string ids;
    for (auto id : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    throw std::invalid_argument("unmatched case ids: " + ids);
  }
  std::vector<DeltaReport> out;
  for (const auto& [id, va] : ma) {
    const double vb = mb.at(id);
    out.push_back({id, vb - va, pct_change(va, vb)});
  }
  return out;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges; last bin is closed on the right
  std::vector<std::size_t> counts;
};

// Equal-width bins between min and max; Sturges' rule when bins == 0.
inline Histogram histogram(const std::vector<double>& xs, std::size_t bins = 0) {
  Histogram h;
  if (xs.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (bins == 0) {
    bins = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(xs.size())))) + 1;
  }
  if (hi == lo) bins = 1;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + width * static_cast<double>(i));
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double x : xs) {
    std::size_t b = width > 0 ? static_cast<std::size_t>((x - lo) / width) : 0;
    h.counts[std::min(b, bins - 1)] += 1;
  }
  return h;
}

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Tukey hinges: with an odd count the median belongs to both halves.
inline BoxStats box_stats(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("box_stats of an empty sample");
  std::sort(xs.begin(), xs.end());
  auto median_of = [&xs](std::size_t b, std::size_t e) {
    const std::size_t n = e - b;
    const std::size_t mid = b + n / 2;
    return n % 2 ? xs[mid] : (xs[mid - 1] + xs[mid]) / 2.0;
  };
  const std::size_t n = xs.size();
  BoxStats s;
  s.min = xs.front();
  s.max = xs.back();
  s.median = median_of(0, n);
  if (n == 1) {
    s.q1 = s.q3 = xs[0];
  } else {
    const std::size_t half = (n + 1) / 2;
    s.q1 = median_of(0, half);
    s.q3 = median_of(n - half, n);
  }
  return s;
}

// ---------------------------------------------------------------------------
// hallucination scoring

struct Detector {
  std::string name;
  std::string pattern;
  std::regex re;

  Detector(std::string n, std::string p)
      : name(std::move(n)), pattern(std::move(p)), re(pattern, std::regex::icase | std::regex::ECMAScript) {}
};

namespace detail {
inline const std::string kMonth =
    "(?:January|February|March|April|May|June|July|August|September|October|November|December|"
    "Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sept|Sep|Oct|Nov|Dec)\\.?";
inline const std::string kNumber =
    "(?:\\d+|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve)";
inline const std::string kRangeSep = "\\s*(?:-|\xE2\x80\x93|\xE2\x80\x94|to|until|through)\\s*";
inline const std::string kDay = "\\d{1,2}(?:st|nd|rd|th)?";
inline const std::string kMonthDate = kMonth + "\\s+" + kDay + "(?:,?\\s*\\d{4})?";
inline const std::string kIsoDate = "\\d{4}-\\d{2}-\\d{2}";
}  // namespace detail

// Built-in fabrication detectors: date spans, single calendar dates,
// standalone years 1900-2099, "<count> times" and durations.
inline std::vector<Detector> default_detectors() {
  using namespace detail;
  const std::string any_date = "(?:" + kMonthDate + "|" + kIsoDate + ")";
  return {
      Detector("date-span", "\\b" + any_date + kRangeSep + "(?:" + any_date + "|" + kDay + ",\\s*\\d{4})" +
                                "|\\b(?:19|20)\\d{2}" + kRangeSep + "(?:19|20)\\d{2}\\b"),
      Detector("calendar-date", "\\b(?:" + kMonthDate + "|" + kDay + "\\s+(?:of\\s+)?" + kMonth +
                                    "(?:,?\\s*\\d{4})?|" + kIsoDate + "|\\d{1,2}/\\d{1,2}/\\d{2,4})\\b"),
      Detector("year", "\\b(?:19|20)\\d{2}\\b"),
      Detector("count", "\\b" + kNumber + "\\s+times\\b"),
      Detector("duration", "\\b" + kNumber + "\\s+(?:years?|months?|weeks?|days?)(?:(?:\\s*,\\s*|\\s+and\\s+|\\s+)" +
                               kNumber + "\\s+(?:months?|weeks?|days?))?\\b"),
  };
}

struct FactSet {
  std::vector<std::string> allowed_facts;
  std::vector<Detector> detectors = default_detectors();

  // {"allowed": [..], "detectors": [{"name", "pattern"}]}; custom detectors
  // are added to the built-in ones.
  static FactSet from_json(const nlohmann::json& j) {
    FactSet f;
    if (j.contains("allowed")) f.allowed_facts = j.at("allowed").get<std::vector<std::string>>();
    if (j.contains("detectors")) {
      for (const auto& d : j.at("detectors")) {
        f.detectors.emplace_back(d.at("name").get<std::string>(), d.at("pattern").get<std::string>());
      }
    }
    return f;
  }
};

struct Violation {
  std::string detector;
  std::string matched_text;
};

struct HallucinationVerdict {
  std::string question_id;
  bool hallucinated = false;
  std::vector<Violation> violations;
};

namespace detail {
inline std::string collapse(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (text::is_space(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}
}  // namespace detail

// Every detector match not found (case-insensitively) inside an allowed fact
// is a violation.
inline HallucinationVerdict score_hallucination(std::string_view answer, const FactSet& facts,
                                                std::string question_id = {}) {
  HallucinationVerdict v;
  v.question_id = std::move(question_id);
  std::vector<std::string> folded;
  for (const auto& f : facts.allowed_facts) folded.push_back(text::lower(detail::collapse(f)));
  const std::string body(answer);
  for (const auto& d : facts.detectors) {
    for (auto it = std::sregex_iterator(body.begin(), body.end(), d.re); it != std::sregex_iterator(); ++it) {
      const std::string hit = it->str();
      if (hit.empty()) continue;
      const std::string key = text::lower(detail::collapse(hit));
      const bool exonerated = std::any_of(folded.begin(), folded.end(),
                                          [&](const std::string& f) { return f.find(key) != std::string::npos; });
      if (!exonerated) v.violations.push_back({d.name, hit});
    }
  }
  v.hallucinated = !v.violations.empty();
  return v;
}

// ---------------------------------------------------------------------------
// suite runner

struct SuiteCase {
  std::int64_t case_id = 0;
  std::string prompt;
  std::optional<FactSet> facts;
};

struct SuiteConfig {
  std::string name = "suite";
  std::vector<SuiteCase> cases;
  std::vector<PipelineKind> variants{PipelineKind::Standard, PipelineKind::RAG, PipelineKind::HyDE};
  std::vector<std::string> model_labels{"default"};
  std::size_t repetitions = 1;

  // {"name", "variants": [...], "models": [{"label", ...}], "repetitions",
  //  "cases": [{"case_id", "prompt", "facts": {...}}]}
  static SuiteConfig from_json(const nlohmann::json& j) {
    SuiteConfig c;
    c.name = j.value("name", std::string("suite"));
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) c.variants.push_back(pipeline_from_string(v.get<std::string>()));
    }
    if (j.contains("models")) {
      c.model_labels.clear();
      for (const auto& m : j.at("models")) c.model_labels.push_back(m.at("label").get<std::string>());
    }
    c.repetitions = j.value("repetitions", std::size_t{1});
    for (const auto& jc : j.at("cases")) {
      SuiteCase sc;
      sc.case_id = jc.at("case_id").get<std::int64_t>();
      sc.prompt = jc.at("prompt").get<std::string>();
      if (jc.contains("facts")) sc.facts = FactSet::from_json(jc.at("facts"));
      c.cases.push_back(std::move(sc));
    }
    if (c.variants.empty() || c.model_labels.empty() || c.repetitions == 0) {
      throw std::invalid_argument("suite needs at least one variant, model label and repetition");
    }
    return c;
  }
};

struct SampleRow {
  std::int64_t case_id = 0;
  PipelineKind variant = PipelineKind::Standard;
  std::string model_label;
  std::size_t rep = 0;
  std::optional<double> seconds;
  std::optional<int> llm_calls;
  std::optional<bool> hallucinated;
  std::string error;

  bool ok() const { return error.empty() && seconds.has_value(); }
};

inline constexpr const char* kSamplesHeader = "case_id,variant,model_label,rep,seconds,llm_calls,hallucinated,error";

namespace detail {
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back().push_back(c);
    }
  }
  return out;
}

inline std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}
}  // namespace detail

inline std::string samples_csv(const std::vector<SampleRow>& rows) {
  std::string out = std::string(kSamplesHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.case_id) + "," + std::string(to_string(r.variant)) + "," +
           detail::csv_field(r.model_label) + "," + std::to_string(r.rep) + "," +
           (r.seconds ? detail::fmt_double(*r.seconds) : "") + "," +
           (r.llm_calls ? std::to_string(*r.llm_calls) : "") + "," +
           (r.hallucinated ? (*r.hallucinated ? "true" : "false") : "") + "," +
           detail::csv_field(r.error) + "\n";
  }
  return out;
}

inline std::vector<SampleRow> parse_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSamplesHeader) {
    throw std::runtime_error("samples.csv: unexpected header");
  }
  std::vector<SampleRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A quoted field may span lines; keep reading until the quotes balance.
    while (std::count(line.begin(), line.end(), '"') % 2 != 0) {
      std::string more;
      if (!std::getline(in, more)) throw std::runtime_error("samples.csv: unterminated quoted field");
      line += "\n" + more;
    }
    auto f = detail::csv_split(line);
    if (f.size() != 8) throw std::runtime_error("samples.csv: expected 8 fields: " + line);
    SampleRow r;
    r.case_id = std::stoll(f[0]);
    r.variant = pipeline_from_string(f[1]);
    r.model_label = f[2];
    r.rep = static_cast<std::size_t>(std::stoull(f[3]));
    if (!f[4].empty()) r.seconds = std::stod(f[4]);
    if (!f[5].empty()) r.llm_calls = std::stoi(f[5]);
    if (!f[6].empty()) r.hallucinated = f[6] == "true";
    r.error = f[7];
    rows.push_back(std::move(r));
  }
  return rows;
}

// Summary and plotting series derived purely from sample rows.
inline nlohmann::json summarize(const std::vector<SampleRow>& rows) {
  using nlohmann::json;
  std::vector<std::string> labels;
  std::vector<PipelineKind> variants;
  for (const auto& r : rows) {
    if (std::find(labels.begin(), labels.end(), r.model_label) == labels.end()) labels.push_back(r.model_label);
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
  }
  auto group = [&](PipelineKind v, const std::string& l) {
    std::vector<const SampleRow*> out;
    for (const auto& r : rows) {
      if (r.variant == v && r.model_label == l) out.push_back(&r);
    }
    return out;
  };
  auto group_name = [](PipelineKind v, const std::string& l) {
    return json{{"variant", std::string(to_string(v))}, {"model_label", l}};
  };

  json summary{{"rows", rows.size()}};
  std::size_t errors = 0;
  for (const auto& r : rows) errors += r.ok() ? 0 : 1;
  summary["errors"] = errors;

  json stats = json::array();
  json hall = json::array();
  json histograms = json::array();
  json boxplots = json::array();
  std::vector<std::pair<json, double>> means;
  std::size_t judged_total = 0;
  std::size_t hallucinated_total = 0;
  for (auto v : variants) {
    for (const auto& l : labels) {
      auto g = group(v, l);
      if (g.empty()) continue;
      std::vector<double> secs;
      std::size_t judged = 0;
      std::size_t bad = 0;
      for (const auto* r : g) {
        if (r->ok()) secs.push_back(*r->seconds);
        if (r->hallucinated) {
          ++judged;
          bad += *r->hallucinated ? 1 : 0;
        }
      }
      if (!secs.empty()) {
        const auto s = mean_sd(secs);
        json entry = group_name(v, l);
        entry["n"] = s.n;
        entry["mean"] = s.mean;
        entry["sd"] = s.sd;
        stats.push_back(entry);
        means.emplace_back(group_name(v, l), s.mean);

        const auto h = histogram(secs);
        json hj = group_name(v, l);
        hj["edges"] = h.edges;
        hj["counts"] = h.counts;
        histograms.push_back(hj);
        const auto b = box_stats(secs);
        json bj = group_name(v, l);
        bj["min"] = b.min;
        bj["q1"] = b.q1;
        bj["median"] = b.median;
        bj["q3"] = b.q3;
        bj["max"] = b.max;
        boxplots.push_back(bj);
      }
      json hj = group_name(v, l);
      hj["judged"] = judged;
      hj["hallucinated"] = bad;
      hj["rate"] = judged ? json(static_cast<double>(bad) / static_cast<double>(judged)) : json(nullptr);
      hall.push_back(hj);
      judged_total += judged;
      hallucinated_total += bad;
    }
  }
  summary["stats"] = stats;

  json pct = json::array();
  for (const auto& [base, base_mean] : means) {
    for (const auto& [next, next_mean] : means) {
      if (base == next) continue;
      pct.push_back({{"base", base}, {"new", next}, {"pct", pct_change(base_mean, next_mean)}});
    }
  }
  summary["pct_change"] = pct;

  json deltas = json::array();
  for (auto v : variants) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = i + 1; j < labels.size(); ++j) {
        std::vector<LatencySample> a, b;
        for (const auto* r : group(v, labels[i])) {
          if (r->ok()) a.push_back({r->case_id, v, labels[i], *r->seconds});
        }
        for (const auto* r : group(v, labels[j])) {
          if (r->ok()) b.push_back({r->case_id, v, labels[j], *r->seconds});
        }
        json d{{"variant", std::string(to_string(v))}, {"base_label", labels[i]}, {"new_label", labels[j]}};
        try {
          json cases = json::array();
          for (const auto& dr : per_case_deltas(a, b)) {
            cases.push_back({{"case_id", dr.case_id}, {"abs_delta_s", dr.abs_delta_s}, {"rel_delta_pct", dr.rel_delta_pct}});
          }
          d["cases"] = cases;
        } catch (const std::exception& e) {
          d["cases"] = json::array();
          d["error"] = e.what();
        }
        deltas.push_back(d);
      }
    }
  }
  summary["deltas"] = deltas;
  summary["hallucination"] = hall;
  summary["hallucination_rate"] =
      judged_total ? json(static_cast<double>(hallucinated_total) / static_cast<double>(judged_total)) : json(nullptr);
  summary["series"] = {{"histograms", histograms}, {"boxplots", boxplots}};
  return summary;
}

struct SuiteReport {
  std::string name;
  std::vector<SampleRow> rows;
  nlohmann::json summary;
};

using SuiteRunner = std::function<ChatResponse(const SuiteCase&, PipelineKind, const std::string& model_label)>;

// Runs every (case, variant, label, rep) strictly one after another. A
// failing run becomes an error row; the suite carries on.
inline SuiteReport run_suite(const SuiteConfig& config, const SuiteRunner& runner) {
  SuiteReport report;
  report.name = config.name;
  for (const auto& label : config.model_labels) {
    for (auto variant : config.variants) {
      for (const auto& c : config.cases) {
        for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
          SampleRow row;
          row.case_id = c.case_id;
          row.variant = variant;
          row.model_label = label;
          row.rep = rep;
          try {
            const auto response = runner(c, variant, label);
            row.seconds = response.latency_s;
            row.llm_calls = response.llm_calls;
            if (c.facts) {
              row.hallucinated = score_hallucination(response.answer, *c.facts, std::to_string(c.case_id)).hallucinated;
            }
          } catch (const std::exception& e) {
            row.error = e.what();
            if (row.error.empty()) row.error = "error";
          }
          report.rows.push_back(std::move(row));
        }
      }
    }
  }
  report.summary = summarize(report.rows);
  report.summary["name"] = config.name;
  return report;
}

// Writes samples.csv, summary.json and series.json into dir.
inline void write_report(const SuiteReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "samples.csv", std::ios::binary | std::ios::trunc);
    out << samples_csv(report.rows);
  }
  nlohmann::json summary = report.summary;
  const nlohmann::json series = summary.value("series", nlohmann::json::object());
  summary.erase("series");
  {
    std::ofstream out(dir / "summary.json", std::ios::binary | std::ios::trunc);
    out << summary.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "series.json", std::ios::binary | std::ios::trunc);
    out << series.dump(2) << "\n";
  }
}

// Recomputes the summary of a run directory from its samples.csv.
inline nlohmann::json load_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "samples.csv", std::ios::binary);
  if (!in) throw std::runtime_error("no samples.csv in " + dir.string());
  auto summary = summarize(parse_samples_csv(in));
  std::ifstream prior(dir / "summary.json");
  if (prior) {
    try {
      auto j = nlohmann::json::parse(prior);
      if (j.contains("name")) summary["name"] = j["name"];
    } catch (const nlohmann::json::parse_error&) {
    }
  }
  return summary;
}

}  // namespace jarvis
