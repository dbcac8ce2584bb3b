#pragma once

#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "spdcas/encounters.hpp"
#include "spdcas/error.hpp"
#include "spdcas/simulator.hpp"

namespace spdcas {

// ---------------------------------------------------------------------------
// Per-encounter reduction

struct EncounterOutcome {
  std::string id;
  std::size_t repetitions = 0;
  std::size_t nmacs = 0;
  bool alerted = false;  // in any repetition

  double p_nmac() const { return repetitions ? static_cast<double>(nmacs) / static_cast<double>(repetitions) : 0.0; }
};

/// Outcomes in order of first appearance.
inline std::vector<EncounterOutcome> per_encounter(const std::vector<SimResult>& results) {
  std::vector<EncounterOutcome> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : results) {
    auto [it, inserted] = index.try_emplace(r.id, out.size());
    if (inserted) out.push_back({r.id});
    auto& o = out[it->second];
    ++o.repetitions;
    if (r.nmac) ++o.nmacs;
    if (r.alerted) o.alerted = true;
  }
  return out;
}

using WeightMap = std::unordered_map<std::string, double>;

inline WeightMap weights_of(const std::vector<Encounter>& set) {
  WeightMap w;
  for (const auto& e : set) w[e.id] = e.weight;
  return w;
}

namespace detail {

inline double weight_for(const WeightMap& w, const std::string& id) {
  if (w.empty()) return 1.0;
  auto it = w.find(id);
  if (it == w.end()) throw InvalidArgument("no weight for encounter " + id);
  if (!(it->second > 0.0)) throw InvalidArgument("weight of encounter " + id + " must be positive");
  return it->second;
}

}  // namespace detail

/// Weighted P(NMAC): sum_i w_i P_i over the encounters present. Empty
/// weights mean equal weights.
inline double weighted_pnmac(const std::vector<SimResult>& results, const WeightMap& weights = {}) {
  double s = 0.0;
  for (const auto& o : per_encounter(results)) s += detail::weight_for(weights, o.id) * o.p_nmac();
  return s;
}

/// sum w P(NMAC | CAS) / sum w P(NMAC | no CAS).
inline double risk_ratio(const std::vector<SimResult>& cas, const std::vector<SimResult>& nocas,
                         const WeightMap& weights = {}) {
  const auto a = per_encounter(cas), b = per_encounter(nocas);
  std::unordered_map<std::string, const EncounterOutcome*> bi;
  for (const auto& o : b) bi[o.id] = &o;
  if (a.size() != b.size()) throw InvalidArgument("result sets cover different encounters");
  double num = 0.0, den = 0.0;
  for (const auto& o : a) {
    auto it = bi.find(o.id);
    if (it == bi.end()) throw InvalidArgument("encounter " + o.id + " missing from the baseline results");
    const double w = detail::weight_for(weights, o.id);
    num += w * o.p_nmac();
    den += w * it->second->p_nmac();
  }
  if (den == 0.0) throw UndefinedRatio("risk ratio undefined: baseline has no NMACs");
  return num / den;
}

/// Weighted fraction of encounters that alerted in any repetition.
inline double alert_rate(const std::vector<SimResult>& results, const WeightMap& weights = {}) {
  if (results.empty()) throw InvalidArgument("no results");
  double num = 0.0, den = 0.0;
  for (const auto& o : per_encounter(results)) {
    const double w = detail::weight_for(weights, o.id);
    den += w;
    if (o.alerted) num += w;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Pilot response model

/// Subset mask (H = 1, V = 2, S = 4) to a value.
using SubsetMap = std::map<unsigned, double>;

inline unsigned dims_mask(int n_dims) {
  if (n_dims == 2) return 3u;
  if (n_dims == 3) return 7u;
  throw InvalidArgument("n_dims must be 2 or 3");
}

inline double response_probability(double p_no_response, int n_dims) {
  if (!(p_no_response >= 0.0 && p_no_response <= 1.0)) throw InvalidArgument("p_no_response must be in [0, 1]");
  dims_mask(n_dims);
  return 1.0 - std::pow(p_no_response, 1.0 / n_dims);
}

/// Probability of each responding subset. Two dimensions are H and V; three
/// add S.
inline SubsetMap response_subset_probs(double p_no_response, int n_dims) {
  const double p = response_probability(p_no_response, n_dims);
  const unsigned all = dims_mask(n_dims);
  SubsetMap out;
  for (unsigned m = 0; m <= all; ++m) {
    if ((m & ~all) != 0) continue;
    const int k = std::popcount(m);
    // The empty subset is exactly p_no_response.
    out[m] = k == 0 ? p_no_response : std::pow(p, k) * std::pow(1.0 - p, n_dims - k);
  }
  return out;
}

inline double weighted_system_pnmac(const SubsetMap& pnmac_by_subset, const SubsetMap& subset_probs) {
  for (const auto& [m, _] : subset_probs)
    if (!pnmac_by_subset.contains(m)) throw InvalidArgument("P(NMAC) missing for subset " + mask_label(m));
  for (const auto& [m, _] : pnmac_by_subset)
    if (!subset_probs.contains(m)) throw InvalidArgument("no probability for subset " + mask_label(m));
  double s = 0.0;
  for (const auto& [m, p] : subset_probs) s += p * pnmac_by_subset.at(m);
  return s;
}

/// Entries of `all` whose subsets lie within `mask`.
inline SubsetMap restrict_subsets(const SubsetMap& all, unsigned mask) {
  SubsetMap out;
  for (const auto& [m, v] : all)
    if ((m & ~mask) == 0) out[m] = v;
  return out;
}

struct ResponsePoint {
  double p_no_response = 0.0;
  double with_speed = 0.0;
  double without_speed = 0.0;
};

/// System P(NMAC) across a p_no_response sweep, normalized by the
/// no-response P(NMAC) so both curves end at 1 when p = 1.
inline std::vector<ResponsePoint> response_curve(const SubsetMap& pnmac_by_subset, const std::vector<double>& sweep) {
  if (!pnmac_by_subset.contains(0u)) throw InvalidArgument("P(NMAC) missing for subset none");
  const double none = pnmac_by_subset.at(0u);
  if (!(none > 0.0)) throw UndefinedRatio("no-response P(NMAC) must be positive to normalize");
  const SubsetMap with = restrict_subsets(pnmac_by_subset, 7u), without = restrict_subsets(pnmac_by_subset, 3u);
  std::vector<ResponsePoint> out;
  out.reserve(sweep.size());
  for (double p : sweep) {
    out.push_back({p, weighted_system_pnmac(with, response_subset_probs(p, 3)) / none,
                   weighted_system_pnmac(without, response_subset_probs(p, 2)) / none});
  }
  return out;
}

inline std::vector<double> sweep_points(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw InvalidArgument("sweep step must be in (0, 1]");
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<double> out;
  for (std::size_t i = 0; i <= n; ++i) out.push_back(std::min(1.0, static_cast<double>(i) * step));
  if (out.back() != 1.0) out.push_back(1.0);
  return out;
}

/// Reads "subset,pnmac" rows; subsets are labels such as None, H, V+S.
inline SubsetMap read_subset_csv(std::istream& in, const std::string& source = "<stream>") {
  SubsetMap out;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(source, lineno, "expected two comma-separated columns");
    const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
    if (header) {
      header = false;
      if (a != "subset" || b != "pnmac") throw ParseError(source, lineno, "header must be 'subset,pnmac'");
      continue;
    }
    try {
      const unsigned m = parse_mask_label(a);
      std::size_t used = 0;
      const double v = std::stod(b, &used);
      if (used != b.size() || !(v >= 0.0 && v <= 1.0)) throw InvalidArgument("pnmac must be a probability");
      if (!out.emplace(m, v).second) throw InvalidArgument("subset " + a + " repeated");
    } catch (const std::logic_error& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heading histogram

struct HeadingHistogram {
  double bin_width_deg = 10.0;
  std::vector<std::size_t> counts;

  std::size_t total() const {
    std::size_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  /// Count of NMACs whose heading falls in [lo, hi) degrees, by bin start.
  std::size_t count_in(double lo_deg, double hi_deg) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double start = static_cast<double>(i) * bin_width_deg;
      if (start >= lo_deg - 1e-9 && start + bin_width_deg <= hi_deg + 1e-9) s += counts[i];
    }
    return s;
  }
};

/// NMAC results binned by the relative heading at CPA the encounter was built
/// with. Each NMAC result counts once.
inline HeadingHistogram nmac_heading_histogram(const std::vector<SimResult>& results,
                                               const std::vector<Encounter>& encounters, double bin_width_deg) {
  const double bins_f = 360.0 / bin_width_deg;
  if (!(bin_width_deg > 0.0) || std::abs(bins_f - std::round(bins_f)) > 1e-9)
    throw InvalidArgument("bin width must divide 360");
  HeadingHistogram h{bin_width_deg, std::vector<std::size_t>(static_cast<std::size_t>(std::llround(bins_f)), 0)};
  std::unordered_map<std::string, double> heading;
  for (const auto& e : encounters) heading[e.id] = e.cpa.rel_heading;
  for (const auto& r : results) {
    if (!r.nmac) continue;
    auto it = heading.find(r.id);
    if (it == heading.end()) throw InvalidArgument("result for unknown encounter " + r.id);
    double deg = std::fmod(it->second * 180.0 / std::numbers::pi, 360.0);
    if (deg < 0.0) deg += 360.0;
    auto bin = static_cast<std::size_t>(deg / bin_width_deg);
    if (bin >= h.counts.size()) bin = h.counts.size() - 1;
    ++h.counts[bin];
  }
  return h;
}

inline void write_histogram_csv(std::ostream& os, const HeadingHistogram& h) {
  os << "bin_start_deg,bin_end_deg,nmac_count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    os << format_number(static_cast<double>(i) * h.bin_width_deg) << ','
       << format_number(static_cast<double>(i + 1) * h.bin_width_deg) << ',' << h.counts[i] << '\n';
}

// ---------------------------------------------------------------------------
// Alerting profile

inline constexpr std::array<std::string_view, 8> kProfileCategories{"COC", "H",   "V",   "S",
                                                                    "V+H", "V+S", "H+S", "V+H+S"};

/// Category label of an alerted-dimension mask.
inline std::string_view profile_category(unsigned mask) {
  switch (mask & 7u) {
    case 0: return "COC";
    case 1: return "H";
    case 2: return "V";
    case 4: return "S";
    case 3: return "V+H";
    case 6: return "V+S";
    case 5: return "H+S";
    default: return "V+H+S";
  }
}

struct ProfileParams {
  double own_speed = 100.0;        // ft/s
  double intruder_speed = 100.0;   // ft/s
  double intruder_heading = std::numbers::pi;  // relative to the ownship, clockwise
  double extent_nmi = 3.0;
  double cell_nmi = 0.1;
  double duration = 0.0;           // 0 picks a traversal time from the extent
  SensorNoise sensor;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

inline constexpr double kFeetPerNmi = 6076.12;

struct AlertingProfile {
  std::vector<double> cross_track_nmi;  // columns, positive right of track
  std::vector<double> along_track_nmi;  // rows, positive ahead
  std::vector<unsigned> masks;          // row-major [along][cross]

  std::string_view category(std::size_t row, std::size_t col) const {
    return profile_category(masks.at(row * cross_track_nmi.size() + col));
  }
};

/// Which logics alert when an intruder starts in each cell around an
/// unresponsive ownship flying north at co-altitude.
inline AlertingProfile alerting_profile(const std::vector<const QTable*>& tables, const ProfileParams& p) {
  if (!(p.extent_nmi > 0.0) || !(p.cell_nmi > 0.0)) throw InvalidArgument("extent and cell size must be positive");
  const CasSystem cas(tables);
  AlertingProfile prof;
  const auto n = static_cast<std::size_t>(std::floor(2.0 * p.extent_nmi / p.cell_nmi + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = -p.extent_nmi + static_cast<double>(i) * p.cell_nmi;
    prof.cross_track_nmi.push_back(c);
    prof.along_track_nmi.push_back(c);
  }
  prof.masks.assign(n * n, 0);
  SimConfig cfg;
  cfg.sensor = p.sensor;
  cfg.pilot.p_no_response = 1.0;
  cfg.record_timeline = false;
  const double closure = std::max(1.0, p.own_speed + p.intruder_speed);
  const double duration =
      p.duration > 0.0 ? p.duration : std::ceil(2.0 * std::sqrt(2.0) * p.extent_nmi * kFeetPerNmi / closure) + 10.0;
  detail::parallel_ranges(n * n, p.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t row = k / n, col = k % n;
      Encounter e;
      e.id = "cell";
      e.duration = duration;
      e.ownship = {0.0, 0.0, 1000.0, 0.0, p.own_speed, 0.0};
      e.intruder = {prof.cross_track_nmi[col] * kFeetPerNmi, prof.along_track_nmi[row] * kFeetPerNmi, 1000.0,
                    relative_heading(0.0, p.intruder_heading), p.intruder_speed, 0.0};
      prof.masks[k] = simulate(e, cas, CasSystem{}, cfg, derive_seed(p.seed, k)).alerted_dims;
    }
  });
  return prof;
}

inline void write_profile_csv(std::ostream& os, const AlertingProfile& p) {
  os << "cross_track_nmi,along_track_nmi,category\n";
  for (std::size_t r = 0; r < p.along_track_nmi.size(); ++r)
    for (std::size_t c = 0; c < p.cross_track_nmi.size(); ++c)
      os << format_number(p.cross_track_nmi[c]) << ',' << format_number(p.along_track_nmi[r]) << ','
         << p.category(r, c) << '\n';
}

// ---------------------------------------------------------------------------
// Report

inline constexpr double kIcaoUnequippedTarget = 0.18;
inline constexpr double kIcaoEquippedTarget = 0.04;
inline constexpr double kAstmTarget = 0.18;

struct MetricsReport {
  std::size_t encounters = 0;
  std::size_t results = 0;
  std::size_t nmac_count = 0;
  double p_nmac = 0.0;
  std::optional<double> p_nmac_baseline;
  std::optional<double> risk_ratio;
  std::string risk_ratio_note;
  double alert_rate = 0.0;
  std::optional<HeadingHistogram> histogram;
  std::optional<double> p_no_response;
  SubsetMap subset_probs;
};

struct EvaluateInputs {
  const std::vector<SimResult>* results = nullptr;
  const std::vector<SimResult>* baseline = nullptr;   // optional no-CAS run
  const std::vector<Encounter>* encounters = nullptr; // optional; supplies weights and headings
  double bin_width_deg = 10.0;
  std::optional<double> p_no_response;
  int n_dims = 3;
};

inline MetricsReport evaluate(const EvaluateInputs& in) {
  if (!in.results || in.results->empty()) throw InvalidArgument("no results to evaluate");
  MetricsReport rep;
  const WeightMap w = in.encounters ? weights_of(*in.encounters) : WeightMap{};
  const auto outcomes = per_encounter(*in.results);
  rep.encounters = outcomes.size();
  rep.results = in.results->size();
  for (const auto& r : *in.results) rep.nmac_count += r.nmac ? 1 : 0;
  double wsum = 0.0;
  for (const auto& o : outcomes) wsum += detail::weight_for(w, o.id);
  rep.p_nmac = weighted_pnmac(*in.results, w) / wsum;
  rep.alert_rate = alert_rate(*in.results, w);
  if (in.baseline) {
    rep.p_nmac_baseline = weighted_pnmac(*in.baseline, w) / wsum;
    try {
      rep.risk_ratio = risk_ratio(*in.results, *in.baseline, w);
    } catch (const UndefinedRatio& e) {
      rep.risk_ratio_note = e.what();
    }
  }
  if (in.encounters) rep.histogram = nmac_heading_histogram(*in.results, *in.encounters, in.bin_width_deg);
  if (in.p_no_response) {
    rep.p_no_response = in.p_no_response;
    rep.subset_probs = response_subset_probs(*in.p_no_response, in.n_dims);
  }
  return rep;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["encounters"] = r.encounters;
  j["results"] = r.results;
  j["nmac_count"] = r.nmac_count;
  j["p_nmac"] = r.p_nmac;
  j["p_nmac_baseline"] = optional_json(r.p_nmac_baseline);
  j["risk_ratio"] = optional_json(r.risk_ratio);
  if (!r.risk_ratio_note.empty()) j["risk_ratio_note"] = r.risk_ratio_note;
  j["alert_rate"] = r.alert_rate;
  nlohmann::json thresholds = nlohmann::json::array();
  for (auto [name, target] : {std::pair{"ICAO unequipped intruder", kIcaoUnequippedTarget},
                              std::pair{"ICAO equipped intruder", kIcaoEquippedTarget},
                              std::pair{"ASTM sUAS", kAstmTarget}}) {
    nlohmann::json t{{"name", name}, {"target", target}};
    t["meets"] = r.risk_ratio ? nlohmann::json(*r.risk_ratio <= target) : nlohmann::json(nullptr);
    thresholds.push_back(t);
  }
  j["thresholds"] = thresholds;
  if (r.histogram) {
    j["nmac_heading_histogram"] = {{"bin_width_deg", r.histogram->bin_width_deg}, {"counts", r.histogram->counts}};
  }
  if (r.p_no_response) {
    nlohmann::json probs = nlohmann::json::object();
    for (const auto& [m, p] : r.subset_probs) probs[mask_label(m)] = p;
    j["pilot_response"] = {{"p_no_response", *r.p_no_response}, {"subset_probs", probs}};
  }
  return j;
}

}  // namespace spdcas
