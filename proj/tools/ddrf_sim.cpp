#include "ddrf/noise.hpp"
#include "ddrf/register.hpp"
#include "ddrf/scheduler.hpp"
#include "ddrf/spectroscopy.hpp"
#include "ddrf/tomography.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ddrf;

namespace {

struct Manifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string header(const Manifest& m) {
  std::string h = "# ddrf_sim " + m.command + " seed=" + std::to_string(m.seed) + " config=" + m.config_path;
  for (const auto& o : m.overrides) h += " set:" + o;
  return h + "\n";
}

fs::path output_path(const Manifest& m, const std::string& name) {
  fs::path dir(m.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory not writable: " + m.out_dir);
  return dir / name;
}

void write_file(const Manifest& m, const std::string& name, const std::string& body) {
  const fs::path p = output_path(m, name);
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << body;
}

json manifest_json(const Manifest& m) {
  return {{"command", m.command}, {"config", m.config_path}, {"seed", m.seed}, {"overrides", m.overrides}};
}

// key path segments are separated by '.'; inside "spins" a segment may name a spin label.
void apply_override(json& doc, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
  const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
  json* node = &doc;
  std::stringstream ss(key);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(ss, seg, '.')) segs.push_back(seg);
  if (segs.empty()) throw ConfigError("empty override key");
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    json& cur = *node;
    if (cur.is_array()) {
      json* hit = nullptr;
      for (auto& el : cur)
        if (el.is_object() && el.value("label", "") == segs[i]) hit = &el;
      if (!hit) throw ConfigError("override path not found: " + key);
      node = hit;
    } else if (cur.is_object() && cur.contains(segs[i])) {
      node = &cur[segs[i]];
    } else {
      throw ConfigError("override path not found: " + key);
    }
  }
  json v;
  try {
    v = json::parse(raw);
  } catch (const json::exception&) {
    v = raw;
  }
  (*node)[segs.back()] = v;
}

RegisterConfig load(const Manifest& m) {
  std::ifstream in(m.config_path);
  if (!in) throw ConfigError("cannot open register config " + m.config_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed register config: ") + e.what());
  }
  for (const auto& o : m.overrides) apply_override(doc, o);
  return config_from_json(doc);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---- bell

struct BellOpts {
  std::string spin;
  std::string regime;
  int samples = 500;
  std::string t2star;
  bool no_crosstalk = false;
  bool no_optimize = false;
  double window = 5000;
};

int cmd_bell(const Manifest& m, const BellOpts& o) {
  const RegisterConfig cfg = load(m);
  NuclearSpinParams s = cfg.spin(o.spin);
  if (!o.regime.empty()) s = s.with_regime(o.regime);
  MonteCarloConfig mc;
  mc.samples = o.samples;
  mc.seed = m.seed;
  mc.crosstalk = !o.no_crosstalk;
  mc.crosstalk_window = o.window;
  mc.optimize_rabi = !o.no_optimize;
  if (o.t2star == "inf") {
    mc.dephasing = false;
  } else if (!o.t2star.empty()) {
    const double t = std::stod(o.t2star);
    s.t2_star_ms0 = s.t2_star_ms1 = t;
  }
  const BellSimResult r = simulate_bell_fidelity(cfg, s, mc);
  std::cout << header(m);
  std::cout << "spin " << o.spin << (o.regime.empty() ? "" : " (" + o.regime + ")") << "\n";
  std::cout << "bell_fidelity " << fmt9(r.mean) << " +- " << fmt9(r.stderr_) << "\n";
  std::cout << "rabi_hz " << fmt9(r.rabi_hz) << "\n";
  std::cout << "crosstalk";
  for (const auto& c : r.crosstalk) std::cout << ' ' << c;
  std::cout << "\n";
  json rep = manifest_json(m);
  rep["spin"] = o.spin;
  rep["regime"] = o.regime;
  rep["samples"] = mc.dephasing ? mc.samples : 1;
  rep["bell_fidelity"] = r.mean;
  rep["stderr"] = r.stderr_;
  rep["rabi_hz"] = r.rabi_hz;
  rep["readout_azimuth"] = r.azimuth;
  rep["crosstalk"] = r.crosstalk;
  write_file(m, "bell_" + o.spin + (o.regime.empty() ? "" : "_" + o.regime) + ".json", rep.dump(2) + "\n");
  return 0;
}

// ---- spectrum

struct SpectrumOpts {
  double from = 200000, to = 500000, step = 50;
  int n_pulses = 48;
  double tau_us = 1e6 / 54000;
  std::string spins = "all";
  int phases = 19;
  double threshold = 0.3;
  int m_range = 10;
};

int cmd_spectrum(const Manifest& m, const SpectrumOpts& o) {
  if (!(o.step > 0) || !(o.to >= o.from)) throw DegenerateInput("frequency range must satisfy from <= to, step > 0");
  const RegisterConfig cfg = load(m);
  std::vector<NuclearSpinParams> spins;
  if (o.spins == "all") {
    for (const auto& s : cfg.spins)
      if (s.species == Species::C13) spins.push_back(s);
  } else if (o.spins != "none") {
    for (const auto& l : split_list(o.spins)) spins.push_back(cfg.spin(l));
  }
  for (auto& s : spins) s.rabi = rabi_from_pi_duration(s.rf_pi_duration);
  SpectrumSequence seq{o.n_pulses, o.tau_us * 1e-6, cfg.larmor(), 0.0};
  std::vector<double> freqs;
  for (long k = 0;; ++k) {
    const double f = o.from + double(k) * o.step;
    if (f > o.to + 1e-9) break;
    freqs.push_back(f);
  }
  const auto pts = simulate_spectrum(spins, seq, freqs, phase_grid(o.phases));

  std::ostringstream csv;
  csv << header(m) << "rf_freq_hz,amplitude,phase_offset_rad\n";
  for (const auto& p : pts) csv << fmt9(p.rf_freq) << ',' << fmt9(p.amplitude) << ',' << fmt9(p.phase_offset) << '\n';
  write_file(m, "spectrum.csv", csv.str());

  std::ostringstream ann;
  ann << header(m) << "spin,kind,order,freq_hz\n";
  for (const auto& s : spins) {
    const auto r = resonance_frequencies(s.omega_m1, seq.tau, -o.m_range, o.m_range, -o.m_range, o.m_range - 1);
    for (std::size_t i = 0; i < r.conditional.size(); ++i) {
      const double f = r.conditional[i];
      if (f >= o.from && f <= o.to)
        ann << s.label << ",conditional," << (int(i) - o.m_range) << ',' << fmt9(f) << '\n';
    }
    for (std::size_t i = 0; i < r.unconditional.size(); ++i) {
      const double f = r.unconditional[i];
      if (f >= o.from && f <= o.to)
        ann << s.label << ",unconditional," << (int(i) - o.m_range) << ',' << fmt9(f) << '\n';
    }
  }
  write_file(m, "resonances.csv", ann.str());

  std::cout << header(m) << "dip_center_hz,min_amplitude,nearest_primary\n";
  for (const auto& d : find_dips(pts, o.threshold)) {
    std::string near = "-";
    for (const auto& s : spins)
      if (std::abs(s.omega_m1 - d.center) <= std::max(d.hi - d.lo, 2 * o.step)) near = s.label;
    std::cout << fmt9(d.center) << ',' << fmt9(d.min_amplitude) << ',' << near << '\n';
  }
  return 0;
}

// ---- ghz-predict

int cmd_ghz(const Manifest& m, const std::string& weight, bool perfect) {
  RegisterConfig cfg = load(m);
  if (cfg.ghz_order.empty()) throw ConfigError("config lacks ghz_order");
  std::map<std::string, double> bell = cfg.bell_fidelities;
  if (perfect) {
    cfg.electron_init_fidelity = 1;
    for (auto& s : cfg.spins) s.init_fidelity = 1, bell[s.label] = 1;
  }
  ChannelWeight w;
  if (weight == "gate-infidelity") w = ChannelWeight::gate_infidelity;
  else if (weight == "error-probability") w = ChannelWeight::error_probability;
  else throw DegenerateInput("unknown weight " + weight);
  const auto rows = predict_ghz(cfg, cfg.ghz_order, bell, w);
  std::ostringstream csv;
  csv << header(m) << "n_qubits,spin_added,init_fidelity,ghz_fidelity\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    csv << rows[i].n_qubits << ',' << cfg.ghz_order[i] << ',' << fmt9(rows[i].init_fidelity) << ','
        << fmt9(rows[i].ghz_fidelity) << '\n';
  std::cout << csv.str();
  write_file(m, "ghz_predict.csv", csv.str());
  return 0;
}

// ---- schedule

struct ScheduleOpts {
  std::string spins = "C5,C2,C6";
  double spacing = 0;
  std::string waveform;
  double sample_rate_mhz = 1.0;
  double rise_us = 7.5;
};

int cmd_schedule(const Manifest& m, const ScheduleOpts& o) {
  const RegisterConfig cfg = load(m);
  const auto labels = split_list(o.spins);
  if (labels.empty()) throw DegenerateInput("no spins given");
  std::vector<double> x, e;
  for (const auto& l : labels) {
    const auto& s = cfg.spin(l);
    if (!(s.gate_duration > 0)) throw ConfigError(l + ": no gate duration in config");
    x.push_back(s.gate_duration);
    e.push_back(s.rf_pi_duration);
  }
  const PulseSchedule s =
      schedule_echoes(labels, x, e, o.spacing > 0 ? std::optional<double>(o.spacing) : std::nullopt);
  json j = schedule_to_json(s);
  j["manifest"] = manifest_json(m);
  write_file(m, "schedule.json", j.dump(2) + "\n");
  double worst = 0;
  for (const auto& r : s.residuals) worst = std::max(worst, std::abs(r.residual));
  std::cout << header(m) << "spacing_us " << fmt9(s.spacing) << "\nops " << s.ops.size() << "\nmax_refocus_residual_us "
            << fmt9(worst) << "\n";

  if (!o.waveform.empty()) {
    if (!(o.sample_rate_mhz > 0)) throw DegenerateInput("sample rate must be positive");
    const double end = s.ops.back().start + s.ops.back().duration;
    std::ostringstream csv;
    csv << header(m) << "time_us";
    for (const auto& l : labels) csv << ',' << l;
    csv << '\n';
    const long n = long(std::floor(end * o.sample_rate_mhz)) + 1;
    for (long k = 0; k < n; ++k) {
      const double t = double(k) / o.sample_rate_mhz;
      csv << fmt9(t);
      for (const auto& l : labels) {
        double a = 0;
        for (const auto& op : s.ops)
          if (op.spin == l && t >= op.start - o.rise_us && t <= op.start + op.duration + o.rise_us &&
              op.duration > 2 * o.rise_us)
            a = std::max(a, erf_envelope(t, o.rise_us, op.start, op.duration));
        csv << ',' << fmt9(a);
      }
      csv << '\n';
    }
    write_file(m, o.waveform, csv.str());
  }
  return 0;
}

// ---- stark

int cmd_stark(const Manifest& m, double rabi, double rf, double omega, double detuning) {
  if (std::isnan(rf)) rf = omega + detuning;
  const double shift = ac_stark_shift(rabi, rf, omega);
  std::cout << header(m) << "ac_stark_shift_hz " << fmt9(shift) << "\n";
  return 0;
}

// ---- fit

std::pair<std::vector<double>, std::vector<double>> read_xy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<double> a, b;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string c0, c1;
    if (!std::getline(ss, c0, ',') || !std::getline(ss, c1, ',')) continue;
    try {
      std::size_t used = 0;
      const double x = std::stod(c0, &used);
      const double y = std::stod(c1);
      a.push_back(x);
      b.push_back(y);
    } catch (const std::exception&) {
      if (!a.empty()) throw DegenerateInput("non-numeric row in " + path);
    }
  }
  return {a, b};
}

int cmd_fit(const Manifest& m, const std::string& input, const std::string& model, std::optional<double> fa,
            std::optional<double> fb) {
  const auto [x, y] = read_xy(input);
  json rep = manifest_json(m);
  rep["model"] = model;
  std::cout << header(m);
  if (model == "decay") {
    const DecayFit f = fit_decay(x, y, fa, fb);
    rep["A"] = f.A, rep["B"] = f.B, rep["T"] = f.T, rep["n"] = f.n;
    rep["stderr"] = {{"A", f.sA}, {"B", f.sB}, {"T", f.sT}, {"n", f.sn}};
    std::cout << "A " << fmt9(f.A) << " +- " << fmt9(f.sA) << "\nB " << fmt9(f.B) << " +- " << fmt9(f.sB) << "\nT "
              << fmt9(f.T) << " +- " << fmt9(f.sT) << "\nn " << fmt9(f.n) << " +- " << fmt9(f.sn) << "\n";
  } else if (model == "cosine") {
    const CosineFit f = fit_cosine(x, y);
    rep["a"] = f.a, rep["amplitude"] = f.amplitude, rep["phi0"] = f.phi0;
    std::cout << "a " << fmt9(f.a) << "\namplitude " << fmt9(f.amplitude) << "\nphi0 " << fmt9(f.phi0) << "\n";
  } else {
    throw DegenerateInput("unknown model " + model);
  }
  write_file(m, "fit_" + model + ".json", rep.dump(2) + "\n");
  return 0;
}

// ---- tomo

int cmd_tomo(const Manifest& m, const std::string& shots_path, const std::string& kind, const std::string& corr) {
  std::ifstream in(shots_path);
  if (!in) throw ConfigError("cannot open " + shots_path);
  auto recs = expectations_from_shots(read_shots_csv(in));
  if (!corr.empty()) {
    std::vector<double> c;
    for (const auto& v : split_list(corr)) c.push_back(std::stod(v));
    for (auto& r : recs) r = correct_expectation(r, c);
  }
  std::ostringstream csv;
  csv << header(m);
  write_expectations_csv(csv, recs);
  write_file(m, "expectations.csv", csv.str());
  const ExpectationMap map = to_map(recs);
  FidelityEstimate f{};
  if (kind == "bell-en") {
    f = bell_fidelity(map, BellKind::electron_nuclear);
  } else if (kind == "bell-nn") {
    f = bell_fidelity(map, BellKind::nuclear_nuclear);
  } else if (kind == "ghz") {
    if (recs.empty()) throw NoDetections("no shot records");
    f = ghz_fidelity(map, ghz_operator_set(int(recs.front().pauli.size())));
  } else {
    throw DegenerateInput("unknown state kind " + kind);
  }
  std::cout << header(m) << "fidelity " << fmt9(f.value) << " +- " << fmt9(f.stderr_) << "\n";
  if (f.stderr_ > 0) {
    const auto w = witness_ghz(f.value, f.stderr_);
    std::cout << "witness " << (w.entangled ? "violated" : "not violated") << " significance " << fmt9(w.significance)
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DDRF nuclear-spin register simulator"};
  app.require_subcommand(1);
  Manifest man;
  man.config_path = default_config_path();
  app.add_option("--config", man.config_path, "register config (JSON)")->envname("DDRF_SIM_CONFIG");
  app.add_option("--seed", man.seed, "random seed");
  app.add_option("--out", man.out_dir, "output directory");
  app.add_option("--set", man.overrides, "config override key=value (dotted path)");

  BellOpts bo;
  auto* bell = app.add_subcommand("bell", "Monte Carlo Bell-state fidelity");
  bell->add_option("--spin", bo.spin, "target spin; the gate model is DDRF, so only DDRF-gated spins (C1, C7, C8, N14) are meaningful")->required();
  bell->add_option("--regime", bo.regime);
  bell->add_option("--samples", bo.samples);
  bell->add_option("--t2star", bo.t2star, "T2* in ms for the target, or inf");
  bell->add_flag("--no-crosstalk", bo.no_crosstalk);
  bell->add_flag("--no-optimize", bo.no_optimize, "skip the Rabi calibration search");
  bell->add_option("--window", bo.window, "crosstalk window (Hz)");

  SpectrumOpts so;
  auto* spec = app.add_subcommand("spectrum", "DDRF spectroscopy sweep");
  spec->add_option("--from", so.from);
  spec->add_option("--to", so.to);
  spec->add_option("--step", so.step);
  spec->add_option("--n-pulses", so.n_pulses);
  spec->add_option("--tau-us", so.tau_us);
  spec->add_option("--spins", so.spins, "comma list, 'all' (13C) or 'none'");
  spec->add_option("--phases", so.phases);
  spec->add_option("--threshold", so.threshold);
  spec->add_option("--m-range", so.m_range);

  std::string weight = "gate-infidelity";
  bool perfect = false;
  auto* ghz = app.add_subcommand("ghz-predict", "depolarizing-model GHZ prediction");
  ghz->add_option("--weight", weight, "gate-infidelity or error-probability");
  ghz->add_flag("--perfect", perfect, "perfect init and gates");

  ScheduleOpts sco;
  auto* sch = app.add_subcommand("schedule", "spin-echo pulse schedule");
  sch->add_option("--spins", sco.spins);
  sch->add_option("--spacing", sco.spacing, "initial spacing t (us)");
  sch->add_option("--waveform", sco.waveform, "write sampled RF envelopes to this CSV");
  sch->add_option("--sample-rate", sco.sample_rate_mhz, "waveform samples per us");
  sch->add_option("--rise", sco.rise_us, "envelope rise time (us)");

  double rabi = 0, rf = std::numeric_limits<double>::quiet_NaN(), omega = 0, detuning = 0;
  auto* stark = app.add_subcommand("stark", "AC-Stark shift");
  stark->add_option("--rabi", rabi)->required();
  stark->add_option("--rf", rf);
  stark->add_option("--omega", omega);
  stark->add_option("--detuning", detuning);

  std::string fit_in, model = "decay";
  std::optional<double> fa, fb;
  auto* fit = app.add_subcommand("fit", "fit decay or cosine to CSV data");
  fit->add_option("--input", fit_in)->required();
  fit->add_option("--model", model);
  fit->add_option("--fix-a", fa);
  fit->add_option("--fix-b", fb);

  std::string shots, kind = "ghz", corr;
  auto* tomo = app.add_subcommand("tomo", "shot records to expectations and fidelity");
  tomo->add_option("--shots", shots)->required();
  tomo->add_option("--kind", kind, "bell-en, bell-nn or ghz");
  tomo->add_option("--correction", corr, "comma list of per-qubit readout factors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    man.command = app.get_subcommands().front()->get_name();
    if (*bell) return cmd_bell(man, bo);
    if (*spec) return cmd_spectrum(man, so);
    if (*ghz) return cmd_ghz(man, weight, perfect);
    if (*sch) return cmd_schedule(man, sco);
    if (*stark) return cmd_stark(man, rabi, rf, omega, detuning);
    if (*fit) return cmd_fit(man, fit_in, model, fa, fb);
    if (*tomo) return cmd_tomo(man, shots, kind, corr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad numeric value: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
