// Command-line front end: assumption checks, blow-up sweeps, spectrum and
// eigenfunction computation, growth-law fits, and a reproducible pipeline
// that chains them and writes a hashed manifest.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hameig/hameig.hpp"

namespace {

using hameig::io::format_double;

std::string basename_of(const std::string& path) {
  const auto pos = path.find_last_of('/');
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

std::string summary_path_for(const std::string& csv_path) {
  std::string stem = csv_path;
  if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".csv") == 0)
    stem.resize(stem.size() - 4);
  return stem + "_summary.json";
}

std::vector<double> parse_param_grid(const std::string& text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string::npos ? c1 : text.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw hameig::ConfigError("param grid must have the form first:last:count");
  double a = 0.0, b = 0.0;
  long count = 0;
  try {
    a = std::stod(text.substr(0, c1));
    b = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    count = std::stol(text.substr(c2 + 1));
  } catch (const std::exception&) {
    throw hameig::ConfigError("param grid must hold two numbers and a count");
  }
  if (count < 1) throw hameig::ConfigError("param grid count must be positive");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i)
    grid.push_back(count == 1 ? a : a + (b - a) * i / (count - 1));
  return grid;
}

// Assumption checks shared by `check` and `pipeline`.  Returns the number
// of failed required conditions; informational lines never fail.
int run_checks(const hameig::HamiltonianSpec& s) {
  int failures = 0;
  auto line = [&](bool ok, const char* label, const std::string& detail) {
    std::printf("[%s] %s (%s)\n", ok ? "PASS" : "FAIL", label, detail.c_str());
    if (!ok) ++failures;
  };
  for (const auto& w : hameig::validate_structure(s))
    std::printf("[note] %s\n", w.c_str());
  line(true, "structural layout",
       "n = " + std::to_string(s.H.n()) + ", T = " + format_double(s.H.T()));

  const auto bracket = hameig::check_delta_bracket(s);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "worst slack %.6g at t = %.6g",
                bracket.margin, bracket.worst_t);
  line(bracket.satisfied, "noise cost bracket", buf);

  const auto mono = hameig::check_monotonicity(s, 0.0);
  std::snprintf(buf, sizeof(buf),
                "lambda_max %.6g vs -beta = %.6g at t = %.6g", mono.lambda_max,
                -s.beta, mono.worst_t);
  line(mono.satisfied, "signed-row negativity", buf);

  if (s.H.n() == 1) {
    const auto h4 = hameig::check_H4(s);
    std::snprintf(buf, sizeof(buf), "worst coupling defect %.3g", h4.defect);
    line(h4.holds, "coupling compatibility", buf);
    if (h4.holds) {
      const double rho_b = hameig::compute_rho_b(s);
      std::printf("[note] critical threshold rho_b = %.12g\n", rho_b);
      const auto h5 = hameig::check_H5(s);
      if (h5.holds)
        std::printf("[PASS] smallness bound (lhs %.3g <= mid %.3g < rhs %.3g)\n",
                    h5.lhs, h5.mid, h5.rhs);
      else
        std::printf("[note] smallness bound not satisfied; the zone below "
                    "rho_b is not certified (lhs %.3g, mid %.3g, rhs %.3g)\n",
                    h5.lhs, h5.mid, h5.rhs);
    }
  } else {
    std::printf("[note] scalar-only checks skipped for n = %d\n", s.H.n());
  }
  return failures;
}

std::string eigenfunction_csv(const hameig::SimResult& res, int n) {
  std::string out = "path_id,t,state";
  for (const char* name : {"x", "y", "z", "theta"})
    for (int i = 1; i <= n; ++i)
      out += "," + std::string(name) + std::to_string(i);
  out += "\n";
  for (std::size_t p = 0; p < res.paths.size(); ++p) {
    const auto& path = res.paths[p];
    for (std::size_t i = 0; i < path.times.size(); ++i) {
      out += std::to_string(p) + "," + format_double(path.times[i]) + "," +
             std::to_string(path.states[i]);
      for (const auto* series : {&path.x, &path.y, &path.z, &path.theta})
        for (int c = 0; c < n; ++c)
          out += "," + format_double((*series)[i](c));
      out += "\n";
    }
  }
  return out;
}

std::string summary_json(const hameig::ResidualReport& rep, int m, long paths,
                         double dt, std::uint64_t seed) {
  std::string out = "{\n";
  out += "  \"m\": " + std::to_string(m) + ",\n";
  out += "  \"paths\": " + std::to_string(paths) + ",\n";
  out += "  \"dt\": " + format_double(dt) + ",\n";
  out += "  \"seed\": " + std::to_string(seed) + ",\n";
  out += "  \"x0_norm\": " + format_double(rep.x0_norm) + ",\n";
  out += "  \"yT_mean\": " + format_double(rep.yT_mean) + ",\n";
  out += "  \"yT_se\": " + format_double(rep.yT_se) + ",\n";
  out += "  \"nontriviality\": " + format_double(rep.nontriviality) + ",\n";
  out += "  \"decouple_max\": " + format_double(rep.decouple_max) + "\n";
  out += "}\n";
  return out;
}

std::string growth_json(const hameig::GrowthFit& fit,
                        const std::vector<int>& ms,
                        const std::vector<double>& values) {
  std::string out = "{\n";
  out += "  \"slope\": " + format_double(fit.slope) + ",\n";
  out += "  \"r2\": " + format_double(fit.r2) + ",\n";
  out += "  \"ms\": [";
  for (std::size_t i = 0; i < ms.size(); ++i)
    out += (i ? ", " : "") + std::to_string(ms[i]);
  out += "],\n  \"values\": [";
  for (std::size_t i = 0; i < values.size(); ++i)
    out += (i ? ", " : "") + format_double(values[i]);
  out += "]\n}\n";
  return out;
}

hameig::SimResult simulate_for_record(const hameig::HamiltonianSpec& s,
                                      const hameig::EigenvalueRecord& rec,
                                      long paths, double dt,
                                      std::uint64_t seed) {
  hameig::SimOptions opt;
  opt.paths = paths;
  opt.dt = dt;
  opt.seed = seed;
  opt.keep_paths = paths;
  return hameig::simulate_eigenfunction(s, rec, opt);
}

struct Args {
  std::string config, out, out_dir, record, in;
  std::string family = "primal", pattern = "hbar", param_grid;
  int count = 1, m = 1;
  long paths = 64;
  double dt = 0.0, tol = 1e-8, lo = 0.0, hi = 0.0;
  std::uint64_t seed = 0;
};

int cmd_check(const Args& a) {
  const auto s = hameig::load_spec(a.config);
  const int failures = run_checks(s);
  if (!a.out_dir.empty()) {
    std::filesystem::create_directories(a.out_dir);
    hameig::io::write_text_file(a.out_dir + "/normalized_config.json",
                                hameig::normalized_config_json(s));
    std::printf("[note] wrote %s/normalized_config.json\n", a.out_dir.c_str());
  }
  return failures ? 1 : 0;
}

int cmd_blowup(const Args& a) {
  const auto s = hameig::load_spec(a.config);
  const auto pattern = a.pattern == "varrho" ? hameig::Pattern::varrho_scaling
                                             : hameig::Pattern::hbar_shift;
  const auto family =
      a.family == "dual" ? hameig::Family::dual : hameig::Family::primal;
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(s.H.n(), s.H.n());
  const hameig::IntegrateOptions opt;
  std::string csv = "param,blow_up_time,bracket_lo,bracket_hi,norm_at_stop\n";
  for (const double p : parse_param_grid(a.param_grid)) {
    const auto r =
        hameig::blow_up_time(s, pattern, family, p, s.H.T(), Z, opt);
    csv += format_double(p) + ",";
    if (r.blew_up) {
      csv += format_double(r.t_star) + "," + format_double(r.bracket_lo) +
             "," + format_double(r.bracket_hi);
    } else {
      csv += ",,";
    }
    csv += "," + format_double(r.norm_at_stop) + "\n";
  }
  hameig::io::write_text_file(a.out, csv);
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

std::vector<hameig::EigenvalueRecord> compute_spectrum(
    const hameig::HamiltonianSpec& s, int count, double tol) {
  if (count < 1) throw hameig::InputError("count must be positive");
  std::vector<hameig::EigenvalueRecord> recs;
  recs.reserve(static_cast<std::size_t>(count));
  for (int m = 1; m <= count; ++m)
    recs.push_back(hameig::eigenvalue_1d(s, m, tol, hameig::IntegrateOptions{}));
  return recs;
}

int cmd_spectrum(const Args& a) {
  const auto s = hameig::load_spec(a.config);
  const auto recs = compute_spectrum(s, a.count, a.tol);
  hameig::io::write_text_file(a.out, hameig::records_to_json(recs));
  std::printf("wrote %s (%d records)\n", a.out.c_str(), a.count);
  return 0;
}

int cmd_first_eig(const Args& a) {
  const auto s = hameig::load_spec(a.config);
  const double T = s.H.T();
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(s.H.n(), s.H.n());
  const hameig::IntegrateOptions opt;
  auto escapes = [&](double rho) {
    const auto r = hameig::blow_up_time(s, hameig::Pattern::varrho_scaling,
                                        hameig::Family::primal, 1.0 - rho, T,
                                        Z, opt);
    return r.blew_up && r.t_star > 0.0;
  };
  double lo = a.lo, hi = a.hi;
  if (!(lo > 0.0)) {
    lo = 1.000001;
    int tries = 0;
    while (escapes(lo) && ++tries <= 60) lo = 1.0 + (lo - 1.0) / 2.0;
    if (tries > 60)
      throw hameig::BracketError("no escape-free parameter found near 1");
  }
  if (!(hi > lo)) {
    hi = std::max(2.0, lo + 1.0);
    int tries = 0;
    while (!escapes(hi) && ++tries <= 60) hi = 1.0 + 2.0 * (hi - 1.0);
    if (tries > 60)
      throw hameig::BracketError("no escaping parameter found above 1");
  }
  const auto rec = hameig::first_eigenvalue_multidim(s, lo, hi, a.tol, opt);
  std::string out = "{\n";
  out += "  \"rho\": " + format_double(rec.rho) + ",\n";
  out += "  \"tol\": " + format_double(rec.tolerance) + ",\n";
  out += "  \"pattern\": \"varrho\",\n";
  out += "  \"kernel\": [";
  for (int c = 0; c < rec.kernel_basis.cols(); ++c) {
    if (c) out += ", ";
    out += "[";
    for (int i = 0; i < rec.kernel_basis.rows(); ++i) {
      if (i) out += ", ";
      out += format_double(rec.kernel_basis(i, c));
    }
    out += "]";
  }
  out += "]\n}\n";
  hameig::io::write_text_file(a.out, out);
  std::printf("wrote %s (rho = %.12g)\n", a.out.c_str(), rec.rho);
  return 0;
}

int cmd_eigenfunction(const Args& a) {
  const auto s = hameig::load_spec(a.config);
  const auto recs =
      hameig::records_from_json_text(hameig::io::read_text_file(a.record));
  const hameig::EigenvalueRecord* rec = nullptr;
  for (const auto& r : recs)
    if (r.m == a.m) rec = &r;
  if (!rec)
    throw hameig::InputError("no eigenvalue record with m = " +
                             std::to_string(a.m));
  const auto res = simulate_for_record(s, *rec, a.paths, a.dt, a.seed);
  hameig::io::write_text_file(a.out, eigenfunction_csv(res, s.H.n()));
  hameig::io::write_text_file(
      summary_path_for(a.out),
      summary_json(res.report, a.m, a.paths, a.dt, a.seed));
  std::printf("wrote %s and %s\n", a.out.c_str(),
              summary_path_for(a.out).c_str());
  return 0;
}

int cmd_growth(const Args& a) {
  const auto recs =
      hameig::records_from_json_text(hameig::io::read_text_file(a.in));
  std::vector<int> ms;
  std::vector<double> values;
  for (const auto& r : recs) {
    ms.push_back(r.m);
    values.push_back(r.rho);
  }
  const auto fit = hameig::growth_order_fit_values(ms, values);
  hameig::io::write_text_file(a.out, growth_json(fit, ms, values));
  std::printf("wrote %s (slope %.6g, r2 %.6g)\n", a.out.c_str(), fit.slope,
              fit.r2);
  return 0;
}

int cmd_pipeline(const Args& a) {
  const auto start = std::chrono::steady_clock::now();
  const auto s = hameig::load_spec(a.config);
  if (run_checks(s) > 0) return 1;
  std::filesystem::create_directories(a.out_dir);

  std::vector<std::pair<std::string, std::string>> artifacts;  // name, hash
  auto write_artifact = [&](const std::string& name,
                            const std::string& content) {
    hameig::io::write_text_file(a.out_dir + "/" + name, content);
    artifacts.emplace_back(name,
                           hameig::io::hex16(hameig::io::fnv1a64(content)));
    std::printf("[note] wrote %s\n", name.c_str());
  };

  if (a.count >= 1) {
    const auto recs = compute_spectrum(s, a.count, a.tol);
    write_artifact("spectrum.json", hameig::records_to_json(recs));
    if (a.count >= 5) {
      std::vector<int> ms;
      std::vector<double> values;
      for (const auto& r : recs) {
        ms.push_back(r.m);
        values.push_back(r.rho);
      }
      const auto fit = hameig::growth_order_fit_values(ms, values);
      write_artifact("growth.json", growth_json(fit, ms, values));
    }
    for (const auto& rec : recs) {
      const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(rec.m);
      const auto res = simulate_for_record(s, rec, a.paths, a.dt, seed);
      const std::string stem = "eigenfunction_m" + std::to_string(rec.m);
      write_artifact(stem + ".csv", eigenfunction_csv(res, s.H.n()));
      write_artifact(stem + "_summary.json",
                     summary_json(res.report, rec.m, a.paths, a.dt, seed));
    }
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  std::string manifest = "{\n";
  manifest += "  \"tool\": \"hameig 0.1.0\",\n";
  manifest += "  \"config\": " +
              hameig::io::json_string(basename_of(a.config)) + ",\n";
  manifest += "  \"count\": " + std::to_string(a.count) + ",\n";
  manifest += "  \"paths\": " + std::to_string(a.paths) + ",\n";
  manifest += "  \"dt\": " + format_double(a.dt) + ",\n";
  manifest += "  \"seed\": " + std::to_string(a.seed) + ",\n";
  manifest += "  \"outputs\": [";
  for (std::size_t i = 0; i < artifacts.size(); ++i)
    manifest += (i ? ", " : "") + hameig::io::json_string(artifacts[i].first);
  manifest += "],\n  \"hashes\": {";
  for (std::size_t i = 0; i < artifacts.size(); ++i)
    manifest += (i ? ", " : "") +
                hameig::io::json_string(artifacts[i].first) + ": " +
                hameig::io::json_string(artifacts[i].second);
  manifest += "},\n";
  manifest += "  \"duration_seconds\": " + format_double(elapsed) + "\n}\n";
  hameig::io::write_text_file(a.out_dir + "/manifest.json", manifest);
  std::printf("[note] wrote manifest.json (%zu artifacts, %.2f s)\n",
              artifacts.size(), elapsed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "eigenvalues and eigenfunctions of linear stochastic Hamiltonian "
      "two-point boundary systems"};
  app.require_subcommand(1);
  Args a;

  auto* check = app.add_subcommand("check", "validate a config and test the "
                                            "standing assumptions");
  check->add_option("--config", a.config, "problem description (JSON)")
      ->required();
  check->add_option("--out-dir", a.out_dir,
                    "directory for the normalized config echo");

  auto* blowup = app.add_subcommand(
      "blowup", "sweep the escape time of the backward flow over a parameter "
                "grid (CSV)");
  blowup->add_option("--config", a.config)->required();
  blowup->add_option("--family", a.family)
      ->check(CLI::IsMember({"primal", "dual"}));
  blowup->add_option("--pattern", a.pattern)
      ->check(CLI::IsMember({"hbar", "varrho"}));
  blowup->add_option("--param-grid", a.param_grid, "first:last:count")
      ->required();
  blowup->add_option("--out", a.out, "output CSV path")->required();

  auto* spectrum = app.add_subcommand(
      "spectrum", "locate the first eigenvalues of a scalar system (JSON)");
  spectrum->add_option("--config", a.config)->required();
  spectrum->add_option("--count", a.count, "number of eigenvalues")
      ->required();
  spectrum->add_option("--tol", a.tol, "bisection tolerance");
  spectrum->add_option("--out", a.out, "output JSON path")->required();

  auto* first = app.add_subcommand(
      "first-eig", "first eigenvalue of a multidimensional system with the "
                   "starting-direction kernel");
  first->add_option("--config", a.config)->required();
  first->add_option("--lo", a.lo, "lower bracket (default: probe toward 1)");
  first->add_option("--hi", a.hi, "upper bracket (default: dyadic growth)");
  first->add_option("--tol", a.tol, "bisection tolerance");
  first->add_option("--out", a.out, "output JSON path")->required();

  auto* eig = app.add_subcommand(
      "eigenfunction", "Monte Carlo eigenfunction paths for a located "
                       "eigenvalue (CSV + summary JSON)");
  eig->add_option("--config", a.config)->required();
  eig->add_option("--record", a.record, "spectrum JSON with the eigenvalue")
      ->required();
  eig->add_option("--m", a.m, "eigenvalue index inside the record")
      ->required();
  eig->add_option("--paths", a.paths, "number of simulated paths");
  eig->add_option("--dt", a.dt, "step size (default T/4096)");
  eig->add_option("--seed", a.seed, "root seed");
  eig->add_option("--out", a.out, "output CSV path")->required();

  auto* growth = app.add_subcommand(
      "growth", "fit the growth order of an eigenvalue sequence");
  growth->add_option("--in", a.in, "spectrum JSON")->required();
  growth->add_option("--out", a.out, "output JSON path")->required();

  auto* pipeline = app.add_subcommand(
      "pipeline", "checks, spectrum, growth fit, and eigenfunction runs with "
                  "a hashed manifest");
  pipeline->add_option("--config", a.config)->required();
  pipeline->add_option("--count", a.count, "number of eigenvalues (0: checks "
                                           "only)")
      ->required();
  pipeline->add_option("--paths", a.paths, "paths per eigenfunction run");
  pipeline->add_option("--dt", a.dt, "simulation step size");
  pipeline->add_option("--seed", a.seed, "root seed; run m uses seed + m");
  pipeline->add_option("--tol", a.tol, "bisection tolerance");
  pipeline->add_option("--out-dir", a.out_dir, "artifact directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(check)) return cmd_check(a);
    if (app.got_subcommand(blowup)) return cmd_blowup(a);
    if (app.got_subcommand(spectrum)) return cmd_spectrum(a);
    if (app.got_subcommand(first)) return cmd_first_eig(a);
    if (app.got_subcommand(eig)) return cmd_eigenfunction(a);
    if (app.got_subcommand(growth)) return cmd_growth(a);
    if (app.got_subcommand(pipeline)) return cmd_pipeline(a);
  } catch (const hameig::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const hameig::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 1;
  } catch (const hameig::PreconditionError& e) {
    std::fprintf(stderr, "precondition violated: %s\n", e.what());
    return 1;
  } catch (const hameig::Error& e) {
    std::fprintf(stderr, "computation failed: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
