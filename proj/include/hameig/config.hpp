#ifndef HAMEIG_CONFIG_HPP
#define HAMEIG_CONFIG_HPP

// JSON wire format.  Configs are parsed with nlohmann::json; everything the
// tool writes goes through the deterministic emitters below.
//
// Config schema:
//   { "n": int, "T": number, "beta": number, "delta": number,
//     "delta1": number, "Q": [row-major chain generator],
//     "blocks": [ {"k": 1..4, "l": k..4,
//                  "pieces": [ {"t0", "t1", "coeffs": [c0, c1, ...]} ]} ],
//     "hbar_blocks": [ same shape, optional ] }
// A coefficient c_i is a plain number for scalar systems or a row-major
// array of n*n numbers; the block value is sum_i c_i (t - t0)^i.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "hameig/coefficients.hpp"
#include "hameig/io.hpp"
#include "hameig/spectrum.hpp"

namespace hameig {

namespace detail {

inline Eigen::MatrixXd coeff_from_json(const nlohmann::json& c, int n) {
  if (c.is_number()) {
    if (n != 1)
      throw ConfigError(
          "scalar coefficient in a config with state dimension > 1");
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = c.get<double>();
    return m;
  }
  if (!c.is_array() || c.size() != static_cast<std::size_t>(n) * n)
    throw ConfigError("matrix coefficient must hold n*n numbers (row-major)");
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = c[static_cast<std::size_t>(i) * n + j].get<double>();
  return m;
}

inline void fill_field_from_json(CoefficientField& field,
                                 const nlohmann::json& blocks, int n) {
  for (const auto& b : blocks) {
    const int k = b.at("k").get<int>();
    const int l = b.at("l").get<int>();
    std::vector<PolyPiece> pieces;
    for (const auto& p : b.at("pieces")) {
      PolyPiece piece;
      piece.t0 = p.at("t0").get<double>();
      piece.t1 = p.at("t1").get<double>();
      for (const auto& c : p.at("coeffs"))
        piece.coeffs.push_back(coeff_from_json(c, n));
      pieces.push_back(std::move(piece));
    }
    field.set_block(k, l, PiecewiseMatrix(std::move(pieces)));
  }
}

}  // namespace detail

inline HamiltonianSpec spec_from_json(const nlohmann::json& j) {
  try {
    HamiltonianSpec s;
    const int n = j.at("n").get<int>();
    const double T = j.at("T").get<double>();
    s.H = CoefficientField(n, T);
    s.beta = j.at("beta").get<double>();
    s.delta = j.at("delta").get<double>();
    s.delta1 = j.at("delta1").get<double>();
    const auto& q = j.at("Q");
    if (!q.is_array()) throw ConfigError("Q must be a row-major array");
    int m = 0;
    while (static_cast<std::size_t>(m) * m < q.size()) ++m;
    if (static_cast<std::size_t>(m) * m != q.size())
      throw ConfigError("Q must hold a square number of entries");
    s.Q.resize(m, m);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k)
        s.Q(i, k) = q[static_cast<std::size_t>(i) * m + k].get<double>();
    detail::fill_field_from_json(s.H, j.at("blocks"), n);
    if (j.contains("hbar_blocks") && !j.at("hbar_blocks").empty()) {
      s.Hbar = CoefficientField(n, T);
      detail::fill_field_from_json(s.Hbar, j.at("hbar_blocks"), n);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

inline HamiltonianSpec load_spec(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return spec_from_json(j);
}

namespace detail {

inline void emit_field_blocks(std::string& out, const CoefficientField& f) {
  out += "[";
  bool first_block = true;
  for (int k = 1; k <= 4; ++k) {
    for (int l = k; l <= 4; ++l) {
      if (k == 3 && l == 4) continue;
      const PiecewiseMatrix* p = f.stored(k, l);
      if (!p) continue;
      if (!first_block) out += ",";
      first_block = false;
      out += "\n    {\"k\": " + std::to_string(k) +
             ", \"l\": " + std::to_string(l) + ", \"pieces\": [";
      bool first_piece = true;
      for (const auto& piece : p->pieces()) {
        if (!first_piece) out += ",";
        first_piece = false;
        out += "\n      {\"t0\": " + io::format_double(piece.t0) +
               ", \"t1\": " + io::format_double(piece.t1) + ", \"coeffs\": [";
        bool first_coeff = true;
        for (const auto& c : piece.coeffs) {
          if (!first_coeff) out += ", ";
          first_coeff = false;
          if (f.n() == 1) {
            out += io::format_double(c(0, 0));
          } else {
            out += "[";
            for (int i = 0; i < c.rows(); ++i)
              for (int j = 0; j < c.cols(); ++j) {
                if (i + j > 0) out += ", ";
                out += io::format_double(c(i, j));
              }
            out += "]";
          }
        }
        out += "]}";
      }
      out += "\n    ]}";
    }
  }
  out += "\n  ]";
}

}  // namespace detail

// Canonical re-emission of a parsed config: fixed key order, sorted blocks,
// shortest round-trip numbers.
inline std::string normalized_config_json(const HamiltonianSpec& s) {
  std::string out = "{\n";
  out += "  \"n\": " + std::to_string(s.H.n()) + ",\n";
  out += "  \"T\": " + io::format_double(s.H.T()) + ",\n";
  out += "  \"beta\": " + io::format_double(s.beta) + ",\n";
  out += "  \"delta\": " + io::format_double(s.delta) + ",\n";
  out += "  \"delta1\": " + io::format_double(s.delta1) + ",\n";
  out += "  \"Q\": [";
  for (int i = 0; i < s.Q.rows(); ++i)
    for (int j = 0; j < s.Q.cols(); ++j) {
      if (i + j > 0) out += ", ";
      out += io::format_double(s.Q(i, j));
    }
  out += "],\n";
  out += "  \"blocks\": ";
  detail::emit_field_blocks(out, s.H);
  if (s.Hbar.n() > 0) {
    out += ",\n  \"hbar_blocks\": ";
    detail::emit_field_blocks(out, s.Hbar);
  }
  out += "\n}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalue records
// ---------------------------------------------------------------------------

inline std::string records_to_json(const std::vector<EigenvalueRecord>& recs) {
  std::string out = "[";
  bool first = true;
  for (const auto& r : recs) {
    if (!first) out += ",";
    first = false;
    out += "\n  {\"m\": " + std::to_string(r.m) +
           ", \"rho\": " + io::format_double(r.rho) +
           ", \"tol\": " + io::format_double(r.tolerance) + ", \"pattern\": " +
           (r.pattern == Pattern::varrho_scaling ? "\"varrho\"" : "\"hbar\"") +
           ", \"chain\": [";
    bool first_link = true;
    for (const auto& link : r.chain) {
      if (!first_link) out += ", ";
      first_link = false;
      out += "{\"t\": " + io::format_double(link.t) + ", \"family\": " +
             (link.family == Family::primal ? "\"primal\"" : "\"dual\"") + "}";
    }
    out += "]}";
  }
  out += "\n]\n";
  return out;
}

inline std::vector<EigenvalueRecord> records_from_json_text(
    const std::string& text) {
  try {
    const nlohmann::json arr = nlohmann::json::parse(text);
    if (!arr.is_array())
      throw ConfigError("eigenvalue records must form a JSON array");
    std::vector<EigenvalueRecord> recs;
    for (const auto& r : arr) {
      EigenvalueRecord rec;
      rec.m = r.at("m").get<int>();
      rec.rho = r.at("rho").get<double>();
      rec.tolerance = r.at("tol").get<double>();
      const std::string pat = r.value("pattern", std::string("hbar"));
      if (pat == "hbar") {
        rec.pattern = Pattern::hbar_shift;
      } else if (pat == "varrho") {
        rec.pattern = Pattern::varrho_scaling;
      } else {
        throw ConfigError("unknown pattern in eigenvalue record: " + pat);
      }
      for (const auto& link : r.at("chain")) {
        ChainLink cl;
        cl.t = link.at("t").get<double>();
        const std::string fam = link.at("family").get<std::string>();
        if (fam == "primal") {
          cl.family = Family::primal;
        } else if (fam == "dual") {
          cl.family = Family::dual;
        } else {
          throw ConfigError("unknown family in eigenvalue record: " + fam);
        }
        rec.chain.push_back(cl);
      }
      recs.push_back(std::move(rec));
    }
    return recs;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed eigenvalue records: ") +
                      e.what());
  }
}

}  // namespace hameig

#endif  // HAMEIG_CONFIG_HPP
