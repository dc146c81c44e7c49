#pragma once

// Deterministic plain-text output: node-grid field files, record tables (CSV,
// comma separated, dot decimal), sweep tables, and a JSON run summary.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvbox/continuation.hpp"
#include "tvbox/io_format.hpp"
#include "tvbox/mesh.hpp"

namespace tvbox {

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

inline std::string mesh_header(const Mesh& m) {
  std::string s;
  s += "# nx=" + std::to_string(m.nx) + " ny=" + std::to_string(m.ny);
  s += " xmin=" + fmt_g17(m.rect.xmin) + " xmax=" + fmt_g17(m.rect.xmax);
  s += " ymin=" + fmt_g17(m.rect.ymin) + " ymax=" + fmt_g17(m.rect.ymax) + "\n";
  return s;
}

// One line per node: "x y value", row-major node order.
inline void write_field_grid(const std::string& path, const NodalField& u) {
  const Mesh& m = *u.mesh;
  std::string s = mesh_header(m);
  s += "# x y value\n";
  for (int i = 0; i < m.n_nodes(); ++i)
    s += fmt_g17(m.nodes[i][0]) + " " + fmt_g17(m.nodes[i][1]) + " " +
         fmt_g17(u.v[i]) + "\n";
  write_text_file(path, s);
}

inline void write_field_csv(const std::string& path, const NodalField& u) {
  const Mesh& m = *u.mesh;
  std::string s = "x,y,value\n";
  for (int i = 0; i < m.n_nodes(); ++i)
    s += fmt_g17(m.nodes[i][0]) + "," + fmt_g17(m.nodes[i][1]) + "," +
         fmt_g17(u.v[i]) + "\n";
  write_text_file(path, s);
}

inline void write_records_csv(const std::string& path,
                              const std::vector<ContinuationRecord>& records) {
  std::string s =
      "k,E_u,E_J,R_eps,R_rho,eps,rho,J_penalized,J_exact,newton_iters,"
      "linesearch_total,lambda_a_norm,lambda_b_norm\n";
  for (const auto& r : records) {
    s += std::to_string(r.k) + ",";
    s += (r.E_u ? fmt_g17(*r.E_u) : "") + ",";
    s += (r.E_J ? fmt_g17(*r.E_J) : "") + ",";
    s += fmt_g17(r.R_eps) + "," + fmt_g17(r.R_rho) + ",";
    s += fmt_g17(r.eps) + "," + fmt_g17(r.rho) + ",";
    s += fmt_g17(r.J_penalized) + "," + fmt_g17(r.J_exact) + ",";
    s += std::to_string(r.newton_iters) + "," + std::to_string(r.linesearch_total) + ",";
    s += fmt_g17(r.lambda_a_norm) + "," + fmt_g17(r.lambda_b_norm) + "\n";
  }
  write_text_file(path, s);
}

struct SweepRow {
  double h = 0.0;
  int nx = 0, ny = 0;
  int iterations = 0;
  int newton_total = 0;
  double eps_final = 0.0, rho_final = 0.0;
  double J = 0.0;
  std::string status;
};

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::string s = "h,it,newt,eps_final,rho_final,J\n";
  for (const auto& r : rows)
    s += fmt_g17(r.h) + "," + std::to_string(r.iterations) + "," +
         std::to_string(r.newton_total) + "," + fmt_g17(r.eps_final) + "," +
         fmt_g17(r.rho_final) + "," + fmt_g17(r.J) + "\n";
  write_text_file(path, s);
}

inline nlohmann::json summary_json(const Mesh& mesh, const ContinuationResult& res) {
  nlohmann::json j;
  j["status"] = run_status_name(res.status);
  j["mesh"] = {{"nx", mesh.nx}, {"ny", mesh.ny}, {"h", mesh.h()}};
  j["outer_iterations"] = static_cast<int>(res.records.size());
  j["newton_total"] = res.total_newton;
  if (!res.records.empty()) {
    const auto& last = res.records.back();
    j["eps_final"] = last.eps;
    j["rho_final"] = last.rho;
    j["J_penalized"] = last.J_penalized;
    j["J_exact"] = last.J_exact;
    j["R_eps"] = last.R_eps;
    j["R_rho"] = last.R_rho;
    j["lambda_a_norm"] = last.lambda_a_norm;
    j["lambda_b_norm"] = last.lambda_b_norm;
  }
  if (!res.message.empty()) j["message"] = res.message;
  return j;
}

}  // namespace tvbox
