#include "fedal/io.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fedal {
namespace {

using nlohmann::json;

json to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const Mat& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vec(m.row(r).transpose())));
  return rows;
}

Vec vec_from(const json& j, const char* what) {
  if (!j.is_array()) throw std::runtime_error(std::string("expected an array for ") + what);
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Index>(k)] = j[k].get<double>();
  return v;
}

Mat mat_from(const json& j, Index cols, const char* what) {
  if (!j.is_array()) throw std::runtime_error(std::string("expected an array of rows for ") + what);
  Mat m(static_cast<Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vec row = vec_from(j[r], what);
    require_dimension(row.size(), cols, what);
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  return m;
}

json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON in '" + path + "': " + e.what());
  }
}

void store(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

}  // namespace

void write_lcqp(const std::string& path, const LcqpInstance& inst) {
  json j;
  j["dimension"] = inst.dimension();
  j["clients"] = inst.num_clients();
  j["constraints_per_block"] = inst.C.empty() ? 0 : inst.C.front().rows();
  j["seed"] = inst.seed;
  for (const auto& A : inst.A) j["A"].push_back(to_json(A));
  for (const auto& b : inst.b) j["b"].push_back(to_json(b));
  for (const auto& C : inst.C) j["C"].push_back(to_json(C));
  for (const auto& d : inst.offsets) j["d"].push_back(to_json(d));
  store(path, j);
}

LcqpInstance read_lcqp(const std::string& path) {
  const json j = load(path);
  try {
    const Index d = j.at("dimension").get<Index>();
    const auto n = j.at("clients").get<std::size_t>();
    LcqpInstance inst;
    inst.seed = j.value("seed", std::uint64_t{0});
    if (j.at("A").size() != n || j.at("b").size() != n || j.at("C").size() != n + 1 || j.at("d").size() != n + 1)
      throw std::runtime_error("block counts do not match 'clients'");
    for (std::size_t i = 0; i < n; ++i) {
      inst.A.push_back(mat_from(j["A"][i], d, "A"));
      require_dimension(inst.A.back().rows(), d, "A rows");
      inst.b.push_back(vec_from(j["b"][i], "b"));
      require_dimension(inst.b.back().size(), d, "b");
    }
    for (std::size_t i = 0; i <= n; ++i) {
      inst.C.push_back(mat_from(j["C"][i], d, "C"));
      inst.offsets.push_back(vec_from(j["d"][i], "d"));
      require_dimension(inst.offsets.back().size(), inst.C.back().rows(), "d");
    }
    return inst;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad LCQP instance '" + path + "': " + e.what());
  }
}

void write_solution(const std::string& path, const Vec& w, const MultiplierState& mu) {
  json j;
  j["w"] = to_json(w);
  j["mu"] = json::array();
  for (const auto& b : mu.blocks) j["mu"].push_back(to_json(b));
  store(path, j);
}

SolutionFile read_solution(const std::string& path) {
  const json j = load(path);
  try {
    SolutionFile s;
    s.w = vec_from(j.at("w"), "w");
    for (const auto& b : j.at("mu")) s.mu.blocks.push_back(vec_from(b, "mu"));
    return s;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad solution file '" + path + "': " + e.what());
  }
}

}  // namespace fedal
