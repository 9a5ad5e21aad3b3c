#include "cthmm/io.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace cthmm {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  const Index n = static_cast<Index>(rows.size());
  const Index cols = n == 0 ? 0 : static_cast<Index>(rows.at(0).size());
  Matrix m(n, cols);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = arr.at(i).get<double>();
  return v;
}

json rate_matrix_json(const RateMatrix& q) {
  json edges = json::array();
  for (Index i = 0; i < q.dim(); ++i) {
    json row = json::array();
    for (Index j = 0; j < q.dim(); ++j) row.push_back(bool(q.edge_mask()(i, j)));
    edges.push_back(std::move(row));
  }
  return json{{"dim", q.dim()}, {"rates", matrix_to_json(q.entries())}, {"edges", edges}};
}

RateMatrix rate_matrix_parse(const json& j) {
  const Index n = j.at("dim").get<Index>();
  Matrix rates = matrix_from_json(j.at("rates"));
  if (rates.rows() != n || rates.cols() != n)
    throw Error("rate matrix json: dim does not match rates");
  BoolMatrix mask(n, n);
  const json& edges = j.at("edges");
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < n; ++k) mask(i, k) = edges.at(i).at(k).get<bool>();
  return RateMatrix::validate(std::move(rates), std::move(mask));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, sep)) fields.push_back(field);
  return fields;
}

}  // namespace

std::string rate_matrix_to_json(const RateMatrix& q) {
  return rate_matrix_json(q).dump(2);
}

RateMatrix rate_matrix_from_json(const std::string& text) {
  return rate_matrix_parse(json::parse(text));
}

std::string model_to_json(const CTHMMModel& model) {
  json emissions = json::array();
  for (const auto& e : model.emissions)
    emissions.push_back(json{{"mean", vector_to_json(e.mean)},
                             {"std", vector_to_json(e.stddev)}});
  json j{{"rates", rate_matrix_json(model.rates)},
         {"emissions", emissions},
         {"pi", vector_to_json(model.initial)}};
  return j.dump(2);
}

CTHMMModel model_from_json(const std::string& text) {
  const json j = json::parse(text);
  RateMatrix rates = rate_matrix_parse(j.at("rates"));
  std::vector<GaussianEmission> emissions;
  for (const auto& e : j.at("emissions"))
    emissions.push_back(GaussianEmission{vector_from_json(e.at("mean")),
                                         vector_from_json(e.at("std"))});
  Vector pi = vector_from_json(j.at("pi"));
  return make_model(std::move(rates), std::move(emissions), std::move(pi));
}

void save_model(const CTHMMModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_model: cannot open " + path);
  out << model_to_json(model) << "\n";
}

CTHMMModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_model: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

void write_observations_csv(const std::vector<ObservationSequence>& seqs,
                            std::ostream& out) {
  const Index dims = seqs.empty() ? 1 : seqs.front().values.cols();
  out << "subject_id,time";
  for (Index d = 0; d < dims; ++d) out << ",v" << (d + 1);
  out << "\n";
  out << std::setprecision(17);
  for (const auto& seq : seqs) {
    for (std::size_t v = 0; v < seq.times.size(); ++v) {
      out << seq.subject_id << "," << seq.times[v];
      for (Index d = 0; d < seq.values.cols(); ++d)
        out << "," << seq.values(static_cast<Index>(v), d);
      out << "\n";
    }
  }
}

std::vector<ObservationSequence> read_observations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw NoData("observations csv: empty file");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "time")
    throw Error("observations csv: expected header subject_id,time,v1[,...]");
  const std::size_t dims = header.size() - 2;

  std::vector<ObservationSequence> seqs;
  std::vector<std::vector<double>> rows;  // per current subject
  std::string current;
  auto flush = [&]() {
    if (rows.empty()) return;
    ObservationSequence seq;
    seq.subject_id = current;
    seq.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(dims));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      seq.times.push_back(rows[r][0]);
      for (std::size_t d = 0; d < dims; ++d)
        seq.values(static_cast<Index>(r), static_cast<Index>(d)) = rows[r][d + 1];
    }
    seqs.push_back(std::move(seq));
    rows.clear();
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size())
      throw Error("observations csv: malformed row: " + line);
    if (fields[0] != current) {
      flush();
      current = fields[0];
    }
    std::vector<double> row;
    for (std::size_t f = 1; f < fields.size(); ++f) row.push_back(std::stod(fields[f]));
    rows.push_back(std::move(row));
  }
  flush();
  if (seqs.empty()) throw NoData("observations csv: no rows");
  return seqs;
}

void save_observations(const std::vector<ObservationSequence>& seqs,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_observations: cannot open " + path);
  write_observations_csv(seqs, out);
}

std::vector<ObservationSequence> load_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_observations: cannot open " + path);
  return read_observations_csv(in);
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "state,dwell\n" << std::setprecision(17);
  for (std::size_t k = 0; k < traj.states.size(); ++k)
    out << (traj.states[k] + 1) << "," << traj.dwell_times[k] << "\n";
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split(line, ',').size() != 2)
    throw Error("trajectory csv: expected header state,dwell");
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw Error("trajectory csv: malformed row: " + line);
    traj.states.push_back(std::stol(fields[0]) - 1);
    traj.dwell_times.push_back(std::stod(fields[1]));
  }
  if (traj.states.empty()) throw NoData("trajectory csv: no rows");
  for (double d : traj.dwell_times) traj.total_time += d;
  return traj;
}

void write_decoded_csv(const std::vector<std::pair<std::string, DecodedTrajectory>>& rows,
                       std::ostream& out) {
  out << "subject_id,segment,state,dwell\n" << std::setprecision(17);
  for (const auto& [subject, traj] : rows)
    for (std::size_t k = 0; k < traj.states.size(); ++k)
      out << subject << "," << k << "," << (traj.states[k] + 1) << ","
          << traj.dwell_times[k] << "\n";
}

}  // namespace cthmm
