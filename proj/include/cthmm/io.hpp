#pragma once

#include "cthmm/decode.hpp"
#include "cthmm/hmm.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cthmm {

// JSON schemas:
//   rate matrix  {"dim": n, "rates": [[..]], "edges": [[bool]]}
//   model        {"rates": {..}, "emissions": [{"mean": [..], "std": [..]}], "pi": [..]}
// CSV formats (states are 1-based in files):
//   observations subject_id,time,v1[,v2,...]
//   trajectory   state,dwell            (last row holds the residual dwell)
//   decoded      subject_id,segment,state,dwell

std::string rate_matrix_to_json(const RateMatrix& q);
RateMatrix rate_matrix_from_json(const std::string& text);

std::string model_to_json(const CTHMMModel& model);
CTHMMModel model_from_json(const std::string& text);

void save_model(const CTHMMModel& model, const std::string& path);
CTHMMModel load_model(const std::string& path);

void write_observations_csv(const std::vector<ObservationSequence>& seqs,
                            std::ostream& out);
std::vector<ObservationSequence> read_observations_csv(std::istream& in);
void save_observations(const std::vector<ObservationSequence>& seqs,
                       const std::string& path);
std::vector<ObservationSequence> load_observations(const std::string& path);

void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
Trajectory read_trajectory_csv(std::istream& in);

void write_decoded_csv(const std::vector<std::pair<std::string, DecodedTrajectory>>& rows,
                       std::ostream& out);

}  // namespace cthmm
