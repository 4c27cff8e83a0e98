#ifndef GPSSM_IO_HPP_
#define GPSSM_IO_HPP_

#include "gpssm/identify.hpp"
#include "gpssm/predict.hpp"
#include "gpssm/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gpssm {

// Header `t,u,y[,x_true]`; scalar input, observation and state; values
// written with 17 significant digits. Reading raises InputError on malformed
// rows, a wrong header or non-consecutive time indices.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

// Header `k,<natural parameter names>,q_hat`.
void write_trace_csv(const std::filesystem::path& path, const RunArtifacts& artifacts);
// Header `x_star,u_star,mean,std,truth`; truth left empty when unknown.
void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRecord>& records);

// Writes config.ini, model.json, trace.csv, mstep.csv, trajectory.csv and
// weighted_set.csv into dir (created if needed).
void save_artifacts(const std::filesystem::path& dir, const RunArtifacts& artifacts);
// Reads everything save_artifacts wrote; theta is rebuilt from the config
// and the packed parameter vector in model.json.
RunArtifacts load_artifacts(const std::filesystem::path& dir);

}  // namespace gpssm

#endif  // GPSSM_IO_HPP_
