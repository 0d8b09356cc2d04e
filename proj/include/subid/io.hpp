#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "subid/closedloop.hpp"
#include "subid/evalmetrics.hpp"
#include "subid/openloop.hpp"
#include "subid/simdata.hpp"

namespace subid {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
// Row-major nested arrays; rows/cols < 0 means "infer".
Matrix matrix_from_json(const Json& j, Index rows, Index cols, const std::string& name);

Json model_to_json(const SsModel& m);
SsModel model_from_json(const Json& j);

Json noise_to_json(const NoiseSpec& n);
NoiseSpec noise_from_json(const Json& j);

ExcitationSpec excitation_from_json(const Json& j);
Json excitation_to_json(const ExcitationSpec& e);
LoopSpec loop_from_json(const Json& j);

Json result_to_json(const IdentResult& r);
IdentResult result_from_json(const Json& j);

struct MetricReport {
    double eig_distance = 0.0;
    double markov_error = 0.0;
    VafReport vaf;
};
Json report_to_json(const MetricReport& r);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

// CSV with header t,u1..u{n_u},y1..y{n_y}; values printed with 17 significant digits.
void write_csv(std::ostream& os, const DataSet& d);
void write_csv_file(const std::string& path, const DataSet& d);
DataSet read_csv(std::istream& is);
DataSet read_csv_file(const std::string& path);

}  // namespace subid
