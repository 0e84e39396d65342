#pragma once
#include "wkam/action_potential.hpp"
#include "wkam/paths.hpp"
#include "wkam/weak_kam.hpp"
#include <nlohmann/json.hpp>
#include <string>

namespace wkam {

using ordered_json = nlohmann::ordered_json;

/// Path CSV: header "t,body0_x0,...", one row per node, 17 significant digits.
std::string path_to_csv(const DiscretePath& path);
DiscretePath path_from_csv(const std::string& csv);

/// GridFunction CSV: node coordinates, value, excluded flag.
std::string grid_function_to_csv(const GridFunction& u);

/// gnuplot "matrix nonuniform" layout for 2-D grids (first row x-coordinates).
std::string grid_function_to_matrix(const GridFunction& u);

ordered_json certificate_to_json(const BoundCertificate& cert);
ordered_json phi_estimate_to_json(const PhiEstimate& est);
ordered_json semigroup_report_to_json(const SemigroupReport& rep);

/// Batch query list: [{"kappa":..,"masses":[..],"dim":..,"x":[[..]..],"y":..,"T":..(optional)},..]
struct BatchQuery {
    ProblemSpec spec;
    Configuration x, y;
    double T = 0.0;  // 0: free time
};
std::vector<BatchQuery> parse_batch_queries(const std::string& json_text);

std::string format_double(double v);  // shortest round-trip decimal
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace wkam
