#ifndef PAL_IO_HPP
#define PAL_IO_HPP

#include <filesystem>
#include <string>

#include "pal/inference.hpp"
#include "pal/limits.hpp"
#include "pal/models.hpp"
#include "pal/simulate.hpp"

#include <json.hpp>

namespace pal {

/// Plain CSV table: one header row, numeric body.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
/// Writes with 17 significant digits and a trailing newline, atomically
/// (temp file + rename).
void write_csv(const std::filesystem::path& path, const CsvTable& table);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// observation/data tables
CsvTable observations_to_csv(const ObservationSeries& obs);
ObservationSeries observations_from_csv(const CsvTable& table, int m);
CsvTable latent_to_csv(const LatentRecord& rec);

// filter traces
CsvTable filter_trace_to_csv(const FilterTrace& trace, int m);
CsvTable limit_trace_to_csv(const LimitTrace& trace);

// chains
CsvTable chain_to_csv(const Chain& chain);

/// A parsed run configuration: the model family plus data/horizon defaults.
struct RunSetup {
  ModelFamily family;
  std::string model_name;
  ObservationSeries::Kind kind = ObservationSeries::Kind::Prevalence;
  int T = 0;                 // default simulation horizon
  std::vector<int> tau;      // aggregated schedule (when applicable)
  std::string canonical;     // canonical config dump for hashing
};

/// Loads a model configuration (JSON).  See configs/ for the documented
/// schema: a "model" name, a "params" block with value/bounds/prior/
/// proposal_sd per parameter, and model-specific fields.
RunSetup load_config(const std::filesystem::path& path);
RunSetup parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

GravityConfig load_gravity_config(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir);

std::uint64_t fnv1a_hash(const std::string& s);

}  // namespace pal

#endif
