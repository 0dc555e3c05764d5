#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hydroflex::matrix {

enum class Service { SyncInertia, SynthInertia, Ffr, Fcr, Afrr, Mfrr, Rr, VoltVar, BlackStart };

inline constexpr std::array<Service, 9> kServices = {
    Service::SyncInertia, Service::SynthInertia, Service::Ffr,     Service::Fcr,       Service::Afrr,
    Service::Mfrr,        Service::Rr,           Service::VoltVar, Service::BlackStart};

const char* service_id(Service s);     // "sync-inertia", ...
const char* service_title(Service s);  // "SYNCHRONOUS INERTIA", ...
const char* service_timescale(Service s);
Service service_from_id(const std::string& id);
/// Black start has a single (turbine) column.
inline bool has_pump_column(Service s) { return s != Service::BlackStart; }

enum class ScoreMode { Turbine, Pump, Combined };

/// Score in tenths (0..50).
struct ServiceScore {
  Service service = Service::Fcr;
  ScoreMode mode = ScoreMode::Turbine;
  int tenths = 0;
  std::optional<std::pair<int, int>> hsc_pair;

  double value() const { return tenths / 10.0; }
  bool operator==(const ServiceScore&) const = default;
};

struct ScoringConfig {
  std::map<Service, double> reference_mw;  // capability giving 5.0
};

ScoringConfig default_scoring();

/// round_to_0.1(5 min(1, capability / reference)).
ServiceScore score_service(Service s, double capability, const ScoringConfig& cfg, ScoreMode mode = ScoreMode::Turbine);

/// mFRR and RR copy the aFRR score; a fixed-speed pump gets 0 for both.
std::pair<ServiceScore, ServiceScore> derive_mfrr_rr(const ServiceScore& afrr, bool fixed_speed_pump = false);

/// Combined HSC cell; scores are shown side by side, never summed.
ServiceScore aggregate_hsc(const ServiceScore& turbine, const ServiceScore& pump);
std::string hsc_cell_text(const ServiceScore& combined);

std::string format_tenths(int tenths);

struct MatrixRow {
  std::string demonstrator;
  std::string stack;
  // Per service: turbine column and pump column. A combined HSC score sits
  // in the turbine slot and spans both columns.
  std::array<std::optional<ServiceScore>, 9> turbine;
  std::array<std::optional<ServiceScore>, 9> pump;

  bool operator==(const MatrixRow&) const = default;
};

struct AncillaryServicesMatrix {
  std::vector<MatrixRow> rows;
  bool operator==(const AncillaryServicesMatrix&) const = default;
};

/// Throws ConfigError on out-of-range scores or HSC pairs outside the turbine slot.
void validate(const AncillaryServicesMatrix& m);

enum class Format { Csv, Json, Markdown };
Format format_from_string(const std::string& s);
const char* format_extension(Format f);

std::string render(const AncillaryServicesMatrix& m, Format f);
std::string render_csv(const AncillaryServicesMatrix& m);
std::string render_json(const AncillaryServicesMatrix& m);
std::string render_markdown(const AncillaryServicesMatrix& m);

AncillaryServicesMatrix parse_json(const std::string& text);
AncillaryServicesMatrix load_json(const std::string& path);

inline constexpr const char* kNotApplicable = "NA";

}  // namespace hydroflex::matrix
