#pragma once

// Seeded synthetic multi-site ROI cohorts.
//
// Each region contributes four columns (L_<r>_GM, R_<r>_GM, L_<r>_CSF,
// R_<r>_CSF) drawn jointly Gaussian with correlation
//
//   [[1, g], [g, 1]] (tissue)  kron  [[1, h], [h, 1]] (hemisphere)
//
// where h = r_lr and g = r_gmcsf. Regions are independent. Patient shifts,
// site offsets, and age/sex terms are added on top of the correlated draw.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwhite/error.hpp"
#include "pairwhite/table.hpp"

namespace pairwhite {

struct PlantedEffect {
  std::string column;
  double shift = 0.0;  // in units of the column's noise sd, added for patients
};

inline std::vector<std::string> default_region_names() {
  return {"Accumbens",
          "Amygdala",
          "Caudate",
          "CerebellumExterior",
          "CerebellumWhiteMatter",
          "CerebralWhiteMatter",
          "Hippocampus",
          "InferiorLateralVentricle",
          "LateralVentricle",
          "Pallidum",
          "Putamen",
          "Thalamus",
          "VentralDC",
          "BasalForebrain",
          "AnteriorCingulateGyrus",
          "AnteriorInsula",
          "AnteriorOrbitalGyrus",
          "AngularGyrus",
          "CalcarineCortex",
          "CentralOperculum",
          "Cuneus",
          "Entorhinal",
          "FrontalOperculum",
          "FrontalPole",
          "FusiformGyrus",
          "GyrusRectus",
          "InferiorOccipitalGyrus",
          "InferiorTemporalGyrus",
          "Lingual",
          "LateralOrbitalGyrus",
          "MiddleCingulateGyrus",
          "MedialFrontalCortex",
          "MiddleFrontalGyrus",
          "MiddleOccipitalGyrus",
          "MedialOrbitalGyrus",
          "PostcentralGyrusMedialSegment",
          "PrecentralGyrusMedialSegment",
          "SuperiorFrontalGyrusMedialSegment",
          "MiddleTemporalGyrus",
          "OccipitalPole",
          "OccipitalFusiformGyrus",
          "OpercularInferiorFrontalGyrus",
          "OrbitalInferiorFrontalGyrus",
          "PosteriorCingulateGyrus",
          "Precuneus",
          "Parahippocampus",
          "PosteriorInsula",
          "ParietalOperculum",
          "PostcentralGyrus",
          "PosteriorOrbitalGyrus",
          "PlanumPolare",
          "PrecentralGyrus",
          "PlanumTemporale",
          "SubcallosalArea",
          "SuperiorFrontalGyrus",
          "SupplementaryMotorCortex",
          "SupramarginalGyrus",
          "SuperiorOccipitalGyrus",
          "SuperiorParietalLobule",
          "SuperiorTemporalGyrus",
          "TemporalPole",
          "TriangularInferiorFrontalGyrus",
          "TransverseTemporalGyrus",
          "CerebellarVermalLobulesI-V",
          "CerebellarVermalLobulesVI-VII",
          "CerebellarVermalLobulesVIII-X",
          "OpticChiasm",
          "ThirdVentricle",
          "FourthVentricle",
          "CerebrumMotor"};
}

struct CohortSpec {
  Index n_subjects = 861;
  std::vector<std::string> region_names = default_region_names();
  double r_lr = 0.7;
  double r_gmcsf = -0.5;
  std::vector<PlantedEffect> effects;
  int site_count = 12;
  std::vector<double> site_offsets;  // empty means all zero
  double age_mean = 37.69;
  double age_sd = 11.75;
  double age_effect = 0.0;  // per sd of age, added to every feature
  double female_fraction = 0.564;
  double sex_effect = 0.0;  // added to every feature for female subjects
  double prevalence = 0.441;
  std::uint64_t seed = 0;

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& r : region_names)
      for (const char* col : {"L_%_GM", "R_%_GM", "L_%_CSF", "R_%_CSF"}) {
        std::string s(col);
        s.replace(s.find('%'), 1, r);
        out.push_back(std::move(s));
      }
    return out;
  }

  Eigen::Matrix4d region_correlation() const {
    Eigen::Matrix2d tissue, hemi;
    tissue << 1.0, r_gmcsf, r_gmcsf, 1.0;
    hemi << 1.0, r_lr, r_lr, 1.0;
    Eigen::Matrix4d c;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) c.block<2, 2>(2 * a, 2 * b) = tissue(a, b) * hemi;
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("cohort spec: " + msg); };
    if (n_subjects < 4) fail("n_subjects must be at least 4");
    if (region_names.empty()) fail("region_names is empty");
    {
      std::unordered_set<std::string> seen;
      for (const auto& r : region_names)
        if (r.empty() || !seen.insert(r).second) fail("region names must be unique and non-empty");
    }
    if (!(std::abs(r_lr) < 1.0)) fail("r_lr must lie in (-1, 1)");
    if (!(std::abs(r_gmcsf) < 1.0)) fail("r_gmcsf must lie in (-1, 1)");
    {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(region_correlation());
      const double lo = es.eigenvalues().minCoeff();
      if (!(lo > 0.0)) {
        std::ostringstream os;
        os << "within-region correlation matrix is not positive definite (eigenvalue " << lo
           << ")";
        fail(os.str());
      }
    }
    if (!(prevalence > 0.0 && prevalence < 1.0)) {
      std::ostringstream os;
      os << "prevalence " << prevalence << " must lie in (0, 1)";
      fail(os.str());
    }
    if (site_count < 1) fail("site_count must be at least 1");
    if (!site_offsets.empty() && static_cast<int>(site_offsets.size()) != site_count)
      fail("site_offsets must have site_count entries");
    if (!(female_fraction >= 0.0 && female_fraction <= 1.0)) fail("female_fraction must lie in [0, 1]");
    if (!(age_sd >= 0.0)) fail("age_sd must be non-negative");
    const auto cols = column_names();
    std::unordered_set<std::string> names(cols.begin(), cols.end());
    for (const auto& e : effects) {
      if (!names.count(e.column)) fail("effect column '" + e.column + "' does not exist");
      if (!std::isfinite(e.shift)) fail("effect shift must be finite");
    }
    const auto pos = std::llround(prevalence * static_cast<double>(n_subjects));
    if (pos < 1 || pos >= n_subjects) fail("prevalence leaves a class empty");
  }
};

inline nlohmann::json spec_to_json(const CohortSpec& s) {
  nlohmann::json effects = nlohmann::json::array();
  for (const auto& e : s.effects) effects.push_back({{"column", e.column}, {"shift", e.shift}});
  return {{"n_subjects", s.n_subjects},     {"region_names", s.region_names},
          {"r_lr", s.r_lr},                 {"r_gmcsf", s.r_gmcsf},
          {"effects", effects},             {"site_count", s.site_count},
          {"site_offsets", s.site_offsets}, {"age_mean", s.age_mean},
          {"age_sd", s.age_sd},             {"age_effect", s.age_effect},
          {"female_fraction", s.female_fraction},
          {"sex_effect", s.sex_effect},     {"prevalence", s.prevalence},
          {"seed", s.seed}};
}

// Keys absent from `j` keep the values of `base`; unknown keys are errors.
inline CohortSpec spec_from_json(const nlohmann::json& j, CohortSpec base = {}) {
  if (!j.is_object()) throw ConfigError("cohort spec must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_subjects") base.n_subjects = v.get<Index>();
      else if (key == "region_names") base.region_names = v.get<std::vector<std::string>>();
      else if (key == "r_lr") base.r_lr = v.get<double>();
      else if (key == "r_gmcsf") base.r_gmcsf = v.get<double>();
      else if (key == "effects") {
        base.effects.clear();
        for (const auto& e : v) {
          for (const auto& [ek, _] : e.items())
            if (ek != "column" && ek != "shift")
              throw ConfigError("cohort spec effect: unknown key '" + ek + "'");
          base.effects.push_back({e.at("column").get<std::string>(), e.at("shift").get<double>()});
        }
      } else if (key == "site_count") base.site_count = v.get<int>();
      else if (key == "site_offsets") base.site_offsets = v.get<std::vector<double>>();
      else if (key == "age_mean") base.age_mean = v.get<double>();
      else if (key == "age_sd") base.age_sd = v.get<double>();
      else if (key == "age_effect") base.age_effect = v.get<double>();
      else if (key == "female_fraction") base.female_fraction = v.get<double>();
      else if (key == "sex_effect") base.sex_effect = v.get<double>();
      else if (key == "prevalence") base.prevalence = v.get<double>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else throw ConfigError("cohort spec: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cohort spec: ") + e.what());
  }
  return base;
}

inline std::uint64_t spec_hash(const CohortSpec& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : spec_to_json(s).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// 861 subjects over 12 sites with 44.1% patients and 70 regions (280
// columns). Three planted effects: pallidum, hippocampus, lateral ventricle.
inline CohortSpec default_bd_like_spec() {
  CohortSpec s;
  s.effects = {{"R_Pallidum_GM", 0.45},
               {"L_Hippocampus_GM", -0.40},
               {"R_LateralVentricle_CSF", 0.40}};
  s.site_offsets.resize(static_cast<std::size_t>(s.site_count));
  for (int k = 0; k < s.site_count; ++k)
    s.site_offsets[static_cast<std::size_t>(k)] = -0.3 + 0.6 * k / (s.site_count - 1);
  s.age_effect = -0.25;
  s.sex_effect = 0.15;
  return s;
}

struct GroundTruth {
  std::vector<PlantedEffect> effects;
  double age_effect = 0.0;
  double sex_effect = 0.0;
  std::vector<double> site_offsets;
  Index positives = 0;
  std::uint64_t spec_hash = 0;

  nlohmann::json to_json(const CohortSpec& spec) const {
    nlohmann::json eff = nlohmann::json::array();
    for (const auto& e : effects) eff.push_back({{"column", e.column}, {"shift", e.shift}});
    return {{"format", "pairwhite-ground-truth"},
            {"version", 1},
            {"spec", spec_to_json(spec)},
            {"spec_hash", spec_hash},
            {"effects", eff},
            {"confounds",
             {{"age_effect_per_sd", age_effect},
              {"sex_effect_female", sex_effect},
              {"site_offsets", site_offsets}}},
            {"positives", positives}};
  }
};

struct GeneratedCohort {
  FeatureTable table;
  GroundTruth truth;
};

inline std::string site_label(int k) {
  std::ostringstream os;
  os << "site" << (k + 1 < 10 ? "0" : "") << k + 1;
  return os.str();
}

// Columns: label, age, sex, site, then the region grid.
inline GeneratedCohort generate(const CohortSpec& spec) {
  spec.validate();
  const Index n = spec.n_subjects;
  const auto n_regions = static_cast<Index>(spec.region_names.size());
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  GeneratedCohort out;
  auto& t = out.table;
  t.label_name = "label";
  t.feature_names = spec.column_names();

  const Index n_pos = std::llround(spec.prevalence * static_cast<double>(n));
  t.labels.assign(static_cast<std::size_t>(n), 0);
  std::fill(t.labels.begin(), t.labels.begin() + n_pos, 1);
  std::shuffle(t.labels.begin(), t.labels.end(), rng);

  std::vector<int> site(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) site[static_cast<std::size_t>(i)] = static_cast<int>(i % spec.site_count);
  std::shuffle(site.begin(), site.end(), rng);

  std::vector<double> age_z(static_cast<std::size_t>(n));
  std::vector<bool> female(static_cast<std::size_t>(n));
  Covariate age{"age", {}}, sex{"sex", {}}, site_col{"site", {}};
  for (Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    age_z[ii] = normal(rng);
    female[ii] = unif(rng) < spec.female_fraction;
    age.values.push_back(format_double(spec.age_mean + spec.age_sd * age_z[ii]));
    sex.values.push_back(female[ii] ? "F" : "M");
    site_col.values.push_back(site_label(site[ii]));
  }
  t.covariates = {std::move(age), std::move(sex), std::move(site_col)};

  const Eigen::Matrix4d chol = spec.region_correlation().llt().matrixL();
  t.features.resize(n, 4 * n_regions);
  Eigen::Vector4d u;
  for (Index i = 0; i < n; ++i)
    for (Index r = 0; r < n_regions; ++r) {
      for (int k = 0; k < 4; ++k) u[k] = normal(rng);
      t.features.block<1, 4>(i, 4 * r) = (chol * u).transpose();
    }

  for (const auto& e : spec.effects) {
    Index j = 0;
    while (t.feature_names[static_cast<std::size_t>(j)] != e.column) ++j;
    for (Index i = 0; i < n; ++i)
      if (t.labels[static_cast<std::size_t>(i)]) t.features(i, j) += e.shift;
  }
  for (Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    double shift = spec.age_effect * age_z[ii] + (female[ii] ? spec.sex_effect : 0.0);
    if (!spec.site_offsets.empty()) shift += spec.site_offsets[static_cast<std::size_t>(site[ii])];
    t.features.row(i).array() += shift;
  }

  out.truth.effects = spec.effects;
  out.truth.age_effect = spec.age_effect;
  out.truth.sex_effect = spec.sex_effect;
  out.truth.site_offsets = spec.site_offsets;
  out.truth.positives = n_pos;
  out.truth.spec_hash = spec_hash(spec);
  return out;
}

}  // namespace pairwhite
