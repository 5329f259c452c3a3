#pragma once

// Pair manifests: which feature columns are whitened together, grouped into
// ordered stages. Within a stage pairs are disjoint, so the stage transform
// is block diagonal with identity blocks for unpaired columns.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwhite/error.hpp"
#include "pairwhite/spectral.hpp"
#include "pairwhite/table.hpp"

namespace pairwhite {

struct FeatureId {
  Index index = 0;
  std::string name;

  friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

struct FeaturePair {
  FeatureId first;
  FeatureId second;

  friend bool operator==(const FeaturePair&, const FeaturePair&) = default;
};

struct WhiteningStage {
  std::string label;
  double alpha = 1.0;
  std::vector<FeaturePair> pairs;

  friend bool operator==(const WhiteningStage&, const WhiteningStage&) = default;
};

class PairManifest {
 public:
  PairManifest() = default;

  PairManifest(std::vector<WhiteningStage> stages, Index dims)
      : stages_(std::move(stages)), dims_(dims) {
    validate();
  }

  const std::vector<WhiteningStage>& stages() const noexcept { return stages_; }
  Index dims() const noexcept { return dims_; }

  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& s : stages_) n += s.pairs.size();
    return n;
  }

  // Copy with the alpha of every stage carrying `label` replaced.
  PairManifest with_alpha(std::string_view label, double alpha) const {
    check_alpha(alpha);
    auto stages = stages_;
    bool found = false;
    for (auto& s : stages)
      if (s.label == label) {
        s.alpha = alpha;
        found = true;
      }
    if (!found)
      throw ConfigError("alpha override names unknown stage '" + std::string(label) + "'");
    return PairManifest(std::move(stages), dims_);
  }

  friend bool operator==(const PairManifest&, const PairManifest&) = default;

 private:
  void validate() const {
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      const auto& st = stages_[s];
      auto where = [&](std::size_t p) {
        std::ostringstream os;
        os << "stage " << s + 1 << " ('" << st.label << "'), pair " << p + 1 << ": ";
        return os.str();
      };
      if (!(st.alpha >= 0.0 && st.alpha <= 1.0)) {
        std::ostringstream os;
        os << "stage " << s + 1 << " ('" << st.label << "'): alpha " << st.alpha
           << " outside [0, 1]";
        throw ConfigError(os.str());
      }
      std::unordered_set<Index> used;
      for (std::size_t p = 0; p < st.pairs.size(); ++p) {
        const auto& pr = st.pairs[p];
        for (const auto* f : {&pr.first, &pr.second})
          if (f->index < 0 || f->index >= dims_)
            throw ConfigError(where(p) + "feature '" + f->name + "' index " +
                              std::to_string(f->index) + " outside [0, " +
                              std::to_string(dims_) + ")");
        if (pr.first.index == pr.second.index)
          throw ConfigError(where(p) + "pair members identical ('" + pr.first.name + "')");
        for (const auto* f : {&pr.first, &pr.second})
          if (!used.insert(f->index).second)
            throw ConfigError(where(p) + "feature '" + f->name +
                              "' already appears in another pair of this stage "
                              "(non-disjoint pairs)");
      }
    }
  }

  std::vector<WhiteningStage> stages_;
  Index dims_ = 0;
};

// Manifest document (JSON):
//
//   {
//     "stages": [
//       {
//         "label": "left-right",
//         "alpha": 0.3,
//         "pairs": [
//           ["L_Amygdala_GM", "R_Amygdala_GM"],
//           ["L_Amygdala_CSF", "R_Amygdala_CSF"]
//         ]
//       }
//     ]
//   }
//
// An optional top-level "version": 1 is accepted. Unknown keys are errors.
inline PairManifest parse_manifest(std::string_view text,
                                   const std::vector<std::string>& feature_names) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("malformed manifest: top level must be an object");
  for (const auto& [key, _] : doc.items())
    if (key != "stages" && key != "version")
      throw ConfigError("manifest: unknown key '" + key + "'");
  if (doc.contains("version") && doc["version"] != 1)
    throw ConfigError("manifest: unsupported version " + doc["version"].dump());
  if (!doc.contains("stages") || !doc["stages"].is_array())
    throw ConfigError("manifest: 'stages' must be a list");

  std::unordered_map<std::string, Index> by_name;
  for (std::size_t j = 0; j < feature_names.size(); ++j)
    by_name.emplace(feature_names[j], static_cast<Index>(j));

  std::vector<WhiteningStage> stages;
  std::size_t s = 0;
  for (const auto& js : doc["stages"]) {
    ++s;
    const std::string ctx = "manifest stage " + std::to_string(s);
    if (!js.is_object()) throw ConfigError(ctx + ": must be an object");
    for (const auto& [key, _] : js.items())
      if (key != "label" && key != "alpha" && key != "pairs")
        throw ConfigError(ctx + ": unknown key '" + key + "'");
    WhiteningStage st;
    if (!js.contains("label") || !js["label"].is_string())
      throw ConfigError(ctx + ": 'label' must be a string");
    st.label = js["label"].get<std::string>();
    if (!js.contains("alpha") || !js["alpha"].is_number())
      throw ConfigError(ctx + " ('" + st.label + "'): 'alpha' must be a number");
    st.alpha = js["alpha"].get<double>();
    if (!js.contains("pairs") || !js["pairs"].is_array())
      throw ConfigError(ctx + " ('" + st.label + "'): 'pairs' must be a list");
    std::size_t p = 0;
    for (const auto& jp : js["pairs"]) {
      ++p;
      const std::string pctx =
          ctx + " ('" + st.label + "'), pair " + std::to_string(p) + ": ";
      if (!jp.is_array() || jp.size() != 2 || !jp[0].is_string() || !jp[1].is_string())
        throw ConfigError(pctx + "expected a two-element list of column names");
      FeaturePair pr;
      for (int k = 0; k < 2; ++k) {
        const auto name = jp[static_cast<std::size_t>(k)].get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ConfigError(pctx + "unknown feature '" + name + "'");
        (k == 0 ? pr.first : pr.second) = FeatureId{it->second, name};
      }
      st.pairs.push_back(std::move(pr));
    }
    stages.push_back(std::move(st));
  }
  return PairManifest(std::move(stages), static_cast<Index>(feature_names.size()));
}

// One pair per line so manifests diff cleanly.
inline std::string serialize_manifest(const PairManifest& m) {
  using nlohmann::json;
  std::ostringstream os;
  os << "{\n  \"version\": 1,\n  \"stages\": [";
  for (std::size_t s = 0; s < m.stages().size(); ++s) {
    const auto& st = m.stages()[s];
    os << (s ? ",\n" : "\n") << "    {\n"
       << "      \"label\": " << json(st.label).dump() << ",\n"
       << "      \"alpha\": " << format_double(st.alpha) << ",\n"
       << "      \"pairs\": [";
    for (std::size_t p = 0; p < st.pairs.size(); ++p) {
      const auto& pr = st.pairs[p];
      os << (p ? ",\n" : "\n") << "        [" << json(pr.first.name).dump() << ", "
         << json(pr.second.name).dump() << "]";
    }
    os << (st.pairs.empty() ? "]\n" : "\n      ]\n") << "    }";
  }
  os << (m.stages().empty() ? "]\n}\n" : "\n  ]\n}\n");
  return os.str();
}

// FNV-1a over the serialized manifest.
inline std::uint64_t manifest_hash(const PairManifest& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_manifest(m)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct NamingConvention {
  std::string left_prefix = "L_";
  std::string right_prefix = "R_";
  std::string gm_suffix = "_GM";
  std::string csf_suffix = "_CSF";
  std::string left_right_label = "left-right";
  std::string gm_csf_label = "gm-csf";
  double alpha_left_right = 0.3;
  double alpha_gm_csf = 1.0;
};

struct UnpairedFeature {
  std::string name;
  bool no_left_right_partner = true;
  bool no_gm_csf_partner = true;
};

struct DerivedManifest {
  PairManifest manifest;
  // Columns lacking a partner in at least one stage; they pass through that
  // stage unchanged.
  std::vector<UnpairedFeature> unpaired;
};

// Stage 1 pairs L<x><t> with R<x><t>; stage 2 pairs <h><x>GM with <h><x>CSF.
// Pairs are ordered by the column position of their first member.
inline DerivedManifest derive_manifest_from_naming(const std::vector<std::string>& names,
                                                   const NamingConvention& conv = {}) {
  check_alpha(conv.alpha_left_right);
  check_alpha(conv.alpha_gm_csf);
  std::unordered_map<std::string, Index> by_name;
  for (std::size_t j = 0; j < names.size(); ++j)
    by_name.emplace(names[j], static_cast<Index>(j));

  auto starts = [](std::string_view s, std::string_view p) {
    return !p.empty() && s.size() > p.size() && s.substr(0, p.size()) == p;
  };
  auto ends = [](std::string_view s, std::string_view p) {
    return !p.empty() && s.size() > p.size() && s.substr(s.size() - p.size()) == p;
  };

  WhiteningStage lr{conv.left_right_label, conv.alpha_left_right, {}};
  WhiteningStage gc{conv.gm_csf_label, conv.alpha_gm_csf, {}};
  std::vector<bool> in_lr(names.size(), false), in_gc(names.size(), false);

  for (std::size_t j = 0; j < names.size(); ++j) {
    const std::string& n = names[j];
    if (starts(n, conv.left_prefix)) {
      auto partner = conv.right_prefix + n.substr(conv.left_prefix.size());
      auto it = by_name.find(partner);
      if (it != by_name.end() && !in_lr[static_cast<std::size_t>(it->second)]) {
        lr.pairs.push_back({{static_cast<Index>(j), n}, {it->second, partner}});
        in_lr[j] = in_lr[static_cast<std::size_t>(it->second)] = true;
      }
    }
    if (ends(n, conv.gm_suffix)) {
      auto partner = n.substr(0, n.size() - conv.gm_suffix.size()) + conv.csf_suffix;
      auto it = by_name.find(partner);
      if (it != by_name.end() && !in_gc[static_cast<std::size_t>(it->second)]) {
        gc.pairs.push_back({{static_cast<Index>(j), n}, {it->second, partner}});
        in_gc[j] = in_gc[static_cast<std::size_t>(it->second)] = true;
      }
    }
  }

  DerivedManifest out{PairManifest({std::move(lr), std::move(gc)},
                                   static_cast<Index>(names.size())),
                      {}};
  for (std::size_t j = 0; j < names.size(); ++j)
    if (!in_lr[j] || !in_gc[j]) out.unpaired.push_back({names[j], !in_lr[j], !in_gc[j]});
  return out;
}

}  // namespace pairwhite
