#pragma once

// Built-in lung-sound descriptor taxonomy: six clinical attribute groups with
// their option texts, plus COPD and Healthy prototype profiles.

#include <string_view>

#include <json.hpp>

#include "triage/descriptors.hpp"

namespace triage {

inline constexpr std::string_view kRespiratoryTaskId = "lung-sound-copd";

inline constexpr std::string_view kRespiratoryTaxonomyJson = R"json({
  "groups": [
    {"id": "breath_sound_character", "options": [
      "normal vesicular breathing",
      "diminished or distant breath sounds",
      "bronchial breathing with high pitch",
      "absent breath sounds",
      "amphoric hollow breathing",
      "cavernous breathing sounds",
      "harsh breathing with increased intensity"]},
    {"id": "wheeze_presence", "options": [
      "no wheeze detected",
      "mild expiratory wheeze",
      "moderate expiratory wheeze",
      "severe expiratory wheeze",
      "inspiratory wheeze present",
      "biphasic wheeze (inspiratory and expiratory)",
      "polyphonic multiple wheeze",
      "monophonic single wheeze"]},
    {"id": "respiratory_phase_timing", "options": [
      "normal inspiratory to expiratory ratio 1:2",
      "prolonged expiratory phase ratio 1:3 or greater",
      "shortened expiratory phase ratio 1:1",
      "prolonged inspiratory phase",
      "equal inspiratory and expiratory phases",
      "irregular variable phase timing",
      "rapid shallow breathing pattern"]},
    {"id": "crackle_characteristics", "options": [
      "no crackles present",
      "fine high-pitched crackles early inspiratory",
      "fine crackles late inspiratory",
      "coarse low-pitched crackles early inspiratory",
      "coarse crackles throughout inspiration",
      "bibasilar crackles at lung bases",
      "diffuse crackles throughout lung fields",
      "velcro-like crackles"]},
    {"id": "respiratory_effort", "options": [
      "normal and effortless",
      "mildly increased effort",
      "moderately labored",
      "severely labored with accessory muscle use",
      "paradoxical breathing pattern",
      "shallow with minimal effort",
      "gasping or air hunger pattern"]},
    {"id": "spectral_frequency_profile", "options": [
      "normal frequency distribution 100-1000 Hz",
      "low frequency dominance below 400 Hz",
      "high frequency dominance above 800 Hz",
      "broadband frequency distribution",
      "narrow band frequency concentration",
      "bimodal frequency peaks",
      "irregular frequency scatter"]}
  ],
  "tasks": {
    "lung-sound-copd": {
      "classes": ["COPD", "Healthy"],
      "prototypes": {
        "COPD": {
          "breath_sound_character": "diminished or distant breath sounds",
          "wheeze_presence": "moderate expiratory wheeze",
          "respiratory_phase_timing": "prolonged expiratory phase ratio 1:3 or greater",
          "crackle_characteristics": "coarse low-pitched crackles early inspiratory",
          "respiratory_effort": "moderately labored",
          "spectral_frequency_profile": "low frequency dominance below 400 Hz"
        },
        "Healthy": {
          "breath_sound_character": "normal vesicular breathing",
          "wheeze_presence": "no wheeze detected",
          "respiratory_phase_timing": "normal inspiratory to expiratory ratio 1:2",
          "crackle_characteristics": "no crackles present",
          "respiratory_effort": "normal and effortless",
          "spectral_frequency_profile": "normal frequency distribution 100-1000 Hz"
        }
      }
    }
  }
})json";

inline TaxonomyConfig respiratory_taxonomy_config() {
  return parse_taxonomy_config(nlohmann::json::parse(kRespiratoryTaxonomyJson), "built-in respiratory taxonomy");
}

}  // namespace triage
