#pragma once

// Dataset manifests: a CSV index binding utterance ids to audio or feature
// files and aggregated MOS labels, plus feature resolution for training and
// evaluation.

#include "dsp_features.h"

#include <optional>
#include <string>
#include <vector>

namespace salf {

struct utterance {
    std::string id;
    std::string audio_path;   // empty when absent
    std::string feature_path; // empty when absent
    double mos = 0.0;         // in [1, 5]; mean of ratings when those exist
    std::vector<double> ratings;
};

struct manifest {
    std::vector<utterance> utterances;
    std::string dir;  // directory the manifest was loaded from
    std::string name; // file stem, informational
};

// CSV with header `id,audio_path,feature_path,mos,ratings`; ratings are
// pipe-separated and override mos with their mean. Relative paths resolve
// against the manifest's directory.
manifest load_manifest(const std::string & path);
void save_manifest(const manifest & m, const std::string & path);

std::string resolve_path(const std::string & base_dir, const std::string & path);

// Turn one utterance into the pooled feature vector for `kind`:
// mfcc/lfcc read + resample the audio and extract; wav2vec/xvector/raw read
// the SALF-F1 file (whose kind must match). A feature file is also accepted
// for the cepstral kinds when one is already present.
std::vector<double> resolve_features(const utterance & u, feature_kind kind,
                                     const std::string & base_dir,
                                     const cepstral_config & cfg = {});

// resolve every utterance, enforcing one consistent dimensionality
std::vector<std::vector<double>> resolve_all_features(const manifest & m, feature_kind kind,
                                                      const cepstral_config & cfg = {});

} // namespace salf
