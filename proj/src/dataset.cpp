#include "dataset.h"

#include "audio_io.h"
#include "error.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace salf {

namespace {

// minimal CSV: commas split fields, double quotes protect embedded commas
std::vector<std::string> split_csv_line(const std::string & line, size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) {
        fail(errc::parse, "manifest line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(cur);
    return fields;
}

std::string csv_escape(const std::string & s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

double parse_double(const std::string & s, size_t line_no, const char * what) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception &) {
        fail(errc::parse,
             "manifest line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

std::string strip(const std::string & s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

constexpr const char * manifest_header = "id,audio_path,feature_path,mos,ratings";

} // namespace

manifest load_manifest(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        fail(errc::io_failure, "cannot open manifest '" + path + "'");
    }

    manifest m;
    const std::filesystem::path p(path);
    m.dir = p.has_parent_path() ? p.parent_path().string() : ".";
    m.name = p.stem().string();

    std::string line;
    size_t line_no = 0;
    if (!std::getline(in, line)) {
        fail(errc::parse, "manifest is empty");
    }
    ++line_no;
    if (strip(line) != manifest_header) {
        fail(errc::parse, "manifest header must be '" + std::string(manifest_header) + "'");
    }

    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) {
            continue;
        }
        auto fields = split_csv_line(strip(line), line_no);
        if (fields.size() != 5) {
            fail(errc::parse, "manifest line " + std::to_string(line_no) + ": expected 5 fields, got " +
                                  std::to_string(fields.size()));
        }
        utterance u;
        u.id = strip(fields[0]);
        u.audio_path = strip(fields[1]);
        u.feature_path = strip(fields[2]);
        const std::string mos_field = strip(fields[3]);
        const std::string ratings_field = strip(fields[4]);

        if (u.id.empty()) {
            fail(errc::parse, "manifest line " + std::to_string(line_no) + ": empty id");
        }
        if (!seen.insert(u.id).second) {
            fail(errc::duplicate_id, "duplicate utterance id '" + u.id + "' (line " +
                                         std::to_string(line_no) + ")");
        }
        if (u.audio_path.empty() && u.feature_path.empty()) {
            fail(errc::missing_path, "utterance '" + u.id + "' has neither audio_path nor feature_path");
        }

        if (!ratings_field.empty()) {
            std::stringstream ss(ratings_field);
            std::string tok;
            while (std::getline(ss, tok, '|')) {
                const double r = parse_double(strip(tok), line_no, "rating");
                if (r < 1.0 || r > 5.0) {
                    fail(errc::mos_out_of_range, "utterance '" + u.id + "': rating " + strip(tok) +
                                                     " outside [1, 5]");
                }
                u.ratings.push_back(r);
            }
            if (u.ratings.empty()) {
                fail(errc::parse, "manifest line " + std::to_string(line_no) + ": empty ratings list");
            }
            // the label is always the mean of the per-rater scores
            u.mos = std::accumulate(u.ratings.begin(), u.ratings.end(), 0.0) /
                    static_cast<double>(u.ratings.size());
        } else if (!mos_field.empty()) {
            u.mos = parse_double(mos_field, line_no, "mos");
        } else {
            fail(errc::parse, "manifest line " + std::to_string(line_no) + ": neither mos nor ratings");
        }
        if (u.mos < 1.0 || u.mos > 5.0) {
            fail(errc::mos_out_of_range,
                 "utterance '" + u.id + "': mos " + std::to_string(u.mos) + " outside [1, 5]");
        }
        m.utterances.push_back(std::move(u));
    }
    return m;
}

void save_manifest(const manifest & m, const std::string & path) {
    std::FILE * f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) {
        fail(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    std::fprintf(f, "%s\n", manifest_header);
    for (const auto & u : m.utterances) {
        std::string ratings;
        for (size_t i = 0; i < u.ratings.size(); ++i) {
            if (i > 0) {
                ratings += '|';
            }
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.10g", u.ratings[i]);
            ratings += buf;
        }
        std::fprintf(f, "%s,%s,%s,%.10g,%s\n", csv_escape(u.id).c_str(),
                     csv_escape(u.audio_path).c_str(), csv_escape(u.feature_path).c_str(), u.mos,
                     csv_escape(ratings).c_str());
    }
    if (std::fclose(f) != 0) {
        fail(errc::io_failure, "write error on '" + path + "'");
    }
}

std::string resolve_path(const std::string & base_dir, const std::string & path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) {
        return path;
    }
    return (std::filesystem::path(base_dir) / p).string();
}

std::vector<double> resolve_features(const utterance & u, feature_kind kind,
                                     const std::string & base_dir, const cepstral_config & cfg) {
    const bool cepstral = kind == feature_kind::mfcc || kind == feature_kind::lfcc;

    if (!u.feature_path.empty()) {
        const auto fm = read_feature_file(resolve_path(base_dir, u.feature_path));
        if (fm.kind != kind) {
            fail(errc::kind_mismatch, "utterance '" + u.id + "': feature file holds " +
                                          feature_kind_name(fm.kind) + ", requested " +
                                          feature_kind_name(kind));
        }
        return mean_pool(fm);
    }

    if (!cepstral) {
        fail(errc::missing_path, "utterance '" + u.id + "': " + feature_kind_name(kind) +
                                     " features need a feature_path");
    }
    if (u.audio_path.empty()) {
        fail(errc::missing_path, "utterance '" + u.id + "': cepstral features need an audio_path");
    }
    auto buf = read_wav_file(resolve_path(base_dir, u.audio_path));
    buf = resample(buf, working_sample_rate);
    const auto fm = kind == feature_kind::mfcc ? mfcc(buf, cfg) : lfcc(buf, cfg);
    return mean_pool(fm);
}

std::vector<std::vector<double>> resolve_all_features(const manifest & m, feature_kind kind,
                                                      const cepstral_config & cfg) {
    std::vector<std::vector<double>> out;
    out.reserve(m.utterances.size());
    for (const auto & u : m.utterances) {
        auto vec = resolve_features(u, kind, m.dir, cfg);
        if (!out.empty() && vec.size() != out.front().size()) {
            fail(errc::feature_dim_mismatch, "utterance '" + u.id + "': feature dim " +
                                                 std::to_string(vec.size()) + " != " +
                                                 std::to_string(out.front().size()));
        }
        out.push_back(std::move(vec));
    }
    return out;
}

} // namespace salf
