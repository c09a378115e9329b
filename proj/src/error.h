#pragma once

#include <stdexcept>
#include <string>

namespace salf {

enum class errc {
    io_failure,
    malformed_header,
    unsupported_encoding,
    empty_audio,
    too_short,
    bad_magic,
    dim_mismatch,
    shape_mismatch,
    degenerate_batch,
    odd_length,
    not_scalar,
    bad_config,
    version_unsupported,
    config_mismatch,
    too_few_utterances,
    too_few_samples,
    feature_dim_mismatch,
    empty_split,
    length_mismatch,
    constant_input,
    all_tied,
    duplicate_id,
    mos_out_of_range,
    missing_path,
    parse,
    kind_mismatch,
    invalid_argument,
    internal,
};

constexpr const char * errc_name(errc c) {
    switch (c) {
        case errc::io_failure:           return "IoFailure";
        case errc::malformed_header:     return "MalformedHeader";
        case errc::unsupported_encoding: return "UnsupportedEncoding";
        case errc::empty_audio:          return "EmptyAudio";
        case errc::too_short:            return "TooShort";
        case errc::bad_magic:            return "BadMagic";
        case errc::dim_mismatch:         return "DimMismatch";
        case errc::shape_mismatch:       return "ShapeMismatch";
        case errc::degenerate_batch:     return "DegenerateBatch";
        case errc::odd_length:           return "OddLength";
        case errc::not_scalar:           return "NotScalar";
        case errc::bad_config:           return "BadConfig";
        case errc::version_unsupported:  return "VersionUnsupported";
        case errc::config_mismatch:      return "ConfigMismatch";
        case errc::too_few_utterances:   return "TooFewUtterances";
        case errc::too_few_samples:      return "TooFewSamples";
        case errc::feature_dim_mismatch: return "FeatureDimMismatch";
        case errc::empty_split:          return "EmptySplit";
        case errc::length_mismatch:      return "LengthMismatch";
        case errc::constant_input:       return "ConstantInput";
        case errc::all_tied:             return "AllTied";
        case errc::duplicate_id:         return "DuplicateId";
        case errc::mos_out_of_range:     return "MosOutOfRange";
        case errc::missing_path:         return "MissingPath";
        case errc::parse:                return "ParseError";
        case errc::kind_mismatch:        return "KindMismatch";
        case errc::invalid_argument:     return "InvalidArgument";
        case errc::internal:             return "Internal";
    }
    return "Unknown";
}

// Exception thrown by every fallible operation in the core. The C boundary
// catches it and converts code/message into salf_status + salf_last_error.
class error : public std::runtime_error {
  public:
    error(errc code, const std::string & msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    errc code() const { return code_; }

  private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string & msg) {
    throw error(code, msg);
}

inline void check(bool cond, errc code, const std::string & msg) {
    if (!cond) {
        fail(code, msg);
    }
}

} // namespace salf
