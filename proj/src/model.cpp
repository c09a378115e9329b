#include "model.h"

#include "error.h"
#include "io_util.h"
#include "rng.h"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace salf {

void validate_config(const model_config & cfg) {
    check(cfg.depth >= 1, errc::bad_config, "depth must be >= 1");
    check(cfg.channels >= 1, errc::bad_config, "channels must be >= 1");
    check(cfg.lfe_dim >= 1, errc::bad_config, "lfe_dim must be >= 1");
    check(cfg.input_dim >= 1, errc::bad_config, "input_dim must be >= 1");
    const int64_t divisor = int64_t{ 1 } << (cfg.depth - 1);
    if (cfg.input_dim % divisor != 0) {
        fail(errc::bad_config, "input_dim " + std::to_string(cfg.input_dim) +
                                   " not divisible by 2^(depth-1) = " + std::to_string(divisor));
    }
    check(cfg.depth < 62, errc::bad_config, "depth out of range");
}

int64_t padded_dim(int64_t raw_dim, int depth) {
    check(raw_dim >= 1, errc::invalid_argument, "padded_dim: raw_dim must be >= 1");
    check(depth >= 1 && depth < 62, errc::invalid_argument, "padded_dim: bad depth");
    const int64_t divisor = int64_t{ 1 } << (depth - 1);
    return (raw_dim + divisor - 1) / divisor * divisor;
}

size_t param_count(const model_config & cfg) {
    validate_config(cfg);
    const int64_t ch = cfg.channels;
    size_t total = 0;
    for (int stage = 0; stage < cfg.depth; ++stage) {
        const int64_t c_in_first = stage == 0 ? 1 : ch;
        total += static_cast<size_t>(ch * c_in_first * 3 + ch + 2 * ch); // conv1 w,b + bn
        total += static_cast<size_t>(ch * ch * 3 + ch + 2 * ch);         // conv2 w,b + bn
        const int64_t len = cfg.input_dim >> stage;
        total += static_cast<size_t>(cfg.lfe_dim * (ch * len) + cfg.lfe_dim); // lfe head
    }
    total += static_cast<size_t>(cfg.depth * cfg.lfe_dim + 1); // final head
    return total;
}

std::vector<ad::tensor_ptr> mos_model::parameters() const {
    std::vector<ad::tensor_ptr> out;
    for (const auto & blk : blocks) {
        for (const auto * unit : { &blk.first, &blk.second }) {
            out.push_back(unit->w);
            out.push_back(unit->b);
            out.push_back(unit->gamma);
            out.push_back(unit->beta);
        }
    }
    for (const auto & l : lfe) {
        out.push_back(l.w);
        out.push_back(l.b);
    }
    out.push_back(head.w);
    out.push_back(head.b);
    return out;
}

namespace {

ad::tensor_ptr init_weight(std::vector<int64_t> shape, int64_t fan_in, rng & r) {
    auto t = ad::tensor::zeros(std::move(shape), true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto & v : t->data) {
        v = r.uniform(-bound, bound);
    }
    return t;
}

conv_bn_unit make_unit(int64_t c_in, int64_t c_out, rng & r) {
    conv_bn_unit u;
    u.w = init_weight({ c_out, c_in, 3 }, c_in * 3, r);
    u.b = ad::tensor::zeros({ c_out }, true);
    u.gamma = ad::tensor::zeros({ c_out }, true);
    std::fill(u.gamma->data.begin(), u.gamma->data.end(), 1.0);
    u.beta = ad::tensor::zeros({ c_out }, true);
    u.bn = ad::bn_state(c_out);
    return u;
}

} // namespace

mos_model build_model(const model_config & cfg, uint64_t seed, feature_kind kind) {
    validate_config(cfg);
    rng r(mix_seed(seed, 0x6d6f64656cull)); // distinct stream per purpose

    mos_model m;
    m.cfg = cfg;
    m.kind = kind;
    m.feat_mean.assign(static_cast<size_t>(cfg.input_dim), 0.0);
    m.feat_std.assign(static_cast<size_t>(cfg.input_dim), 1.0);

    const int64_t ch = cfg.channels;
    for (int stage = 0; stage < cfg.depth; ++stage) {
        double_conv_block blk;
        blk.first = make_unit(stage == 0 ? 1 : ch, ch, r);
        blk.second = make_unit(ch, ch, r);
        m.blocks.push_back(std::move(blk));
    }
    for (int stage = 0; stage < cfg.depth; ++stage) {
        const int64_t in = ch * m.stage_length(stage);
        linear_layer l;
        l.w = init_weight({ cfg.lfe_dim, in }, in, r);
        l.b = ad::tensor::zeros({ cfg.lfe_dim }, true);
        m.lfe.push_back(std::move(l));
    }
    const int64_t head_in = static_cast<int64_t>(cfg.depth) * cfg.lfe_dim;
    m.head.w = init_weight({ 1, head_in }, head_in, r);
    m.head.b = ad::tensor::zeros({ 1 }, true);
    return m;
}

ad::tensor_ptr forward_batch(mos_model & m, const std::vector<std::vector<double>> & rows,
                             bool training, ad::tape & t) {
    check(!rows.empty(), errc::invalid_argument, "forward: empty batch");
    const int64_t batch = static_cast<int64_t>(rows.size());
    const int64_t dim = m.cfg.input_dim;
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(batch * dim));
    for (const auto & row : rows) {
        if (static_cast<int64_t>(row.size()) != dim) {
            fail(errc::shape_mismatch, "forward: row length " + std::to_string(row.size()) +
                                           " != input_dim " + std::to_string(dim));
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    auto x = ad::tensor::from({ batch, 1, dim }, std::move(flat));

    std::vector<ad::tensor_ptr> latents;
    for (int stage = 0; stage < m.cfg.depth; ++stage) {
        auto & blk = m.blocks[stage];
        auto y = t.conv1d_k3(x, blk.first.w, blk.first.b);
        y = t.batchnorm1d(y, blk.first.gamma, blk.first.beta, blk.first.bn, training);
        y = t.relu(y);
        y = t.conv1d_k3(y, blk.second.w, blk.second.b);
        y = t.batchnorm1d(y, blk.second.gamma, blk.second.beta, blk.second.bn, training);
        y = t.relu(y);

        latents.push_back(t.linear(t.flatten(y), m.lfe[stage].w, m.lfe[stage].b));

        if (stage + 1 < m.cfg.depth) {
            x = m.cfg.pool == pool_kind::max ? t.maxpool1d_k2s2(y) : t.avgpool1d_k2s2(y);
        }
    }

    auto stacked = t.concat_cols(latents);
    return t.linear(stacked, m.head.w, m.head.b);
}

std::vector<double> prepare_input(const mos_model & m, std::span<const double> raw_features) {
    const auto dim = static_cast<size_t>(m.cfg.input_dim);
    if (raw_features.size() > dim) {
        fail(errc::shape_mismatch, "feature vector has " + std::to_string(raw_features.size()) +
                                       " dims, model expects at most " + std::to_string(dim));
    }
    std::vector<double> row(dim, 0.0);
    std::copy(raw_features.begin(), raw_features.end(), row.begin());
    for (size_t i = 0; i < dim; ++i) {
        row[i] = (row[i] - m.feat_mean[i]) / m.feat_std[i];
    }
    return row;
}

std::vector<double> predict_batch(const mos_model & m,
                                  const std::vector<std::vector<double>> & raw_rows,
                                  bool apply_clamp) {
    std::vector<std::vector<double>> rows;
    rows.reserve(raw_rows.size());
    for (const auto & raw : raw_rows) {
        rows.push_back(prepare_input(m, raw));
    }
    // eval mode never touches running stats, so the cast stays read-only
    auto & mutable_m = const_cast<mos_model &>(m);
    ad::tape t;
    auto pred = forward_batch(mutable_m, rows, false, t);
    std::vector<double> out(pred->data.begin(), pred->data.end());
    if (apply_clamp) {
        for (auto & v : out) {
            v = std::clamp(v, 1.0, 5.0);
        }
    }
    return out;
}

std::vector<double> predict_batch(const mos_model & m,
                                  const std::vector<std::vector<double>> & raw_rows) {
    return predict_batch(m, raw_rows, m.cfg.clamp_output);
}

double predict(const mos_model & m, std::span<const double> raw_features) {
    return predict_batch(m, { std::vector<double>(raw_features.begin(), raw_features.end()) })[0];
}

static constexpr char slc1_magic[4] = { 'S', 'L', 'C', '1' };
static constexpr uint16_t checkpoint_version = 1;

std::vector<uint8_t> serialize_checkpoint(const mos_model & m) {
    validate_config(m.cfg);
    std::vector<uint8_t> out;
    for (char c : slc1_magic) {
        put_u8(out, static_cast<uint8_t>(c));
    }
    put_u16(out, checkpoint_version);
    put_u8(out, static_cast<uint8_t>(m.cfg.depth));
    put_u32(out, static_cast<uint32_t>(m.cfg.input_dim));
    put_u8(out, static_cast<uint8_t>(m.cfg.channels));
    put_u8(out, static_cast<uint8_t>(m.cfg.lfe_dim));
    put_u8(out, static_cast<uint8_t>(m.cfg.pool));
    put_u8(out, static_cast<uint8_t>(m.kind));
    for (double v : m.feat_mean) {
        put_f32(out, static_cast<float>(v));
    }
    for (double v : m.feat_std) {
        put_f32(out, static_cast<float>(v));
    }
    for (const auto & p : m.parameters()) {
        for (double v : p->data) {
            put_f32(out, static_cast<float>(v));
        }
    }
    for (const auto & blk : m.blocks) {
        for (const auto * unit : { &blk.first, &blk.second }) {
            for (double v : unit->bn.running_mean) {
                put_f32(out, static_cast<float>(v));
            }
            for (double v : unit->bn.running_var) {
                put_f32(out, static_cast<float>(v));
            }
        }
    }
    return out;
}

mos_model parse_checkpoint(std::span<const uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), slc1_magic, 4) != 0) {
        fail(errc::bad_magic, "checkpoint: bad magic (want SLC1)");
    }
    byte_reader r(bytes, errc::io_failure, "checkpoint");
    r.skip(4);
    const uint16_t version = r.u16();
    if (version != checkpoint_version) {
        fail(errc::version_unsupported, "checkpoint: format version " + std::to_string(version));
    }

    model_config cfg;
    cfg.depth = r.u8();
    cfg.input_dim = r.u32();
    cfg.channels = r.u8();
    cfg.lfe_dim = r.u8();
    const uint8_t pool_byte = r.u8();
    const uint8_t kind_byte = r.u8();
    if (pool_byte > static_cast<uint8_t>(pool_kind::avg)) {
        fail(errc::config_mismatch, "checkpoint: unknown pool kind " + std::to_string(pool_byte));
    }
    if (kind_byte > static_cast<uint8_t>(feature_kind::raw)) {
        fail(errc::config_mismatch, "checkpoint: unknown feature kind " + std::to_string(kind_byte));
    }
    cfg.pool = static_cast<pool_kind>(pool_byte);
    try {
        validate_config(cfg);
    } catch (const error & e) {
        fail(errc::config_mismatch, std::string("checkpoint: ") + e.what());
    }

    mos_model m = build_model(cfg, 0, static_cast<feature_kind>(kind_byte));

    for (auto & v : m.feat_mean) {
        v = r.f32();
    }
    for (auto & v : m.feat_std) {
        v = r.f32();
    }
    for (const auto & p : m.parameters()) {
        for (auto & v : p->data) {
            v = r.f32();
        }
    }
    for (auto & blk : m.blocks) {
        for (auto * unit : { &blk.first, &blk.second }) {
            for (auto & v : unit->bn.running_mean) {
                v = r.f32();
            }
            for (auto & v : unit->bn.running_var) {
                v = r.f32();
            }
        }
    }
    if (r.remaining() != 0) {
        fail(errc::config_mismatch,
             "checkpoint: " + std::to_string(r.remaining()) + " trailing bytes after parameters");
    }
    return m;
}

void save_checkpoint(const mos_model & m, const std::string & path) {
    write_file_bytes(path, serialize_checkpoint(m));
}

mos_model load_checkpoint(const std::string & path) {
    return parse_checkpoint(read_file_bytes(path));
}

} // namespace salf
