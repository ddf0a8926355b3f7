#include "checkpoint.hpp"

#include <zlib.h>

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

namespace mg {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'M', 'G', 'A', 'N'};

std::string fmt_f32(float v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32_array(std::string& out, const std::vector<float>& data) {
    // Host is little-endian on every supported target; bytes go out raw.
    const size_t at = out.size();
    out.resize(at + data.size() * sizeof(float));
    std::memcpy(out.data() + at, data.data(), data.size() * sizeof(float));
}

void put_tensor_record(std::string& out, const std::string& name, const Shape& shape,
                       const std::vector<float>& data) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<uint32_t>(shape.size()));
    for (int d : shape) put_u32(out, static_cast<uint32_t>(d));
    put_f32_array(out, data);
}

std::string metadata_text(const Checkpoint& ck) {
    const TrainConfig& c = ck.config;
    std::string md;
    auto line = [&md](const std::string& k, const std::string& v) { md += k + "=" + v + "\n"; };
    line("format", "maskgan-checkpoint");
    line("task", task_name(c.task));
    line("epochs", std::to_string(c.epochs));
    line("batch_size", std::to_string(c.batch_size));
    line("learning_rate", fmt_f32(c.learning_rate));
    line("adam_beta1", fmt_f32(c.adam_beta1));
    line("adam_beta2", fmt_f32(c.adam_beta2));
    line("adam_eps", fmt_f32(c.adam_eps));
    line("lambda_l1", fmt_f32(c.lambda_l1));
    line("lambda_cycle", fmt_f32(c.lambda_cycle));
    line("seed", std::to_string(c.seed));
    line("image_size", std::to_string(c.image_size));
    line("image_channels", std::to_string(c.image_channels));
    line("mask_channels", std::to_string(c.mask_channels));
    line("gen_base", std::to_string(c.gen_base));
    line("gen_depth", std::to_string(c.gen_depth));
    line("disc_base", std::to_string(c.disc_base));
    line("disc_layers", std::to_string(c.disc_layers));
    line("checkpoint_every", std::to_string(c.checkpoint_every));
    line("n_train", std::to_string(c.n_train));
    line("n_test", std::to_string(c.n_test));
    for (const auto& [name, state] : ck.optim) line("opt_t." + name, std::to_string(state.t));
    for (const auto& r : ck.history) {
        std::string row = std::to_string(r.epoch) + "," + fmt_f64(r.g_loss) + "," + fmt_f64(r.d_loss) +
                          "," + fmt_f64(r.g_adv) + ",";
        if (r.has_l1) row += fmt_f64(r.g_l1);
        row += ",";
        if (r.has_cycle) row += fmt_f64(r.g_cycle);
        line("hist", row);
    }
    return md;
}

struct Cursor {
    const uint8_t* p;
    size_t size;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > size) fail(ErrorCode::corrupt_file, "checkpoint truncated mid-record");
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
    std::vector<float> f32_array(size_t n) {
        need(n * sizeof(float));
        std::vector<float> v(n);
        std::memcpy(v.data(), p + pos, n * sizeof(float));
        pos += n * sizeof(float);
        return v;
    }
};

struct RawTensor {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

long long parse_ll(const std::string& s, const std::string& key) {
    try {
        size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::corrupt_file, "bad integer for " + key + ": '" + s + "'");
    }
}

uint64_t parse_u64(const std::string& s, const std::string& key) {
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::corrupt_file, "bad integer for " + key + ": '" + s + "'");
    }
}

float parse_f32(const std::string& s, const std::string& key) {
    char* end = nullptr;
    const float v = std::strtof(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        fail(ErrorCode::corrupt_file, "bad float for " + key + ": '" + s + "'");
    return v;
}

double parse_f64(const std::string& s, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        fail(ErrorCode::corrupt_file, "bad float for " + key + ": '" + s + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> model_order(Task task) {
    if (task == Task::cgan) return {"gen", "disc"};
    return {"genAB", "genBA", "discA", "discB"};
}

ModelParams build_skeleton(const TrainConfig& cfg, const std::string& name) {
    Rng throwaway(0);
    if (name == "gen" || name == "genAB") return build_unet(cfg.generator_a2b(), throwaway).params;
    if (name == "genBA") return build_unet(cfg.generator_b2a(), throwaway).params;
    if (name == "disc") return build_discriminator(cfg.discriminator_cond(), throwaway).params;
    if (name == "discA") return build_discriminator(cfg.discriminator_a(), throwaway).params;
    if (name == "discB") return build_discriminator(cfg.discriminator_b(), throwaway).params;
    fail(ErrorCode::corrupt_file, "unknown model name '" + name + "'");
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const fs::path& path) {
    if (ck.models.size() != ck.optim.size())
        fail(ErrorCode::invalid_argument, "checkpoint models and optimizer states out of step");

    std::string body;
    body.append(kMagic, sizeof(kMagic));
    put_u16(body, kCheckpointVersion);
    const std::string md = metadata_text(ck);
    put_u32(body, static_cast<uint32_t>(md.size()));
    body.append(md);

    for (const auto& [mname, params] : ck.models)
        for (const auto& [pname, tensor] : params.entries)
            put_tensor_record(body, "model/" + mname + "/" + pname, tensor.shape(), tensor.values());
    for (size_t mi = 0; mi < ck.optim.size(); ++mi) {
        const auto& [mname, state] = ck.optim[mi];
        const auto& params = ck.models[mi].second;
        if (state.m.size() != params.entries.size() || state.v.size() != params.entries.size())
            fail(ErrorCode::invalid_argument, "optimizer state for " + mname + " out of step");
        for (size_t i = 0; i < params.entries.size(); ++i)
            put_tensor_record(body, "opt/" + mname + "/m/" + params.entries[i].first,
                              {static_cast<int>(state.m[i].size())}, state.m[i]);
        for (size_t i = 0; i < params.entries.size(); ++i)
            put_tensor_record(body, "opt/" + mname + "/v/" + params.entries[i].first,
                              {static_cast<int>(state.v[i].size())}, state.v[i]);
    }

    uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    put_u32(body, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot open checkpoint for writing: " + path.string());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) fail(ErrorCode::io, "short write: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 2 + 4 + 4)
        fail(ErrorCode::corrupt_file, "checkpoint too small: " + path.string());

    const auto* raw = reinterpret_cast<const uint8_t*>(bytes.data());
    const size_t body_len = bytes.size() - 4;
    uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i) stored_crc |= static_cast<uint32_t>(raw[body_len + i]) << (8 * i);
    const uint32_t actual_crc =
        static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(body_len)));
    if (stored_crc != actual_crc)
        fail(ErrorCode::corrupt_file, "checksum mismatch in " + path.string());

    Cursor cur{raw, body_len};
    if (cur.bytes(4) != std::string(kMagic, sizeof(kMagic)))
        fail(ErrorCode::corrupt_file, "bad magic in " + path.string());
    const uint16_t version = cur.u16();
    if (version != kCheckpointVersion)
        fail(ErrorCode::version_mismatch, "checkpoint version " + std::to_string(version) +
                                              " unsupported (expected " +
                                              std::to_string(kCheckpointVersion) + ")");

    const uint32_t md_len = cur.u32();
    const std::string md = cur.bytes(md_len);

    std::map<std::string, std::string> kv;
    std::vector<std::string> hist_rows;
    size_t line_start = 0;
    while (line_start < md.size()) {
        size_t nl = md.find('\n', line_start);
        if (nl == std::string::npos) nl = md.size();
        const std::string linetext = md.substr(line_start, nl - line_start);
        line_start = nl + 1;
        if (linetext.empty()) continue;
        const size_t eq = linetext.find('=');
        if (eq == std::string::npos) fail(ErrorCode::corrupt_file, "malformed metadata line: " + linetext);
        const std::string key = linetext.substr(0, eq);
        const std::string value = linetext.substr(eq + 1);
        if (key == "hist")
            hist_rows.push_back(value);
        else
            kv[key] = value;
    }
    auto require = [&kv](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) fail(ErrorCode::corrupt_file, "metadata key missing: " + key);
        return it->second;
    };

    Checkpoint ck;
    TrainConfig& c = ck.config;
    if (require("format") != "maskgan-checkpoint")
        fail(ErrorCode::corrupt_file, "unrecognized format tag");
    const auto task = task_from_name(require("task"));
    if (!task) fail(ErrorCode::corrupt_file, "unknown task '" + kv["task"] + "'");
    c.task = *task;
    c.epochs = static_cast<int>(parse_ll(require("epochs"), "epochs"));
    c.batch_size = static_cast<int>(parse_ll(require("batch_size"), "batch_size"));
    c.learning_rate = parse_f32(require("learning_rate"), "learning_rate");
    c.adam_beta1 = parse_f32(require("adam_beta1"), "adam_beta1");
    c.adam_beta2 = parse_f32(require("adam_beta2"), "adam_beta2");
    c.adam_eps = parse_f32(require("adam_eps"), "adam_eps");
    c.lambda_l1 = parse_f32(require("lambda_l1"), "lambda_l1");
    c.lambda_cycle = parse_f32(require("lambda_cycle"), "lambda_cycle");
    c.seed = parse_u64(require("seed"), "seed");
    c.image_size = static_cast<int>(parse_ll(require("image_size"), "image_size"));
    c.image_channels = static_cast<int>(parse_ll(require("image_channels"), "image_channels"));
    c.mask_channels = static_cast<int>(parse_ll(require("mask_channels"), "mask_channels"));
    c.gen_base = static_cast<int>(parse_ll(require("gen_base"), "gen_base"));
    c.gen_depth = static_cast<int>(parse_ll(require("gen_depth"), "gen_depth"));
    c.disc_base = static_cast<int>(parse_ll(require("disc_base"), "disc_base"));
    c.disc_layers = static_cast<int>(parse_ll(require("disc_layers"), "disc_layers"));
    c.checkpoint_every = static_cast<int>(parse_ll(require("checkpoint_every"), "checkpoint_every"));
    c.n_train = static_cast<int>(parse_ll(require("n_train"), "n_train"));
    c.n_test = static_cast<int>(parse_ll(require("n_test"), "n_test"));

    for (const auto& row : hist_rows) {
        const auto fields = split_csv(row);
        if (fields.size() != 6) fail(ErrorCode::corrupt_file, "malformed history row: " + row);
        EpochRecord r;
        r.epoch = static_cast<int>(parse_ll(fields[0], "hist.epoch"));
        r.g_loss = parse_f64(fields[1], "hist.g_loss");
        r.d_loss = parse_f64(fields[2], "hist.d_loss");
        r.g_adv = parse_f64(fields[3], "hist.g_adv");
        r.has_l1 = !fields[4].empty();
        if (r.has_l1) r.g_l1 = parse_f64(fields[4], "hist.g_l1");
        r.has_cycle = !fields[5].empty();
        if (r.has_cycle) r.g_cycle = parse_f64(fields[5], "hist.g_cycle");
        ck.history.push_back(r);
    }

    // Tensor records, in canonical order, until the CRC trailer.
    std::vector<RawTensor> tensors;
    while (cur.pos < body_len) {
        RawTensor rt;
        const uint32_t name_len = cur.u32();
        rt.name = cur.bytes(name_len);
        const uint32_t rank = cur.u32();
        if (rank == 0 || rank > 8) fail(ErrorCode::corrupt_file, "implausible tensor rank in " + rt.name);
        size_t numel = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            const uint32_t d = cur.u32();
            if (d == 0) fail(ErrorCode::corrupt_file, "zero dim in tensor " + rt.name);
            rt.shape.push_back(static_cast<int>(d));
            numel *= d;
        }
        rt.data = cur.f32_array(numel);
        tensors.push_back(std::move(rt));
    }

    size_t next = 0;
    auto take = [&](const std::string& expected_name) -> RawTensor& {
        if (next >= tensors.size())
            fail(ErrorCode::corrupt_file, "missing tensor record " + expected_name);
        RawTensor& rt = tensors[next++];
        if (rt.name != expected_name)
            fail(ErrorCode::corrupt_file,
                 "tensor order mismatch: expected " + expected_name + ", found " + rt.name);
        return rt;
    };

    for (const auto& mname : model_order(c.task)) {
        ModelParams params = build_skeleton(c, mname);
        for (auto& [pname, tensor] : params.entries) {
            RawTensor& rt = take("model/" + mname + "/" + pname);
            if (rt.shape != tensor.shape())
                fail(ErrorCode::corrupt_file, "shape mismatch for " + rt.name + ": stored " +
                                                  shape_str(rt.shape) + ", expected " +
                                                  shape_str(tensor.shape()));
            std::copy(rt.data.begin(), rt.data.end(), tensor.mutable_data());
        }
        ck.models.emplace_back(mname, std::move(params));
    }
    for (const auto& mname : model_order(c.task)) {
        const ModelParams& params = ck.model(mname);
        AdamState state;
        state.t = parse_ll(require("opt_t." + mname), "opt_t." + mname);
        for (const char* kind : {"m", "v"}) {
            auto& dst = (*kind == 'm') ? state.m : state.v;
            for (const auto& [pname, tensor] : params.entries) {
                RawTensor& rt = take("opt/" + mname + "/" + std::string(kind) + "/" + pname);
                if (rt.data.size() != tensor.numel())
                    fail(ErrorCode::corrupt_file, "optimizer state size mismatch for " + rt.name);
                dst.push_back(std::move(rt.data));
            }
        }
        ck.optim.emplace_back(mname, std::move(state));
    }
    if (next != tensors.size())
        fail(ErrorCode::corrupt_file, "unexpected trailing tensor records");

    return ck;
}

}  // namespace mg
