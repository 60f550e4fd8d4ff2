#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nck/alternation.hpp"
#include "nck/classifier.hpp"
#include "nck/cleaner.hpp"
#include "nck/matrix.hpp"
#include "nck/metrics.hpp"
#include "nck/synthdata.hpp"
#include "nck/video.hpp"

namespace nck {

using ordered_json = nlohmann::ordered_json;

inline constexpr std::uint32_t kFeatureFileVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

// ---------------------------------------------------------------------------
// Little-endian byte plumbing. Readers fail loudly with the byte offset and
// the expected-vs-available length so truncated files are diagnosable.

class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void str(const std::string& s) {
        u32(std::uint32_t(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    const std::vector<std::uint8_t>& data() const { return buf_; }

  private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_++]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t len = u32();
        need(len);
        std::string s(data_.begin() + long(pos_), data_.begin() + long(pos_ + len));
        pos_ += len;
        return s;
    }

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == data_.size(); }

    void fail(const std::string& what) const {
        throw std::runtime_error("parse error at byte " + std::to_string(pos_) + ": " + what);
    }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size())
            fail("expected " + std::to_string(n) + " more bytes, " +
                 std::to_string(data_.size() - pos_) + " available");
    }

    std::vector<std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

inline void write_binary_file(const std::filesystem::path& path,
                              std::span<const std::uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Feature files: one video per file. Layout: magic "GCNF", version u32,
// id (u32 length + bytes), Y u8, N u32, d u32, N*d row-major f32 LE, then an
// optional ground-truth block (marker 0x01 + N bytes of {0,1}).

inline void save_feature_file(const std::filesystem::path& path, const VideoBag& bag,
                              bool include_ground_truth = true) {
    ByteWriter w;
    w.u8('G');
    w.u8('C');
    w.u8('N');
    w.u8('F');
    w.u32(kFeatureFileVersion);
    w.str(bag.id);
    w.u8(std::uint8_t(bag.label));
    w.u32(std::uint32_t(bag.features.n_snippets()));
    w.u32(std::uint32_t(bag.features.dim()));
    for (double v : bag.features.matrix().values()) w.f32(float(v));
    if (include_ground_truth && bag.has_ground_truth()) {
        w.u8(0x01);
        for (int g : bag.ground_truth) w.u8(std::uint8_t(g));
    }
    write_binary_file(path, w.data());
}

inline VideoBag load_feature_file(const std::filesystem::path& path) {
    ByteReader r(read_binary_file(path));
    char magic[4];
    for (char& c : magic) c = char(r.u8());
    if (std::string(magic, 4) != "GCNF")
        throw std::runtime_error("parse error at byte 0: bad magic in " + path.string() +
                                 " (expected \"GCNF\")");
    const std::uint32_t version = r.u32();
    if (version != kFeatureFileVersion)
        throw std::runtime_error("parse error at byte 4: unsupported feature-file version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kFeatureFileVersion) + ")");
    const std::string id = r.str();
    const std::uint8_t label = r.u8();
    if (label > 1) r.fail("label byte must be 0 or 1");
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    if (n == 0 || d == 0) r.fail("snippet count and feature dimension must be >= 1");

    Matrix features(n, d);
    {
        auto values = features.values();
        for (auto& v : values) v = double(r.f32());
    }

    std::vector<int> ground_truth;
    if (!r.at_end()) {
        const std::uint8_t marker = r.u8();
        if (marker != 0x01) r.fail("bad ground-truth marker");
        ground_truth.resize(n);
        for (auto& g : ground_truth) {
            const std::uint8_t b = r.u8();
            if (b > 1) r.fail("ground-truth byte must be 0 or 1");
            g = int(b);
        }
        if (!r.at_end()) r.fail("trailing bytes after ground-truth block");
    }
    return VideoBag(id, int(label), FeatureMatrix(std::move(features)), std::move(ground_truth));
}

// Loads every *.gcnf file under dir, ordered by filename.
inline Dataset load_feature_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw std::runtime_error("feature directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".gcnf") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no .gcnf files under " + dir.string());
    Dataset data;
    data.reserve(files.size());
    for (const auto& f : files) data.push_back(load_feature_file(f));
    return data;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "GCNC", version u32, config JSON (u32 length + bytes),
// then tensors until end of file, each as name (u32 length + bytes),
// rank u32, one u32 per dimension, row-major f64 LE payload.

struct TensorRecord {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> values;
};

struct Checkpoint {
    std::string config_json;
    std::vector<TensorRecord> tensors;
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    ByteWriter w;
    w.u8('G');
    w.u8('C');
    w.u8('N');
    w.u8('C');
    w.u32(kCheckpointVersion);
    w.str(ck.config_json);
    for (const auto& t : ck.tensors) {
        std::size_t count = 1;
        for (std::size_t dim : t.dims) count *= dim;
        if (count != t.values.size())
            throw std::invalid_argument("save_checkpoint: dims/payload mismatch for " + t.name);
        w.str(t.name);
        w.u32(std::uint32_t(t.dims.size()));
        for (std::size_t dim : t.dims) w.u32(std::uint32_t(dim));
        for (double v : t.values) w.f64(v);
    }
    write_binary_file(path, w.data());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    ByteReader r(read_binary_file(path));
    char magic[4];
    for (char& c : magic) c = char(r.u8());
    if (std::string(magic, 4) != "GCNC")
        throw std::runtime_error("parse error at byte 0: bad magic in " + path.string() +
                                 " (expected \"GCNC\")");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("parse error at byte 4: unsupported checkpoint version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
    Checkpoint ck;
    ck.config_json = r.str();
    while (!r.at_end()) {
        TensorRecord t;
        t.name = r.str();
        const std::uint32_t rank = r.u32();
        if (rank > 8) r.fail("tensor rank too large");
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint32_t dim = r.u32();
            t.dims.push_back(dim);
            count *= dim;
            if (count > 100'000'000) r.fail("tensor too large");
        }
        t.values.resize(count);
        for (auto& v : t.values) v = r.f64();
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

// ---------------------------------------------------------------------------
// JSON adapters for all configs. Readers start from defaults and override
// present keys, so partial configs stay valid.

namespace detail {

template <class T>
void get_if_present(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::string activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}
inline Activation activation_from(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation: " + s);
}
inline std::string branches_name(BranchSet b) {
    switch (b) {
        case BranchSet::feature_only: return "feature";
        case BranchSet::temporal_only: return "temporal";
        case BranchSet::both: break;
    }
    return "both";
}
inline BranchSet branches_from(const std::string& s) {
    if (s == "both") return BranchSet::both;
    if (s == "feature") return BranchSet::feature_only;
    if (s == "temporal") return BranchSet::temporal_only;
    throw std::invalid_argument("unknown branch set: " + s);
}
inline std::string optimizer_name(OptimizerKind o) {
    return o == OptimizerKind::adam ? "adam" : "sgd";
}
inline OptimizerKind optimizer_from(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw std::invalid_argument("unknown optimizer: " + s);
}

}  // namespace detail

inline ordered_json to_json(const SyntheticConfig& c) {
    return ordered_json{{"n_videos", c.n_videos},
                        {"anomaly_video_fraction", c.anomaly_video_fraction},
                        {"min_snippets", c.min_snippets},
                        {"max_snippets", c.max_snippets},
                        {"anomaly_segment_fraction", c.anomaly_segment_fraction},
                        {"feature_dim", c.feature_dim},
                        {"class_separation", c.class_separation},
                        {"feature_noise_sigma", c.feature_noise_sigma},
                        {"id_prefix", c.id_prefix},
                        {"seed", c.seed},
                        {"direction_seed", c.direction_seed}};
}

inline SyntheticConfig synthetic_from_json(const ordered_json& j, SyntheticConfig c = {}) {
    detail::get_if_present(j, "n_videos", c.n_videos);
    detail::get_if_present(j, "anomaly_video_fraction", c.anomaly_video_fraction);
    detail::get_if_present(j, "min_snippets", c.min_snippets);
    detail::get_if_present(j, "max_snippets", c.max_snippets);
    detail::get_if_present(j, "anomaly_segment_fraction", c.anomaly_segment_fraction);
    detail::get_if_present(j, "feature_dim", c.feature_dim);
    detail::get_if_present(j, "class_separation", c.class_separation);
    detail::get_if_present(j, "feature_noise_sigma", c.feature_noise_sigma);
    detail::get_if_present(j, "id_prefix", c.id_prefix);
    detail::get_if_present(j, "seed", c.seed);
    detail::get_if_present(j, "direction_seed", c.direction_seed);
    return c;
}

inline ordered_json to_json(const CleanerConfig& c) {
    return ordered_json{{"raw_dim", c.raw_dim},
                        {"comp_hidden", c.comp_hidden},
                        {"comp_out", c.comp_out},
                        {"gcn_hidden", c.gcn_hidden},
                        {"gcn_layers", c.gcn_layers},
                        {"activation", detail::activation_name(c.activation)},
                        {"branches", detail::branches_name(c.branches)},
                        {"optimizer", detail::optimizer_name(c.optimizer)},
                        {"seed", c.seed}};
}

inline CleanerConfig cleaner_config_from_json(const ordered_json& j, CleanerConfig c = {}) {
    detail::get_if_present(j, "raw_dim", c.raw_dim);
    detail::get_if_present(j, "comp_hidden", c.comp_hidden);
    detail::get_if_present(j, "comp_out", c.comp_out);
    detail::get_if_present(j, "gcn_hidden", c.gcn_hidden);
    detail::get_if_present(j, "gcn_layers", c.gcn_layers);
    if (j.contains("activation"))
        c.activation = detail::activation_from(j.at("activation").get<std::string>());
    if (j.contains("branches"))
        c.branches = detail::branches_from(j.at("branches").get<std::string>());
    if (j.contains("optimizer"))
        c.optimizer = detail::optimizer_from(j.at("optimizer").get<std::string>());
    detail::get_if_present(j, "seed", c.seed);
    return c;
}

inline ordered_json to_json(const BuiltinClassifierConfig& c) {
    return ordered_json{{"hidden_width", c.hidden_width},
                        {"epochs", c.epochs},
                        {"lr", c.lr},
                        {"jitter_sigma", c.jitter_sigma},
                        {"seed", c.seed}};
}

inline BuiltinClassifierConfig classifier_config_from_json(const ordered_json& j,
                                                           BuiltinClassifierConfig c = {}) {
    detail::get_if_present(j, "hidden_width", c.hidden_width);
    detail::get_if_present(j, "epochs", c.epochs);
    detail::get_if_present(j, "lr", c.lr);
    detail::get_if_present(j, "jitter_sigma", c.jitter_sigma);
    detail::get_if_present(j, "seed", c.seed);
    return c;
}

inline ordered_json to_json(const AblationSpec& a) {
    return ordered_json{{"branches", detail::branches_name(a.branches)},
                        {"constant_graph", a.constant_graph},
                        {"constant_value", a.constant_value}};
}

inline AblationSpec ablation_from_json(const ordered_json& j, AblationSpec a = {}) {
    if (j.contains("branches"))
        a.branches = detail::branches_from(j.at("branches").get<std::string>());
    detail::get_if_present(j, "constant_graph", a.constant_graph);
    detail::get_if_present(j, "constant_value", a.constant_value);
    return a;
}

inline ordered_json to_json(const AlternationConfig& c) {
    return ordered_json{{"n_steps", c.n_steps},
                        {"cleaner_epochs", c.cleaner_epochs},
                        {"cleaner_lr", c.cleaner_lr},
                        {"confidence_fraction", c.confidence_fraction},
                        {"ema_alpha", c.ema_alpha},
                        {"n_prediction_samples", c.n_prediction_samples},
                        {"prediction_jitter", c.prediction_jitter},
                        {"cleaner", to_json(c.cleaner)},
                        {"classifier", to_json(c.classifier)},
                        {"ablation", to_json(c.ablation)},
                        {"symmetrize_similarity", c.symmetrize_similarity},
                        {"hard_targets", c.hard_targets},
                        {"shared_cleaner", c.shared_cleaner},
                        {"warm_start_cleaner", c.warm_start_cleaner},
                        {"seed", c.seed}};
}

inline AlternationConfig alternation_from_json(const ordered_json& j, AlternationConfig c = {}) {
    detail::get_if_present(j, "n_steps", c.n_steps);
    detail::get_if_present(j, "cleaner_epochs", c.cleaner_epochs);
    detail::get_if_present(j, "cleaner_lr", c.cleaner_lr);
    detail::get_if_present(j, "confidence_fraction", c.confidence_fraction);
    detail::get_if_present(j, "ema_alpha", c.ema_alpha);
    detail::get_if_present(j, "n_prediction_samples", c.n_prediction_samples);
    detail::get_if_present(j, "prediction_jitter", c.prediction_jitter);
    if (j.contains("cleaner")) c.cleaner = cleaner_config_from_json(j.at("cleaner"), c.cleaner);
    if (j.contains("classifier"))
        c.classifier = classifier_config_from_json(j.at("classifier"), c.classifier);
    if (j.contains("ablation")) c.ablation = ablation_from_json(j.at("ablation"), c.ablation);
    detail::get_if_present(j, "symmetrize_similarity", c.symmetrize_similarity);
    detail::get_if_present(j, "hard_targets", c.hard_targets);
    detail::get_if_present(j, "shared_cleaner", c.shared_cleaner);
    detail::get_if_present(j, "warm_start_cleaner", c.warm_start_cleaner);
    detail::get_if_present(j, "seed", c.seed);
    return c;
}

// ---------------------------------------------------------------------------
// Model checkpoint adapters.

namespace detail {

inline std::vector<std::vector<std::size_t>> cleaner_tensor_dims(const CleanerConfig& cfg) {
    std::vector<std::vector<std::size_t>> dims = {{cfg.raw_dim, cfg.comp_hidden},
                                                  {cfg.comp_hidden},
                                                  {cfg.comp_hidden, cfg.comp_out},
                                                  {cfg.comp_out}};
    const auto stack_dims = [&cfg, &dims]() {
        for (std::size_t l = 0; l < cfg.gcn_layers; ++l)
            dims.push_back({cfg.gcn_in_width(l), cfg.gcn_out_width(l)});
    };
    if (cfg.has_feature_branch()) stack_dims();
    if (cfg.has_temporal_branch()) stack_dims();
    return dims;
}

inline std::vector<TensorRecord> pack_tensors(const std::vector<std::string>& names,
                                              const std::vector<std::vector<std::size_t>>& dims,
                                              const std::vector<std::span<const double>>& views) {
    std::vector<TensorRecord> tensors;
    tensors.reserve(names.size());
    for (std::size_t t = 0; t < names.size(); ++t)
        tensors.push_back(TensorRecord{names[t],
                                       dims[t],
                                       std::vector<double>(views[t].begin(), views[t].end())});
    return tensors;
}

// Copies checkpoint tensors into live views, verifying names and shapes.
inline void unpack_tensors(const Checkpoint& ck, const std::vector<std::string>& names,
                           const std::vector<std::vector<std::size_t>>& dims,
                           const std::vector<std::span<double>>& views) {
    if (ck.tensors.size() != names.size())
        throw std::runtime_error("checkpoint holds " + std::to_string(ck.tensors.size()) +
                                 " tensors, expected " + std::to_string(names.size()));
    for (std::size_t t = 0; t < names.size(); ++t) {
        const TensorRecord& rec = ck.tensors[t];
        if (rec.name != names[t])
            throw std::runtime_error("checkpoint tensor " + std::to_string(t) + " is '" +
                                     rec.name + "', expected '" + names[t] + "'");
        if (rec.dims != dims[t] || rec.values.size() != views[t].size())
            throw std::runtime_error("checkpoint tensor '" + rec.name + "' has wrong shape");
        std::copy(rec.values.begin(), rec.values.end(), views[t].begin());
    }
}

}  // namespace detail

inline void save_cleaner_checkpoint(const std::filesystem::path& path,
                                    const CleanerParams& params) {
    Checkpoint ck;
    ck.config_json = to_json(params.config).dump();
    ck.tensors = detail::pack_tensors(detail::tensor_names(params.config),
                                      detail::cleaner_tensor_dims(params.config),
                                      detail::tensor_views(params));
    save_checkpoint(path, ck);
}

// Optimizer state is not serialized; a loaded cleaner starts a fresh run.
inline CleanerParams load_cleaner_checkpoint(const std::filesystem::path& path) {
    const Checkpoint ck = load_checkpoint(path);
    const CleanerConfig cfg = cleaner_config_from_json(ordered_json::parse(ck.config_json));
    CleanerParams params = init_params(cfg);
    detail::unpack_tensors(ck, detail::tensor_names(cfg), detail::cleaner_tensor_dims(cfg),
                           detail::tensor_views(params));
    return params;
}

inline void save_classifier_checkpoint(const std::filesystem::path& path,
                                       const BuiltinSnippetClassifier& clf) {
    ordered_json config = to_json(clf.config());
    config["feature_dim"] = clf.feature_dim();
    Checkpoint ck;
    ck.config_json = config.dump();
    ck.tensors = detail::pack_tensors(clf.tensor_names(), clf.tensor_dims(), clf.tensor_views());
    save_checkpoint(path, ck);
}

inline BuiltinSnippetClassifier load_classifier_checkpoint(const std::filesystem::path& path) {
    const Checkpoint ck = load_checkpoint(path);
    const ordered_json config = ordered_json::parse(ck.config_json);
    if (!config.contains("feature_dim"))
        throw std::runtime_error("classifier checkpoint lacks feature_dim");
    BuiltinSnippetClassifier clf(classifier_config_from_json(config),
                                 config.at("feature_dim").get<std::size_t>());
    detail::unpack_tensors(ck, clf.tensor_names(), clf.tensor_dims(), clf.tensor_views());
    return clf;
}

// ---------------------------------------------------------------------------
// Experiment driver.

struct RunConfig {
    std::string command = "run";  // generate | run | eval | ablate
    std::filesystem::path out_dir = "runs/out";
    std::filesystem::path data_dir;    // optional <dir>/train + <dir>/eval feature files
    std::filesystem::path checkpoint;  // classifier input for `eval`
    std::uint64_t seed = 11;
    SyntheticConfig train_data = benchmark_train_config();
    SyntheticConfig eval_data = benchmark_eval_config();
    AlternationConfig alternation = benchmark_alternation_config(11);

    void validate() const {
        if (command != "generate" && command != "run" && command != "eval" &&
            command != "ablate")
            throw std::invalid_argument("RunConfig: unknown command '" + command + "'");
        if (out_dir.empty()) throw std::invalid_argument("RunConfig: empty output directory");
        if (command == "eval" && checkpoint.empty())
            throw std::invalid_argument("RunConfig: eval needs a checkpoint path");
        if (command == "run" || command == "ablate") alternation.validate();
        if (data_dir.empty()) {
            train_data.validate();
            eval_data.validate();
        }
    }
};

// Re-derives every seed that depends on the run seed.
inline void apply_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.alternation.seed = seed;
    cfg.alternation.classifier.seed = mix_seed(seed, 0xbc15ULL);
}

inline ordered_json to_json(const RunConfig& c) {
    return ordered_json{{"command", c.command},
                        {"out_dir", c.out_dir.generic_string()},
                        {"data_dir", c.data_dir.generic_string()},
                        {"checkpoint", c.checkpoint.generic_string()},
                        {"seed", c.seed},
                        {"train_data", to_json(c.train_data)},
                        {"eval_data", to_json(c.eval_data)},
                        {"alternation", to_json(c.alternation)}};
}

inline RunConfig run_config_from_json(const ordered_json& j, RunConfig c = {}) {
    detail::get_if_present(j, "command", c.command);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("checkpoint")) c.checkpoint = j.at("checkpoint").get<std::string>();
    if (j.contains("seed")) apply_seed(c, j.at("seed").get<std::uint64_t>());
    if (j.contains("train_data")) c.train_data = synthetic_from_json(j.at("train_data"), c.train_data);
    if (j.contains("eval_data")) c.eval_data = synthetic_from_json(j.at("eval_data"), c.eval_data);
    if (j.contains("alternation"))
        c.alternation = alternation_from_json(j.at("alternation"), c.alternation);
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    ordered_json j;
    in >> j;
    return run_config_from_json(j, std::move(base));
}

// `--ablate` compact grammar: "<branch>", "constant:<v>", or
// "<branch>+constant:<v>" with branch in {both, feature, temporal}.
inline AblationSpec parse_ablation_spec(const std::string& spec) {
    AblationSpec out;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const std::size_t plus = spec.find('+', start);
        const std::string token =
            spec.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
        if (token.rfind("constant:", 0) == 0) {
            out.constant_graph = true;
            try {
                out.constant_value = std::stod(token.substr(9));
            } catch (const std::exception&) {
                throw std::invalid_argument("bad ablation constant: " + token);
            }
        } else if (!token.empty()) {
            out.branches = detail::branches_from(token);
        } else {
            throw std::invalid_argument("empty ablation token in: " + spec);
        }
        if (plus == std::string::npos) break;
        start = plus + 1;
    }
    return out;
}

// `--graph` grammar for the ablate command: "native" or "constant:<v>".
inline void apply_graph_spec(AblationSpec& out, const std::string& spec) {
    if (spec == "native") {
        out.constant_graph = false;
        return;
    }
    if (spec.rfind("constant:", 0) == 0) {
        out.constant_graph = true;
        try {
            out.constant_value = std::stod(spec.substr(9));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad graph constant: " + spec);
        }
        return;
    }
    throw std::invalid_argument("unknown graph spec: " + spec);
}

namespace detail {

inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

inline void write_config_snapshot(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir / "config.json", dump_json(to_json(cfg)));
}

inline std::pair<Dataset, Dataset> resolve_datasets(const RunConfig& cfg) {
    if (!cfg.data_dir.empty())
        return {load_feature_dir(cfg.data_dir / "train"), load_feature_dir(cfg.data_dir / "eval")};
    return {generate(cfg.train_data), generate(cfg.eval_data)};
}

inline std::vector<int> concatenated_ground_truth(const Dataset& eval_set) {
    std::vector<int> labels;
    for (const auto& bag : eval_set) {
        if (!bag.has_ground_truth())
            throw std::runtime_error("eval video lacks ground truth: " + bag.id);
        labels.insert(labels.end(), bag.ground_truth.begin(), bag.ground_truth.end());
    }
    return labels;
}

inline void run_generate(const RunConfig& cfg) {
    const Dataset train = generate(cfg.train_data);
    const Dataset eval_set = generate(cfg.eval_data);
    std::filesystem::create_directories(cfg.out_dir / "train");
    std::filesystem::create_directories(cfg.out_dir / "eval");
    for (const auto& bag : train) save_feature_file(cfg.out_dir / "train" / (bag.id + ".gcnf"), bag);
    for (const auto& bag : eval_set) save_feature_file(cfg.out_dir / "eval" / (bag.id + ".gcnf"), bag);
}

inline void write_run_outputs(const RunConfig& cfg, const AlternationHistory& history,
                              const BuiltinSnippetClassifier& clf, const Dataset& eval_set) {
    const std::vector<int> eval_labels = concatenated_ground_truth(eval_set);

    ordered_json metrics;
    metrics["command"] = cfg.command;
    metrics["seed"] = cfg.seed;
    metrics["n_steps"] = history.steps.size();
    metrics["ablation"] = to_json(cfg.alternation.ablation);
    metrics["steps"] = ordered_json::array();
    for (const auto& rec : history.steps) {
        ordered_json step;
        step["step"] = rec.step;
        step["eval_auc"] = rec.eval_auc;
        step["eval_far"] = rec.eval_far;
        step["graph_builds_during_eval"] = rec.graph_builds_during_eval;
        step["n_cleaned_videos"] = rec.cleaned.size();
        metrics["steps"].push_back(std::move(step));
    }
    metrics["final_auc"] = history.steps.back().eval_auc;
    metrics["final_far"] = history.steps.back().eval_far;
    write_text_file(cfg.out_dir / "metrics.json", dump_json(metrics));

    for (const auto& rec : history.steps) {
        const std::string suffix = "step_" + std::to_string(rec.step);
        if (!rec.cleaned.empty()) {
            ordered_json cleaned;
            for (const auto& [id, values] : rec.cleaned) cleaned[id] = values;
            write_text_file(cfg.out_dir / ("cleaned_" + suffix + ".json"), dump_json(cleaned));
        }
        write_text_file(cfg.out_dir / ("roc_" + suffix + ".csv"),
                        roc_to_csv(roc_curve(rec.eval_scores, eval_labels)));
    }

    save_classifier_checkpoint(cfg.out_dir / "classifier_final.gcnc", clf);
    if (history.final_cleaner)
        save_cleaner_checkpoint(cfg.out_dir / "cleaner_final.gcnc", *history.final_cleaner);
}

inline void run_alternation_experiment(const RunConfig& cfg) {
    const auto [train, eval_set] = resolve_datasets(cfg);
    if (train.empty()) throw std::runtime_error("empty training dataset");
    BuiltinSnippetClassifier clf(cfg.alternation.classifier, train.front().features.dim());
    const AlternationHistory history = run(cfg.alternation, clf, train, eval_set);
    write_run_outputs(cfg, history, clf, eval_set);
}

inline void run_eval(const RunConfig& cfg) {
    const BuiltinSnippetClassifier clf = load_classifier_checkpoint(cfg.checkpoint);
    const Dataset eval_set =
        cfg.data_dir.empty() ? generate(cfg.eval_data) : load_feature_dir(cfg.data_dir / "eval");
    const EvalResult result = evaluate_classifier(clf, eval_set);

    ordered_json metrics;
    metrics["command"] = cfg.command;
    metrics["eval_auc"] = result.auc;
    metrics["eval_far"] = result.far;
    write_text_file(cfg.out_dir / "metrics.json", dump_json(metrics));
    write_text_file(cfg.out_dir / "roc.csv", roc_to_csv(roc_curve(result.scores, result.labels)));
}

}  // namespace detail

// Executes one experiment command. The config snapshot lands in the run
// directory before any data generation or training, so the directory is
// self-describing even after a failed run.
inline int run_experiment(const RunConfig& cfg) {
    try {
        cfg.validate();
        detail::write_config_snapshot(cfg);
        if (cfg.command == "generate")
            detail::run_generate(cfg);
        else if (cfg.command == "eval")
            detail::run_eval(cfg);
        else
            detail::run_alternation_experiment(cfg);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace nck
