#include "denim/bundle.hpp"

#include <cstring>
#include <fstream>

#include "denim/serde.hpp"

namespace denim {

namespace {

constexpr char kMagic[8] = {'D', 'E', 'N', 'I', 'M', 'C', 'K', '1'};
constexpr int kFormatVersion = 1;

}  // namespace

ModelBundle::ModelBundle(const ArchConfig& a) : arch(a), encoder(a, "encoder"), decoder(a, "decoder") {}

void ModelBundle::attach_classifier() {
    ClassifierNet c(arch, "classifier");
    c.encoder = encoder;
    // The copied weights keep their "encoder." names; re-key them so tensor
    // names stay unique within the checkpoint.
    for (Param* p : c.encoder.params()) p->name = "classifier." + p->name;
    classifier = std::move(c);
}

ParamRefs ModelBundle::params() {
    ParamRefs out = encoder.params();
    for (auto* p : decoder.params()) out.push_back(p);
    if (classifier.has_value())
        for (auto* p : classifier->params()) out.push_back(p);
    return out;
}

std::int64_t ModelBundle::num_params() {
    std::int64_t n = 0;
    for (const Param* p : params()) n += p->value.size();
    return n;
}

ModelBundle make_bundle(const ArchConfig& arch, std::uint64_t seed) {
    arch.validate();
    ModelBundle b(arch);
    Rng rng(seed);
    b.encoder.init(rng);
    b.decoder.init(rng);
    return b;
}

std::int64_t pretrain_param_count(const ArchConfig& arch) {
    const std::int64_t d = arch.embed_dim, n = arch.num_patches(), pd = arch.patch_dim();
    const std::int64_t hidden = static_cast<std::int64_t>(arch.embed_dim * arch.mlp_ratio);
    const std::int64_t block = (d * 3 * d + 3 * d)      // qkv
                               + (d * d + d)            // proj
                               + 2 * (d + d)            // two layer norms
                               + (d * hidden + hidden)  // fc1
                               + (hidden * d + d);      // fc2
    const std::int64_t encoder = (pd * d + d)                  // patch embed
                                 + n * d + d                   // pos + mask token
                                 + arch.depth_encoder * block  //
                                 + 2 * d;                      // final norm
    const std::int64_t decoder = n * d                          // pos
                                 + arch.depth_decoder * block   //
                                 + 2 * d                        // final norm
                                 + (d * pd + pd);               // to_pixels
    return encoder + decoder;
}

namespace {

void write_exact(std::ofstream& out, const void* data, std::size_t bytes) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("checkpoint write failed");
}

void read_exact(std::ifstream& in, void* data, std::size_t bytes, const std::string& what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (in.gcount() != static_cast<std::streamsize>(bytes))
        throw IoError("checkpoint truncated while reading " + what);
}

json header_json(const ModelBundle& bundle, ParamRefs params) {
    json tensors = json::array();
    for (const Param* p : params) {
        tensors.push_back(json{{"name", p->name}, {"shape", p->value.shape()}});
    }
    return json{{"format_version", kFormatVersion},
                {"arch", bundle.arch},
                {"provenance", bundle.provenance},
                {"has_classifier", bundle.classifier.has_value()},
                {"tensors", tensors}};
}

struct HeaderRead {
    json header;
    std::ifstream stream;
};

HeaderRead open_and_read_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[8];
    read_exact(in, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError(path.string() + " is not a model checkpoint (bad magic)");
    std::uint64_t header_len = 0;
    read_exact(in, &header_len, sizeof(header_len), "header length");
    if (header_len == 0 || header_len > (1ull << 30)) throw IoError("checkpoint header length is implausible");
    std::string header_text(header_len, '\0');
    read_exact(in, header_text.data(), header_len, "header");
    json header = json::parse(header_text, nullptr, false);
    if (header.is_discarded()) throw IoError("checkpoint header is not valid JSON");
    const int version = header.at("format_version").get<int>();
    if (version != kFormatVersion)
        throw IoError("unsupported checkpoint format version " + std::to_string(version));
    return HeaderRead{std::move(header), std::move(in)};
}

}  // namespace

void save_bundle(ModelBundle& bundle, const std::filesystem::path& path) {
    ParamRefs params = bundle.params();
    const std::string header = header_json(bundle, params).dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    write_exact(out, kMagic, sizeof(kMagic));
    const std::uint64_t header_len = header.size();
    write_exact(out, &header_len, sizeof(header_len));
    write_exact(out, header.data(), header.size());
    for (const Param* p : params)
        write_exact(out, p->value.data(), sizeof(float) * static_cast<std::size_t>(p->value.size()));
    out.close();
    if (!out) throw IoError("checkpoint close failed: " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    HeaderRead hr = open_and_read_header(path);
    const json& header = hr.header;

    ModelBundle bundle(header.at("arch").get<ArchConfig>());
    bundle.provenance = header.at("provenance").get<Provenance>();
    if (header.at("has_classifier").get<bool>()) bundle.attach_classifier();

    ParamRefs params = bundle.params();
    std::map<std::string, Param*> by_name;
    for (Param* p : params) by_name[p->name] = p;

    const json& tensors = header.at("tensors");
    if (tensors.size() != params.size())
        throw IoError("checkpoint tensor count " + std::to_string(tensors.size()) + " does not match architecture (" +
                      std::to_string(params.size()) + " expected)");
    for (const json& entry : tensors) {
        const auto name = entry.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw IoError("checkpoint has unknown tensor \"" + name + "\"");
        Param* p = it->second;
        const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        if (shape != p->value.shape())
            throw IoError("checkpoint tensor \"" + name + "\" has mismatched shape");
        read_exact(hr.stream, p->value.data(), sizeof(float) * static_cast<std::size_t>(p->value.size()),
                   "tensor " + name);
    }
    return bundle;
}

BundleInfo peek_bundle(const std::filesystem::path& path) {
    HeaderRead hr = open_and_read_header(path);
    BundleInfo info;
    info.arch = hr.header.at("arch").get<ArchConfig>();
    info.provenance = hr.header.at("provenance").get<Provenance>();
    info.has_classifier = hr.header.at("has_classifier").get<bool>();
    info.num_tensors = static_cast<std::int64_t>(hr.header.at("tensors").size());
    return info;
}

}  // namespace denim
