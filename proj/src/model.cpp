#include "gazerep/model.hpp"

#include "gazerep/checkpoint.hpp"

#include <cstring>
#include <sstream>
#include <stdexcept>

namespace gazerep {

namespace {

constexpr char kMagic[4] = {'G', 'Z', 'A', 'E'};
constexpr uint32_t kVersion = 1;
constexpr int64_t kPaperTotalPosition = 652228;
constexpr int64_t kPaperTotalVelocity = 1964676;

} // namespace

ModelConfig ModelConfig::position() {
    ModelConfig cfg;
    cfg.modality = Modality::Position;
    cfg.enc_filters = 128;
    cfg.dec_spec = {{128, 4}, {64, 4}};
    cfg.destroy_p = 0.75f;
    return cfg;
}

ModelConfig ModelConfig::velocity() {
    ModelConfig cfg;
    cfg.modality = Modality::Velocity;
    cfg.enc_filters = 256;
    cfg.dec_spec = {{128, 8}};
    cfg.destroy_p = 0.66f;
    return cfg;
}

ModelConfig ModelConfig::velocity_250hz() {
    ModelConfig cfg = velocity();
    cfg.dilations = {1, 1, 2, 4, 8, 16, 16, 32};
    return cfg;
}

ModelConfig ModelConfig::reduced(Modality modality, int filters, int z_dim) {
    ModelConfig cfg;
    cfg.modality = modality;
    cfg.enc_filters = filters;
    cfg.dec_spec = {{filters, 8}};
    cfg.z1_dim = z_dim;
    cfg.z2_dim = z_dim;
    cfg.destroy_p = modality == Modality::Position ? 0.75f : 0.66f;
    return cfg;
}

int ModelConfig::decoder_layers() const {
    int n = 0;
    for (const auto& s : dec_spec) n += s.layers;
    return n;
}

void ModelConfig::validate() const {
    if (enc_filters < 1) throw std::invalid_argument("model config: enc_filters must be >= 1");
    if (enc_layers != static_cast<int>(dilations.size()))
        throw std::invalid_argument("model config: dilations length " +
                                    std::to_string(dilations.size()) + " != enc_layers " +
                                    std::to_string(enc_layers));
    if (enc_layers % 2 != 0 || enc_layers < 2)
        throw std::invalid_argument("model config: enc_layers must be even and >= 2");
    if (dec_spec.empty()) throw std::invalid_argument("model config: empty decoder spec");
    for (const auto& s : dec_spec)
        if (s.filters < 1 || s.layers < 2 || s.layers % 2 != 0)
            throw std::invalid_argument("model config: decoder stages need even layer counts >= 2");
    if (decoder_layers() < 6)
        throw std::invalid_argument("model config: decoder needs >= 6 layers for the micro tap");
    if (z1_dim < 1 || z2_dim < 1) throw std::invalid_argument("model config: z dims must be >= 1");
    if (destroy_p < 0.0f || destroy_p > 1.0f)
        throw std::invalid_argument("model config: destroy_p outside [0,1]");
    for (int d : dilations)
        if (d < 1) throw std::invalid_argument("model config: dilations must be >= 1");
}

EncoderTcn EncoderTcn::create(ParamRegistry& reg, const ModelConfig& cfg) {
    EncoderTcn enc;
    int f = cfg.enc_filters;
    enc.stem = ConvLayer::create(reg, "enc.stem", 2, f, /*dilation=*/1, /*causal=*/false,
                                 /*kernel=*/1);
    enc.stem_bn = BatchNorm::create(reg, "enc.stem_bn", f);
    int n_blocks = cfg.enc_layers / 2;
    enc.blocks.reserve(static_cast<size_t>(n_blocks));
    for (int b = 0; b < n_blocks; ++b)
        enc.blocks.push_back(ResidualBlock::create(reg, "enc.block" + std::to_string(b + 1), f, f,
                                                   cfg.dilations[static_cast<size_t>(2 * b)],
                                                   cfg.dilations[static_cast<size_t>(2 * b + 1)],
                                                   /*causal=*/false));
    enc.z1_weight = reg.add("enc.z1_fc.weight", {cfg.z1_dim, f});
    enc.z1_bias = reg.add("enc.z1_fc.bias", {cfg.z1_dim});
    enc.z2_weight = reg.add("enc.z2_fc.weight", {cfg.z2_dim, f});
    enc.z2_bias = reg.add("enc.z2_fc.bias", {cfg.z2_dim});
    return enc;
}

void EncoderTcn::forward(const Tensor& x, bool training, Tensor& z1, Tensor& z2) {
    Tensor h = stem_bn.forward(relu(stem.forward(x)), training);
    size_t micro_block = blocks.size() / 2; // tap after half the stack
    for (size_t b = 0; b < micro_block; ++b) h = blocks[b].forward(h, training);
    z1 = linear(gap(h), z1_weight, z1_bias);
    for (size_t b = micro_block; b < blocks.size(); ++b) h = blocks[b].forward(h, training);
    z2 = linear(gap(h), z2_weight, z2_bias);
}

DecoderTcn DecoderTcn::create(ParamRegistry& reg, const ModelConfig& cfg) {
    DecoderTcn dec;
    int in_ch = 2;
    int layer = 0;
    int block_idx = 0;
    for (const auto& stage : cfg.dec_spec)
        for (int b = 0; b < stage.layers / 2; ++b) {
            int d1 = cfg.dilations[static_cast<size_t>(layer % cfg.dilations.size())];
            int d2 = cfg.dilations[static_cast<size_t>((layer + 1) % cfg.dilations.size())];
            dec.blocks.push_back(ResidualBlock::create(
                reg, "dec.block" + std::to_string(++block_idx), in_ch, stage.filters, d1, d2,
                /*causal=*/true));
            in_ch = stage.filters;
            layer += 2;
        }
    int first_ch = dec.blocks.front().conv1.out_ch;
    int fifth_ch = dec.blocks[2].conv1.out_ch; // conv layer 5 = block 3, first conv
    dec.cond_z2_weight = reg.add("dec.cond_z2.weight", {first_ch, cfg.z2_dim});
    dec.cond_z2_bias = reg.add("dec.cond_z2.bias", {first_ch});
    dec.cond_z1_weight = reg.add("dec.cond_z1.weight", {fifth_ch, cfg.z1_dim});
    dec.cond_z1_bias = reg.add("dec.cond_z1.bias", {fifth_ch});
    dec.head = ConvLayer::create(reg, "dec.head", in_ch, 2, /*dilation=*/1, /*causal=*/true,
                                 /*kernel=*/1);
    return dec;
}

Tensor DecoderTcn::forward(const Tensor& destroyed, const Tensor& z1, const Tensor& z2,
                           bool training) {
    Tensor macro_bias = linear(z2, cond_z2_weight, cond_z2_bias);
    Tensor micro_bias = linear(z1, cond_z1_weight, cond_z1_bias);
    Tensor h = destroyed;
    for (size_t b = 0; b < blocks.size(); ++b) {
        Tensor cond1 = b == 0 ? macro_bias : (b == 2 ? micro_bias : Tensor{});
        h = blocks[b].forward(h, training, cond1);
    }
    return head.forward(h);
}

Autoencoder::Autoencoder(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    encoder_ = EncoderTcn::create(params_, cfg_);
    decoder_ = DecoderTcn::create(params_, cfg_);
    init_params(params_, seed);
}

void Autoencoder::encode(const Tensor& x, bool training, Tensor& z1, Tensor& z2) {
    if (x.rank() != 3 || x.dim(1) != 2)
        throw std::invalid_argument("encode: expects [B,2,T], got " + shape_str(x.shape()));
    encoder_.forward(x, training, z1, z2);
}

Tensor Autoencoder::decode(const Tensor& destroyed, const Tensor& z1, const Tensor& z2,
                           bool training) {
    if (z1.rank() != 2 || z1.dim(1) != cfg_.z1_dim || z2.rank() != 2 || z2.dim(1) != cfg_.z2_dim)
        throw std::invalid_argument("decode: z shapes " + shape_str(z1.shape()) + "/" +
                                    shape_str(z2.shape()) + " do not match config (" +
                                    std::to_string(cfg_.z1_dim) + "+" +
                                    std::to_string(cfg_.z2_dim) + ")");
    return decoder_.forward(destroyed, z1, z2, training);
}

Tensor Autoencoder::reconstruct_loss(const Tensor& x, uint64_t destroy_key) {
    Tensor destroyed = destroy(x, cfg_.destroy_p, destroy_key);
    Tensor z1, z2;
    encode(x, /*training=*/true, z1, z2);
    Tensor xhat = decode(destroyed, z1, z2, /*training=*/true);
    return sum_of_squares(sub(x, xhat));
}

Representation Autoencoder::represent(const std::vector<float>& signal, int length) {
    if (length < 1 || static_cast<int>(signal.size()) != 2 * length)
        throw std::invalid_argument("represent: signal buffer is not 2xT");
    NoGradGuard no_grad;
    Tensor x = Tensor::from_data({1, 2, length}, signal);
    Tensor z1, z2;
    encode(x, /*training=*/false, z1, z2);
    Representation rep;
    rep.modality = cfg_.modality;
    rep.micro = z1.to_vector();
    rep.macro = z2.to_vector();
    rep.z = rep.micro;
    rep.z.insert(rep.z.end(), rep.macro.begin(), rep.macro.end());
    return rep;
}

std::vector<std::pair<std::string, std::vector<float>*>> Autoencoder::buffers() {
    std::vector<std::pair<std::string, std::vector<float>*>> out;
    auto add_bn = [&out](const std::string& name, BatchNorm& bn) {
        out.emplace_back(name + ".running_mean", &bn.running_mean);
        out.emplace_back(name + ".running_var", &bn.running_var);
    };
    add_bn("enc.stem_bn", encoder_.stem_bn);
    for (size_t b = 0; b < encoder_.blocks.size(); ++b) {
        add_bn("enc.block" + std::to_string(b + 1) + ".bn1", encoder_.blocks[b].bn1);
        add_bn("enc.block" + std::to_string(b + 1) + ".bn2", encoder_.blocks[b].bn2);
    }
    for (size_t b = 0; b < decoder_.blocks.size(); ++b) {
        add_bn("dec.block" + std::to_string(b + 1) + ".bn1", decoder_.blocks[b].bn1);
        add_bn("dec.block" + std::to_string(b + 1) + ".bn2", decoder_.blocks[b].bn2);
    }
    return out;
}

// ---- audit ----

namespace {

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

} // namespace

AuditReport audit_config(const ModelConfig& cfg) {
    Autoencoder model(cfg, /*seed=*/0);
    return model.audit();
}

AuditReport Autoencoder::audit() const {
    AuditReport report;
    auto category = [](const std::string& name) -> std::string {
        bool enc = starts_with(name, "enc.");
        std::string side = enc ? "encoder" : "decoder";
        if (name.find(".stem") != std::string::npos) return "encoder.stem";
        if (name.find("_fc.") != std::string::npos) return "encoder.bottleneck_fc";
        if (name.find(".cond_") != std::string::npos) return "decoder.conditioning_fc";
        if (name.find(".head") != std::string::npos) return "decoder.head";
        if (name.find(".proj") != std::string::npos) return side + ".skip_projections";
        if (name.find(".bn") != std::string::npos) return side + ".batchnorm_affine";
        return side + ".convs";
    };
    std::vector<std::string> order = {"encoder.stem",          "encoder.convs",
                                      "encoder.batchnorm_affine", "encoder.skip_projections",
                                      "encoder.bottleneck_fc", "decoder.convs",
                                      "decoder.batchnorm_affine", "decoder.skip_projections",
                                      "decoder.conditioning_fc",  "decoder.head"};
    for (const auto& comp : order) report.rows.push_back({comp, 0});
    const auto& names = params_.names();
    const auto& tensors = params_.tensors();
    for (size_t i = 0; i < names.size(); ++i) {
        std::string comp = category(names[i]);
        for (auto& row : report.rows)
            if (row.component == comp) {
                row.count += tensors[i].size();
                break;
            }
        report.total += tensors[i].size();
    }
    for (int l = 1; l <= cfg_.enc_layers; ++l)
        report.receptive_fields.push_back(receptive_field(cfg_.dilations, l));
    return report;
}

std::string AuditReport::to_text(Modality modality) const {
    std::ostringstream out;
    out << "receptive fields:";
    for (int rf : receptive_fields) out << " " << rf;
    out << "\n";
    for (const auto& row : rows)
        out << "  " << row.component << ": " << row.count << "\n";
    out << "total parameters: " << total << "\n";
    int64_t reference =
        modality == Modality::Position ? kPaperTotalPosition : kPaperTotalVelocity;
    double rel = 100.0 * (static_cast<double>(total) - static_cast<double>(reference)) /
                 static_cast<double>(reference);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.2f%%", rel);
    out << "reference total: " << reference << " (" << buf << ")\n";
    return out.str();
}

// ---- checkpoint ----

namespace {

void put_i32(std::vector<uint8_t>& buf, int32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<uint8_t>& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(bits >> (8 * i)));
}
int32_t take_i32(const std::vector<uint8_t>& buf, size_t& pos) {
    if (pos + 4 > buf.size()) throw std::runtime_error("checkpoint: truncated config");
    int32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<int32_t>(buf[pos + static_cast<size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
}
float take_f32(const std::vector<uint8_t>& buf, size_t& pos) {
    int32_t bits = take_i32(buf, pos);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::vector<uint8_t> serialize_config(const ModelConfig& cfg) {
    std::vector<uint8_t> buf;
    buf.push_back(cfg.modality == Modality::Position ? 0 : 1);
    put_i32(buf, cfg.enc_filters);
    put_i32(buf, cfg.enc_layers);
    put_i32(buf, static_cast<int32_t>(cfg.dec_spec.size()));
    for (const auto& s : cfg.dec_spec) {
        put_i32(buf, s.filters);
        put_i32(buf, s.layers);
    }
    put_i32(buf, static_cast<int32_t>(cfg.dilations.size()));
    for (int d : cfg.dilations) put_i32(buf, d);
    put_i32(buf, cfg.z1_dim);
    put_i32(buf, cfg.z2_dim);
    put_f32(buf, cfg.destroy_p);
    return buf;
}

ModelConfig deserialize_config(const std::vector<uint8_t>& buf) {
    if (buf.empty()) throw std::runtime_error("checkpoint: empty config header");
    ModelConfig cfg;
    size_t pos = 0;
    cfg.modality = buf[pos++] == 0 ? Modality::Position : Modality::Velocity;
    cfg.enc_filters = take_i32(buf, pos);
    cfg.enc_layers = take_i32(buf, pos);
    int n_stages = take_i32(buf, pos);
    cfg.dec_spec.clear();
    for (int i = 0; i < n_stages; ++i) {
        DecoderStage s;
        s.filters = take_i32(buf, pos);
        s.layers = take_i32(buf, pos);
        cfg.dec_spec.push_back(s);
    }
    int n_dil = take_i32(buf, pos);
    cfg.dilations.clear();
    for (int i = 0; i < n_dil; ++i) cfg.dilations.push_back(take_i32(buf, pos));
    cfg.z1_dim = take_i32(buf, pos);
    cfg.z2_dim = take_i32(buf, pos);
    cfg.destroy_p = take_f32(buf, pos);
    cfg.validate();
    return cfg;
}

} // namespace

void save_model(const std::string& path, Autoencoder& model) {
    std::vector<NamedBlob> blobs;
    const auto& names = model.params().names();
    const auto& tensors = model.params().tensors();
    for (size_t i = 0; i < names.size(); ++i)
        blobs.push_back({names[i], tensors[i].shape(), tensors[i].to_vector()});
    for (auto& [name, vec] : model.buffers())
        blobs.push_back({name, {static_cast<int>(vec->size())}, *vec});
    write_blob_file(path, kMagic, kVersion, serialize_config(model.config()), blobs);
}

Autoencoder load_model(const std::string& path) {
    std::vector<uint8_t> header;
    auto blobs = read_blob_file(path, kMagic, kVersion, &header);
    ModelConfig cfg = deserialize_config(header);
    Autoencoder model(cfg, /*seed=*/0);

    auto find_blob = [&blobs, &path](const std::string& name) -> const NamedBlob& {
        for (const auto& b : blobs)
            if (b.name == name) return b;
        throw std::runtime_error("checkpoint: " + path + " is missing record " + name);
    };
    const auto& names = model.params().names();
    auto& tensors = model.params().tensors();
    for (size_t i = 0; i < names.size(); ++i) {
        const NamedBlob& blob = find_blob(names[i]);
        if (blob.shape != tensors[i].shape())
            throw std::runtime_error("checkpoint: record " + names[i] + " has shape mismatch");
        std::copy(blob.data.begin(), blob.data.end(), tensors[i].data());
    }
    for (auto& [name, vec] : model.buffers()) {
        const NamedBlob& blob = find_blob(name);
        if (blob.data.size() != vec->size())
            throw std::runtime_error("checkpoint: record " + name + " has length mismatch");
        *vec = blob.data;
    }
    return model;
}

// ---- supervised variant ----

TcnClassifier::TcnClassifier(ModelConfig cfg, int n_classes, uint64_t seed)
    : cfg_(std::move(cfg)), n_classes_(n_classes) {
    cfg_.validate();
    if (n_classes_ < 2) throw std::invalid_argument("classifier: needs >= 2 classes");
    encoder_ = EncoderTcn::create(params_, cfg_);
    head_weight_ = params_.add("head.weight", {n_classes_, cfg_.z_dim()});
    head_bias_ = params_.add("head.bias", {n_classes_});
    init_params(params_, seed);
}

namespace {

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    int B = a.dim(0), n1 = a.dim(1), n2 = b.dim(1);
    std::vector<float> data(static_cast<size_t>(B) * (n1 + n2));
    for (int i = 0; i < B; ++i) {
        std::memcpy(data.data() + static_cast<size_t>(i) * (n1 + n2), a.data() + i * n1,
                    static_cast<size_t>(n1) * 4);
        std::memcpy(data.data() + static_cast<size_t>(i) * (n1 + n2) + n1, b.data() + i * n2,
                    static_cast<size_t>(n2) * 4);
    }
    return make_op_result({B, n1 + n2}, std::move(data), "concat_cols", {a, b},
                          [a, b, B, n1, n2](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (a.requires_grad()) {
            float* ga = a.grad();
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < n1; ++j) ga[i * n1 + j] += g[i * (n1 + n2) + j];
        }
        if (b.requires_grad()) {
            float* gb = b.grad();
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < n2; ++j) gb[i * n2 + j] += g[i * (n1 + n2) + n1 + j];
        }
    });
}

} // namespace

Tensor TcnClassifier::logits(const Tensor& x, bool training) {
    Tensor z1, z2;
    encoder_.forward(x, training, z1, z2);
    return linear(concat_cols(z1, z2), head_weight_, head_bias_);
}

std::vector<float> TcnClassifier::probabilities(const Tensor& x) {
    NoGradGuard no_grad;
    return softmax_probs(logits(x, /*training=*/false));
}

Tensor TcnClassifier::loss(const Tensor& x, const std::vector<int>& labels) {
    return softmax_xent(logits(x, /*training=*/true), labels);
}

} // namespace gazerep
