#include "coml/model_io.hpp"

#include "coml/errors.hpp"
#include "coml/hash.hpp"
#include "coml/ops.hpp"
#include "coml/storage.hpp"

#include <bit>
#include <cstring>

namespace coml {

using nlohmann::ordered_json;

namespace {

void append_f64(std::vector<std::uint8_t>& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double read_f64(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
}

}  // namespace

std::string serialize_model(const TrainedModel& m) {
    ordered_json header;
    header["format"] = "coml-model";
    header["version"] = m.version;
    header["device"] = m.device.str();
    ordered_json order = ordered_json::array();
    for (const auto& id : m.label_order) order.push_back(id.str());
    header["label_order"] = std::move(order);
    header["extractor_id"] = m.extractor_id;
    header["shapes"] = {{"W", {m.params.classes, m.params.dim}}, {"b", {m.params.classes}}};
    header["trained_at"] = m.trained_at;
    header["train_sample_count"] = m.train_sample_count;

    std::vector<std::uint8_t> raw;
    raw.reserve((m.params.W.size() + m.params.b.size()) * 8);
    for (double v : m.params.W) append_f64(raw, v);
    for (double v : m.params.b) append_f64(raw, v);
    return header.dump() + "\n" + base64_encode(raw) + "\n";
}

namespace {

TrainedModel parse_model(std::string_view text) {
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) throw Error(ErrorCode::ModelMismatch, "model file lacks a header line");
    auto header = nlohmann::json::parse(text.substr(0, nl), nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "coml-model") {
        throw Error(ErrorCode::ModelMismatch, "not a coml model file");
    }
    std::string_view body = text.substr(nl + 1);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);

    TrainedModel m;
    m.version = header.at("version").get<std::uint64_t>();
    m.device = id_from_json<DeviceId>(header, "device");
    for (const auto& id : header.at("label_order")) {
        auto parsed = LabelId::parse(id.get<std::string>());
        if (!parsed) throw Error(ErrorCode::ModelMismatch, "bad label id in model");
        m.label_order.push_back(*parsed);
    }
    m.extractor_id = header.at("extractor_id").get<std::string>();
    const auto& shapes = header.at("shapes");
    std::size_t k = shapes.at("W").at(0).get<std::size_t>();
    std::size_t d = shapes.at("W").at(1).get<std::size_t>();
    if (shapes.at("b").at(0).get<std::size_t>() != k || k != m.label_order.size()) {
        throw Error(ErrorCode::ModelMismatch, "inconsistent model shapes");
    }
    m.trained_at = header.at("trained_at").get<std::int64_t>();
    m.train_sample_count = header.at("train_sample_count").get<std::size_t>();

    auto raw = base64_decode(body);
    if (raw.size() != (k * d + k) * 8) throw Error(ErrorCode::ModelMismatch, "weight payload has wrong length");
    m.params = SoftmaxParams(k, d);
    for (std::size_t i = 0; i < k * d; ++i) m.params.W[i] = read_f64(raw.data() + 8 * i);
    for (std::size_t i = 0; i < k; ++i) m.params.b[i] = read_f64(raw.data() + 8 * (k * d + i));
    return m;
}

}  // namespace

TrainedModel deserialize_model(std::string_view text) {
    try {
        return parse_model(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ModelMismatch, std::string("malformed model header: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
    write_file_durably(path, serialize_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return deserialize_model(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace coml
