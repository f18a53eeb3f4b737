#include "hypee/data_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hypee::data_io {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
    if (num_superclasses < 1 || subclasses_per_superclass < 1 || samples_per_class < 1) {
        throw std::invalid_argument("synthetic spec: counts must be >= 1");
    }
    if (input_dim < num_superclasses) {
        throw std::invalid_argument(
            "synthetic spec: input_dim must be >= num_superclasses (centers are placed on "
            "scaled basis vectors)");
    }
    if (!(class_spread > 0.0) || !(superclass_separation > 0.0)) {
        throw std::invalid_argument("synthetic spec: spread and separation must be positive");
    }
    if (superclass_separation <= class_spread) {
        throw std::invalid_argument("synthetic spec: separation must exceed class spread");
    }
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    rng::Engine eng(spec.seed);

    const int C = spec.num_classes();
    const size_t dim = static_cast<size_t>(spec.input_dim);

    // Superclass centers: separation-scaled basis vectors plus a bounded jitter,
    // keeping every pairwise distance >= separation (basis pairs sit at
    // separation * sqrt(2) before jitter).
    const double jitter = 0.2 * spec.superclass_separation * (std::sqrt(2.0) - 1.0);
    std::vector<std::vector<double>> super_centers;
    for (int s = 0; s < spec.num_superclasses; ++s) {
        std::vector<double> center(dim, 0.0);
        center[static_cast<size_t>(s)] = spec.superclass_separation * std::sqrt(2.0);
        for (size_t d = 0; d < dim; ++d) center[d] += eng.uniform(-jitter, jitter) / std::sqrt(static_cast<double>(dim));
        super_centers.push_back(std::move(center));
    }

    // Subclass centers: direction-perturbed copies at a fixed offset from the
    // superclass center (quarter of the separation).
    const double sub_offset = 0.25 * spec.superclass_separation;
    std::vector<std::vector<double>> class_centers;
    for (int s = 0; s < spec.num_superclasses; ++s) {
        for (int u = 0; u < spec.subclasses_per_superclass; ++u) {
            std::vector<double> dir = eng.normal_vector(dim);
            double norm = 0.0;
            for (double x : dir) norm += x * x;
            norm = std::sqrt(norm);
            if (norm < 1e-12) norm = 1.0;
            std::vector<double> center = super_centers[static_cast<size_t>(s)];
            for (size_t d = 0; d < dim; ++d) center[d] += sub_offset * dir[d] / norm;
            class_centers.push_back(std::move(center));
        }
    }

    Dataset ds;
    ds.num_classes = C;
    ds.features.reserve(static_cast<size_t>(C) * static_cast<size_t>(spec.samples_per_class));
    for (int cls = 0; cls < C; ++cls) {
        for (int i = 0; i < spec.samples_per_class; ++i) {
            std::vector<double> x = class_centers[static_cast<size_t>(cls)];
            for (size_t d = 0; d < dim; ++d) x[d] += eng.normal(0.0, spec.class_spread);
            ds.features.push_back(std::move(x));
            ds.labels.push_back(cls);
        }
    }
    return ds;
}

void atomic_write(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError(IoError::Code::write_failed, "cannot open " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw IoError(IoError::Code::write_failed, "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

namespace {

template <class T>
void append_le(std::string& buf, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf.append(bytes, sizeof(T));
}

template <class T>
T read_le(const std::string& buf, size_t& offset, const char* what) {
    if (offset + sizeof(T) > buf.size()) {
        throw IoError(IoError::Code::truncated,
                      std::string("embedding file truncated while reading ") + what);
    }
    T value;
    std::memcpy(&value, buf.data() + offset, sizeof(T));
    offset += sizeof(T);
    return value;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Code::not_found, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

} // namespace

void write_embeddings(const analysis::EmbeddingSet& set, const fs::path& path) {
    set.validate();
    const uint64_t count = set.size();
    const uint32_t dim = count ? static_cast<uint32_t>(set.points.front().size()) : 0;

    std::string buf;
    buf.append("HYEE", 4);
    append_le<uint32_t>(buf, kEmbeddingFormatVersion);
    append_le<uint64_t>(buf, count);
    append_le<uint32_t>(buf, dim);
    append_le<double>(buf, set.curvature);
    append_le<uint8_t>(buf, set.hyperbolic ? 1 : 0);
    const uint8_t flags = static_cast<uint8_t>((set.has_labels() ? 1 : 0) |
                                               (set.has_exit_ids() ? 2 : 0));
    append_le<uint8_t>(buf, flags);

    for (const auto& p : set.points) {
        for (double x : p) append_le<float>(buf, static_cast<float>(x));
    }
    if (set.has_labels()) {
        for (int l : set.labels) append_le<uint32_t>(buf, static_cast<uint32_t>(l));
    }
    if (set.has_exit_ids()) {
        for (int e : set.exit_ids) append_le<uint32_t>(buf, static_cast<uint32_t>(e));
    }
    atomic_write(path, buf);
}

analysis::EmbeddingSet read_embeddings(const fs::path& path) {
    const std::string buf = slurp(path);
    size_t offset = 0;
    if (buf.size() < 4 || buf.compare(0, 4, "HYEE") != 0) {
        throw IoError(IoError::Code::bad_magic, path.string() + ": not an embedding file");
    }
    offset = 4;
    const auto version = read_le<uint32_t>(buf, offset, "version");
    if (version != kEmbeddingFormatVersion) {
        throw IoError(IoError::Code::bad_version,
                      path.string() + ": unsupported version " + std::to_string(version));
    }
    const auto count = read_le<uint64_t>(buf, offset, "count");
    const auto dim = read_le<uint32_t>(buf, offset, "dim");
    const auto curvature = read_le<double>(buf, offset, "curvature");
    const auto mode = read_le<uint8_t>(buf, offset, "mode");
    const auto flags = read_le<uint8_t>(buf, offset, "flags");

    if (count > 0 && dim == 0) {
        throw IoError(IoError::Code::bad_payload, path.string() + ": zero-dimensional points");
    }

    analysis::EmbeddingSet set;
    set.curvature = curvature;
    set.hyperbolic = mode != 0;
    set.points.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        std::vector<double> p(dim);
        for (uint32_t d = 0; d < dim; ++d) {
            p[d] = static_cast<double>(read_le<float>(buf, offset, "payload"));
        }
        set.points.push_back(std::move(p));
    }
    if (flags & 1) {
        set.labels.reserve(count);
        for (uint64_t i = 0; i < count; ++i) {
            set.labels.push_back(static_cast<int>(read_le<uint32_t>(buf, offset, "labels")));
        }
    }
    if (flags & 2) {
        set.exit_ids.reserve(count);
        for (uint64_t i = 0; i < count; ++i) {
            set.exit_ids.push_back(static_cast<int>(read_le<uint32_t>(buf, offset, "exit ids")));
        }
    }
    if (offset != buf.size()) {
        throw IoError(IoError::Code::bad_payload,
                      path.string() + ": trailing bytes after payload");
    }
    return set;
}

Dataset load_csv_features(const fs::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Code::not_found, "cannot open " + path.string());

    auto split = [&schema](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, schema.delimiter)) cells.push_back(cell);
        if (!line.empty() && line.back() == schema.delimiter) cells.emplace_back();
        return cells;
    };

    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(IoError::Code::schema, path.string() + ": missing header row");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line);
    if (header.empty()) {
        throw IoError(IoError::Code::schema, path.string() + ": empty header row");
    }

    long label_idx = -1;
    if (schema.label_column) {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == *schema.label_column) {
                label_idx = static_cast<long>(i);
                break;
            }
        }
        if (label_idx < 0) {
            throw IoError(IoError::Code::schema, path.string() + ": label column '" +
                                                     *schema.label_column + "' not in header");
        }
    }

    Dataset ds;
    int max_label = -1;
    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw IoError(IoError::Code::schema,
                          path.string() + ": row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(header.size()));
        }
        std::vector<double> feats;
        feats.reserve(header.size());
        for (size_t col = 0; col < cells.size(); ++col) {
            const bool is_label = static_cast<long>(col) == label_idx;
            try {
                size_t pos = 0;
                const double value = std::stod(cells[col], &pos);
                if (pos != cells[col].size()) throw std::invalid_argument("trailing characters");
                if (is_label) {
                    const int label = static_cast<int>(value);
                    if (value != static_cast<double>(label) || label < 0) {
                        throw std::invalid_argument("label must be a nonnegative integer");
                    }
                    ds.labels.push_back(label);
                    max_label = std::max(max_label, label);
                } else {
                    feats.push_back(value);
                }
            } catch (const std::exception&) {
                throw IoError(IoError::Code::schema,
                              path.string() + ": non-numeric cell at row " + std::to_string(row) +
                                  ", column " + std::to_string(col + 1) + " ('" + cells[col] +
                                  "')");
            }
        }
        ds.features.push_back(std::move(feats));
    }
    if (label_idx >= 0) {
        ds.num_classes = max_label + 1;
    } else {
        ds.labels.assign(ds.features.size(), 0);
        ds.num_classes = ds.features.empty() ? 0 : 1;
    }
    return ds;
}

void save_checkpoint(const model::MultiExitModel& m, const nlohmann::json& resolved_config,
                     const fs::path& path) {
    nlohmann::json j;
    j["format"] = "hypee-checkpoint";
    j["version"] = kCheckpointVersion;
    j["config"] = resolved_config;
    j["curvature"] = m.curvature.c;
    j["init_seed"] = m.init_seed;
    j["spacelike_projections"] = m.spacelike_projections;
    j["backbone"] = {
        {"input_dim", m.config.input_dim},
        {"hidden_dims", m.config.hidden_dims},
        {"exit_after", m.config.exit_after},
        {"latent_dim", m.config.latent_dim},
        {"num_classes", m.config.num_classes},
        {"mode", model::to_string(m.config.mode)},
    };
    j["params"] = m.params;
    atomic_write(path, j.dump(2) + "\n");
}

model::MultiExitModel load_checkpoint(const fs::path& path, nlohmann::json* resolved_config_out) {
    const std::string text = slurp(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(IoError::Code::bad_payload, path.string() + ": invalid JSON: " + e.what());
    }
    if (!j.contains("format") || j["format"] != "hypee-checkpoint") {
        throw IoError(IoError::Code::bad_magic, path.string() + ": not a checkpoint file");
    }
    if (!j.contains("version") || j["version"].get<int>() != kCheckpointVersion) {
        throw IoError(IoError::Code::bad_version, path.string() + ": unsupported checkpoint version");
    }

    try {
        const auto& bb = j.at("backbone");
        model::BackboneConfig cfg;
        cfg.input_dim = bb.at("input_dim").get<int>();
        cfg.hidden_dims = bb.at("hidden_dims").get<std::vector<int>>();
        cfg.exit_after = bb.at("exit_after").get<std::vector<int>>();
        cfg.latent_dim = bb.at("latent_dim").get<int>();
        cfg.num_classes = bb.at("num_classes").get<int>();
        cfg.mode = model::latent_mode_from_string(bb.at("mode").get<std::string>());

        model::MultiExitModel m;
        m.config = cfg;
        m.curvature = geometry::Curvature(j.at("curvature").get<double>());
        m.layout = model::make_layout(cfg);
        m.params = j.at("params").get<std::vector<double>>();
        m.init_seed = j.at("init_seed").get<uint64_t>();
        m.spacelike_projections = j.value("spacelike_projections", 0);
        if (m.params.size() != m.layout.total) {
            throw IoError(IoError::Code::bad_payload,
                          path.string() + ": parameter count " + std::to_string(m.params.size()) +
                              " does not match layout (" + std::to_string(m.layout.total) + ")");
        }
        if (resolved_config_out && j.contains("config")) *resolved_config_out = j["config"];
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoError::Code::bad_payload,
                      path.string() + ": malformed checkpoint: " + e.what());
    }
}

} // namespace hypee::data_io
