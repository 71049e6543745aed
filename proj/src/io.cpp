#include "invlab/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace invlab {

using nlohmann::json;

namespace {

constexpr const char* traj_magic = "INVLAB-TRAJ v1";
constexpr const char* model_magic = "INVLAB-MODEL v1";

void write_f64_le(std::ostream& os, const double* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data),
                 static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &data[i], sizeof(double));
            for (std::size_t b = sizeof(double); b-- > 0;) {
                os.put(static_cast<char>(bytes[b]));
            }
        }
    }
}

void read_f64_le(const unsigned char* src, double* dst, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(dst, src, count * sizeof(double));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            unsigned char bytes[sizeof(double)];
            for (std::size_t b = 0; b < sizeof(double); ++b) {
                bytes[sizeof(double) - 1 - b] = src[i * sizeof(double) + b];
            }
            std::memcpy(&dst[i], bytes, sizeof(double));
        }
    }
}

struct FileBody {
    json header;
    std::vector<double> blob;
};

void write_file(const std::string& path, const char* magic, const json& header,
                const std::vector<double>& blob) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("io: cannot open '" + path + "' for writing");
    os << magic << "\n";
    os << header.dump() << "\n";
    os << "BLOB " << blob.size() * sizeof(double) << "\n";
    write_f64_le(os, blob.data(), blob.size());
    if (!os) throw std::runtime_error("io: write failed for '" + path + "'");
}

FileBody read_file(const std::string& path, const char* magic) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("io: cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(is, line) || line != magic) {
        throw std::runtime_error("io: '" + path + "' has wrong magic, expected '" +
                                 magic + "', got '" + line + "'");
    }
    if (!std::getline(is, line)) throw std::runtime_error("io: missing header line");
    FileBody body;
    try {
        body.header = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("io: malformed header json: ") + e.what());
    }
    if (!std::getline(is, line) || line.rfind("BLOB ", 0) != 0) {
        throw std::runtime_error("io: missing BLOB size line");
    }
    std::size_t expected_bytes = 0;
    try {
        expected_bytes = static_cast<std::size_t>(std::stoull(line.substr(5)));
    } catch (const std::exception&) {
        throw std::runtime_error("io: malformed BLOB size '" + line.substr(5) + "'");
    }
    if (expected_bytes % sizeof(double) != 0) {
        throw std::runtime_error("io: blob byte count " + std::to_string(expected_bytes) +
                                 " is not a multiple of 8");
    }
    std::vector<unsigned char> raw(expected_bytes);
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(expected_bytes));
    const auto got = static_cast<std::size_t>(is.gcount());
    if (got != expected_bytes) {
        throw std::runtime_error("io: truncated blob, expected " +
                                 std::to_string(expected_bytes) + " bytes, got " +
                                 std::to_string(got));
    }
    body.blob.resize(expected_bytes / sizeof(double));
    read_f64_le(raw.data(), body.blob.data(), body.blob.size());
    return body;
}

template <typename T>
T require(const json& header, const std::string& key) {
    if (!header.contains(key)) {
        throw std::runtime_error("io: header is missing field '" + key + "'");
    }
    try {
        return header.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::runtime_error("io: header field '" + key + "' has the wrong type");
    }
}

void check_blob_size(const std::vector<double>& blob, std::size_t expected) {
    if (blob.size() != expected) {
        throw std::runtime_error("io: blob holds " + std::to_string(blob.size()) +
                                 " doubles, expected " + std::to_string(expected));
    }
}

void check_schedule_hash(const json& header, const NoiseSchedule& schedule) {
    const auto stored = hex_to_hash(require<std::string>(header, "schedule_hash"));
    if (stored != schedule.hash()) {
        throw std::runtime_error("io: header field 'schedule_hash' (" +
                                 hash_to_hex(stored) + ") does not match the given schedule (" +
                                 hash_to_hex(schedule.hash()) + ")");
    }
}

}  // namespace

std::string hash_to_hex(std::uint64_t hash) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[hash & 0xf];
        hash >>= 4;
    }
    return out;
}

std::uint64_t hex_to_hash(const std::string& hex) {
    if (hex.size() != 16) throw std::runtime_error("io: hash must be 16 hex digits");
    std::uint64_t out = 0;
    for (char c : hex) {
        out <<= 4;
        if (c >= '0' && c <= '9') out |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') out |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw std::runtime_error("io: invalid hash digit");
    }
    return out;
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
    traj.validate();
    json header;
    header["dim"] = traj.dim;
    header["total_steps"] = traj.total_steps;
    header["direction"] = to_string(traj.direction);
    header["condition"] = traj.condition.id;
    header["guidance"] = traj.guidance;
    header["method"] = traj.method;
    header["schedule_hash"] = hash_to_hex(traj.schedule_hash);
    header["has_noise_record"] = !traj.noise_record.empty();
    json rounds = json::array(), calls = json::array();
    for (const auto& rec : traj.steps) {
        rounds.push_back(rec.rounds);
        calls.push_back(rec.predictor_calls);
    }
    header["rounds"] = std::move(rounds);
    header["predictor_calls"] = std::move(calls);

    std::vector<double> blob;
    const auto d = static_cast<std::size_t>(traj.dim);
    const auto t_steps = static_cast<std::size_t>(traj.total_steps);
    blob.reserve((t_steps + 1) * d + traj.noise_record.size() * d + 2 * t_steps);
    for (const auto& s : traj.states) blob.insert(blob.end(), s.begin(), s.end());
    for (const auto& e : traj.noise_record) blob.insert(blob.end(), e.begin(), e.end());
    for (const auto& rec : traj.steps) blob.push_back(rec.initial_residual);
    for (const auto& rec : traj.steps) blob.push_back(rec.final_residual);
    write_file(path, traj_magic, header, blob);
}

Trajectory load_trajectory(const std::string& path) {
    const FileBody body = read_file(path, traj_magic);
    Trajectory traj;
    traj.dim = require<int>(body.header, "dim");
    traj.total_steps = require<int>(body.header, "total_steps");
    traj.direction = direction_from_string(require<std::string>(body.header, "direction"));
    traj.condition.id = require<int>(body.header, "condition");
    traj.guidance = require<double>(body.header, "guidance");
    traj.method = require<std::string>(body.header, "method");
    traj.schedule_hash = hex_to_hash(require<std::string>(body.header, "schedule_hash"));
    const bool has_noise = require<bool>(body.header, "has_noise_record");
    const auto rounds = require<std::vector<int>>(body.header, "rounds");
    const auto calls = require<std::vector<long>>(body.header, "predictor_calls");

    if (traj.dim < 1 || traj.total_steps < 1) {
        throw std::runtime_error("io: header fields 'dim'/'total_steps' must be positive");
    }
    const auto d = static_cast<std::size_t>(traj.dim);
    const auto t_steps = static_cast<std::size_t>(traj.total_steps);
    if (rounds.size() != t_steps || calls.size() != t_steps) {
        throw std::runtime_error("io: header field 'rounds'/'predictor_calls' length "
                                 "disagrees with 'total_steps'");
    }
    check_blob_size(body.blob,
                    (t_steps + 1) * d + (has_noise ? t_steps * d : 0) + 2 * t_steps);

    std::size_t pos = 0;
    traj.states.resize(t_steps + 1);
    for (auto& s : traj.states) {
        s.assign(body.blob.begin() + static_cast<std::ptrdiff_t>(pos),
                 body.blob.begin() + static_cast<std::ptrdiff_t>(pos + d));
        pos += d;
    }
    if (has_noise) {
        traj.noise_record.resize(t_steps);
        for (auto& e : traj.noise_record) {
            e.assign(body.blob.begin() + static_cast<std::ptrdiff_t>(pos),
                     body.blob.begin() + static_cast<std::ptrdiff_t>(pos + d));
            pos += d;
        }
    }
    traj.steps.resize(t_steps);
    for (std::size_t i = 0; i < t_steps; ++i) {
        traj.steps[i].rounds = rounds[i];
        traj.steps[i].predictor_calls = calls[i];
        traj.steps[i].initial_residual = body.blob[pos + i];
        traj.steps[i].final_residual = body.blob[pos + t_steps + i];
    }
    traj.validate();
    return traj;
}

void save_model(const GaussianMixture& model, const std::string& path) {
    json header;
    header["kind"] = "gaussian_mixture";
    header["dim"] = model.dim();
    header["components"] = model.components().size();
    header["sigma0_sq"] = model.sigma0_sq();
    header["schedule_hash"] = hash_to_hex(model.schedule().hash());
    json labels = json::array();
    for (const auto& comp : model.components()) labels.push_back(comp.label);
    header["labels"] = std::move(labels);

    std::vector<double> blob;
    for (const auto& comp : model.components()) {
        blob.insert(blob.end(), comp.mean.begin(), comp.mean.end());
    }
    for (const auto& comp : model.components()) blob.push_back(comp.weight);
    write_file(path, model_magic, header, blob);
}

void save_model(const LinearModel& model, const std::string& path) {
    json header;
    header["kind"] = "linear";
    header["dim"] = model.dim();
    header["schedule_hash"] = hash_to_hex(model.schedule().hash());
    std::vector<double> blob = model.matrix();
    blob.insert(blob.end(), model.offset().begin(), model.offset().end());
    write_file(path, model_magic, header, blob);
}

void save_model(const MlpDenoiser& model, const std::string& path) {
    const auto& s = model.shape();
    json header;
    header["kind"] = "mlp";
    header["dim"] = s.dim;
    header["hidden"] = s.hidden;
    header["time_features"] = s.time_features;
    header["cond_features"] = s.cond_features;
    header["num_labels"] = s.num_labels;
    header["total_steps"] = s.total_steps;
    header["seed"] = std::to_string(model.record().seed);
    header["epochs"] = model.record().epochs;
    header["learning_rate"] = model.record().learning_rate;
    header["initial_loss"] = model.record().initial_loss;
    header["final_loss"] = model.record().final_loss;
    write_file(path, model_magic, header, model.params());
}

std::unique_ptr<EpsilonPredictor> load_model(const std::string& path,
                                             const NoiseSchedule& schedule) {
    const FileBody body = read_file(path, model_magic);
    const auto kind = require<std::string>(body.header, "kind");
    if (kind == "gaussian_mixture") {
        check_schedule_hash(body.header, schedule);
        const int dim = require<int>(body.header, "dim");
        const auto count = require<std::size_t>(body.header, "components");
        const auto labels = require<std::vector<int>>(body.header, "labels");
        const double sigma0_sq = require<double>(body.header, "sigma0_sq");
        if (labels.size() != count) {
            throw std::runtime_error("io: header field 'labels' length disagrees with "
                                     "'components'");
        }
        const auto d = static_cast<std::size_t>(dim);
        check_blob_size(body.blob, count * d + count);
        std::vector<GmComponent> comps(count);
        for (std::size_t k = 0; k < count; ++k) {
            comps[k].mean.assign(body.blob.begin() + static_cast<std::ptrdiff_t>(k * d),
                                 body.blob.begin() + static_cast<std::ptrdiff_t>((k + 1) * d));
            comps[k].weight = body.blob[count * d + k];
            comps[k].label = labels[k];
        }
        return std::make_unique<GaussianMixture>(std::move(comps), sigma0_sq, schedule);
    }
    if (kind == "linear") {
        check_schedule_hash(body.header, schedule);
        const int dim = require<int>(body.header, "dim");
        const auto d = static_cast<std::size_t>(dim);
        check_blob_size(body.blob, d * d + d);
        std::vector<double> matrix(body.blob.begin(),
                                   body.blob.begin() + static_cast<std::ptrdiff_t>(d * d));
        Vec offset(body.blob.begin() + static_cast<std::ptrdiff_t>(d * d), body.blob.end());
        return std::make_unique<LinearModel>(std::move(matrix), std::move(offset), schedule);
    }
    if (kind == "mlp") {
        MlpShape shape;
        shape.dim = require<int>(body.header, "dim");
        shape.hidden = require<int>(body.header, "hidden");
        shape.time_features = require<int>(body.header, "time_features");
        shape.cond_features = require<int>(body.header, "cond_features");
        shape.num_labels = require<int>(body.header, "num_labels");
        shape.total_steps = require<int>(body.header, "total_steps");
        MlpTrainingRecord record;
        record.seed = std::stoull(require<std::string>(body.header, "seed"));
        record.epochs = require<int>(body.header, "epochs");
        record.learning_rate = require<double>(body.header, "learning_rate");
        record.initial_loss = require<double>(body.header, "initial_loss");
        record.final_loss = require<double>(body.header, "final_loss");
        return std::make_unique<MlpDenoiser>(shape, body.blob, record);
    }
    throw std::runtime_error("io: unknown model kind '" + kind + "'");
}

}  // namespace invlab
