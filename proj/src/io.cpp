#include "lpsd/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "lpsd/errors.hpp"

namespace lpsd::io {

namespace {

constexpr char kDatasetMagic[4] = {'L', 'P', 'S', 'D'};
constexpr char kCheckpointMagic[4] = {'L', 'P', 'C', 'K'};
constexpr std::uint16_t kDatasetVersion = 1;
constexpr std::uint16_t kCheckpointVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path)
        : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw FormatError("cannot open '" + path + "' for writing");
    }

    void bytes(const void* p, std::size_t len) {
        out_.write(static_cast<const char*>(p),
                   static_cast<std::streamsize>(len));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) {
        const std::uint8_t b[2] = {static_cast<std::uint8_t>(v),
                                   static_cast<std::uint8_t>(v >> 8)};
        bytes(b, 2);
    }
    void u32(std::uint32_t v) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 8);
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void close() {
        out_.flush();
        if (!out_) throw FormatError("write to '" + path_ + "' failed");
        out_.close();
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("cannot open '" + path + "' for reading");
        std::ostringstream buf;
        buf << in.rdbuf();
        data_ = buf.str();
    }

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool exhausted() const { return pos_ == data_.size(); }

    void bytes(void* p, std::size_t len) {
        if (remaining() < len)
            throw FormatError("'" + path_ + "': truncated at byte offset " +
                              std::to_string(pos_) + " (need " +
                              std::to_string(len) + " bytes, have " +
                              std::to_string(remaining()) + ")");
        std::memcpy(p, data_.data() + pos_, len);
        pos_ += len;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint16_t u16() {
        std::uint8_t b[2];
        bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        std::uint8_t b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    std::uint64_t u64() {
        std::uint8_t b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void expect_magic(const char magic[4], const char* what) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, magic, 4) != 0)
            throw FormatError("'" + path_ + "': bad " + what +
                              " magic at byte offset 0");
    }

    void expect_done() {
        if (!exhausted())
            throw FormatError("'" + path_ + "': " +
                              std::to_string(remaining()) +
                              " trailing bytes at offset " +
                              std::to_string(pos_));
    }

    const std::string& path() const { return path_; }

private:
    std::string data_;
    std::size_t pos_ = 0;
    std::string path_;
};

void write_grid_f32(Writer& w, const Grid& g) {
    for (double v : g.v) w.f32(static_cast<float>(v));
}

Grid read_grid_f32(Reader& r, std::int64_t n, std::int64_t m) {
    Grid g(n, m);
    for (auto& v : g.v) v = static_cast<double>(r.f32());
    return g;
}

} // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    Writer w(path);
    w.bytes(kDatasetMagic, 4);
    w.u16(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(ds.records.size()));
    for (const auto& rec : ds.records) {
        w.u32(static_cast<std::uint32_t>(rec.x.n));
        w.u32(static_cast<std::uint32_t>(rec.x.m));
        w.f64(rec.snr_db ? *rec.snr_db
                         : std::numeric_limits<double>::quiet_NaN());
        w.f64(rec.mag);
        write_grid_f32(w, rec.x);
        write_grid_f32(w, rec.y);
    }
    w.close();
}

Dataset load_dataset(const std::string& path) {
    Reader r(path);
    r.expect_magic(kDatasetMagic, "dataset");
    const std::uint16_t version = r.u16();
    if (version != kDatasetVersion)
        throw FormatError("'" + path + "': unsupported dataset version " +
                          std::to_string(version));
    const std::uint32_t count = r.u32();
    Dataset ds;
    ds.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t n = r.u32();
        const std::uint32_t m = r.u32();
        if (n == 0 || m == 0)
            throw FormatError("'" + path + "': record " + std::to_string(i) +
                              " has empty dims at byte offset " +
                              std::to_string(r.offset() - 8));
        DatasetRecord rec;
        const double snr = r.f64();
        if (!std::isnan(snr)) rec.snr_db = snr;
        rec.mag = r.f64();
        if (!(rec.mag > 0.0))
            throw FormatError("'" + path + "': record " + std::to_string(i) +
                              " has non-positive mag at byte offset " +
                              std::to_string(r.offset() - 8));
        rec.x = read_grid_f32(r, n, m);
        rec.y = read_grid_f32(r, n, m);
        if (i > 0 && (!rec.x.same_shape(ds.records[0].x)))
            throw FormatError("'" + path + "': record " + std::to_string(i) +
                              " shape differs from record 0");
        ds.records.push_back(std::move(rec));
    }
    r.expect_done();
    return ds;
}

namespace {

void write_named_block(Writer& w, const std::string& name,
                       const nn::Tensor& t) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    const nn::Shape& s = t.shape();
    w.u8(static_cast<std::uint8_t>(s.rank));
    for (int i = 0; i < s.rank; ++i) w.u32(static_cast<std::uint32_t>(s[i]));
    for (double v : t.values()) w.f64(v);
}

} // namespace

void save_model(const model::UnrolledModel& m, const std::string& path,
                const OptimizerState* opt_state) {
    Writer w(path);
    w.bytes(kCheckpointMagic, 4);
    w.u16(kCheckpointVersion);
    const model::ModelConfig& cfg = m.config();
    w.u16(static_cast<std::uint16_t>(cfg.dims));
    w.u32(static_cast<std::uint32_t>(cfg.kappa));
    w.u32(static_cast<std::uint32_t>(cfg.hidden));
    w.u32(static_cast<std::uint32_t>(cfg.gn_groups));
    w.u8(cfg.gn_affine ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(cfg.unroll));
    w.f64(m.eta_raw().values()[0]);
    w.u8(opt_state ? 1 : 0);

    const auto params = m.cnn().named_parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) write_named_block(w, name, t);

    if (opt_state) {
        if (opt_state->first_moments.size() != params.size() + 1 ||
            opt_state->second_moments.size() != params.size() + 1)
            throw std::invalid_argument(
                "save_model: optimizer state must cover all parameters "
                "plus eta_raw");
        w.u64(static_cast<std::uint64_t>(opt_state->step_count));
        for (const auto& block : opt_state->first_moments)
            for (double v : block) w.f64(v);
        for (const auto& block : opt_state->second_moments)
            for (double v : block) w.f64(v);
    }
    w.close();
}

LoadedModel load_model(const std::string& path,
                       const std::optional<model::ModelConfig>& expect) {
    Reader r(path);
    r.expect_magic(kCheckpointMagic, "checkpoint");
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion)
        throw FormatError("'" + path + "': unsupported checkpoint version " +
                          std::to_string(version));

    model::ModelConfig cfg;
    cfg.dims = static_cast<int>(r.u16());
    cfg.kappa = r.u32();
    cfg.hidden = r.u32();
    cfg.gn_groups = r.u32();
    cfg.gn_affine = r.u8() != 0;
    cfg.unroll = r.u32();
    const double eta_raw = r.f64();
    const bool has_opt = r.u8() != 0;
    cfg.validate();

    if (expect) {
        auto mismatch = [&](const char* what, auto stored, auto wanted) {
            throw ConfigError("'" + path + "': checkpoint " + what + " = " +
                              std::to_string(stored) +
                              " conflicts with requested " +
                              std::to_string(wanted));
        };
        if (expect->kappa != cfg.kappa) mismatch("kappa", cfg.kappa, expect->kappa);
        if (expect->dims != cfg.dims) mismatch("dims", cfg.dims, expect->dims);
        if (expect->hidden != cfg.hidden)
            mismatch("hidden", cfg.hidden, expect->hidden);
        if (expect->unroll != cfg.unroll)
            mismatch("unroll", cfg.unroll, expect->unroll);
    }

    LoadedModel out{model::UnrolledModel::create(cfg, 0), std::nullopt};
    out.model.eta_raw().data()[0] = eta_raw;

    auto params = out.model.cnn().named_parameters();
    const std::uint32_t count = r.u32();
    if (count != params.size())
        throw FormatError("'" + path + "': checkpoint holds " +
                          std::to_string(count) + " parameter blocks, model needs " +
                          std::to_string(params.size()));
    for (auto& [name, t] : params) {
        const std::size_t name_off = r.offset();
        const std::uint16_t len = r.u16();
        std::string got(len, '\0');
        r.bytes(got.data(), len);
        if (got != name)
            throw FormatError("'" + path + "': expected parameter '" + name +
                              "', found '" + got + "' at byte offset " +
                              std::to_string(name_off));
        const std::uint8_t rank = r.u8();
        if (rank != t.shape().rank)
            throw FormatError("'" + path + "': parameter '" + name +
                              "' rank mismatch");
        for (int i = 0; i < t.shape().rank; ++i)
            if (static_cast<std::int64_t>(r.u32()) != t.shape()[i])
                throw FormatError("'" + path + "': parameter '" + name +
                                  "' shape mismatch");
        for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = r.f64();
    }

    if (has_opt) {
        OptimizerState st;
        st.step_count = static_cast<std::int64_t>(r.u64());
        auto read_blocks = [&](std::vector<std::vector<double>>& dst) {
            for (auto& [name, t] : params) {
                (void)name;
                std::vector<double> block(static_cast<std::size_t>(t.numel()));
                for (auto& v : block) v = r.f64();
                dst.push_back(std::move(block));
            }
            dst.emplace_back(1, r.f64()); // eta_raw moment
        };
        read_blocks(st.first_moments);
        read_blocks(st.second_moments);
        out.opt_state = std::move(st);
    }
    r.expect_done();
    return out;
}

void write_csv(const CsvTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < table.header.size(); ++i)
        out << (i ? "," : "") << table.header[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << '\n';
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw FormatError("'" + path + "': empty CSV");
    return table;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace lpsd::io
