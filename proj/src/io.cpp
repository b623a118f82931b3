#include "hsk/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include "hsk/error.hpp"

namespace hsk {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file readers assume a little-endian host");
static_assert(sizeof(float) == 4 && sizeof(double) == 8);

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

void write_u16(std::ostream& os, std::uint16_t v) {
    os.write(reinterpret_cast<const char*>(&v), 2);
}

void write_f32(std::ostream& os, float v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}

void write_cstr(std::ostream& os, const std::string& s) {
    if (s.find('\0') != std::string::npos)
        throw Error("sample id contains a NUL byte: '" + s + "'");
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
    os.put('\0');
}

class Reader {
public:
    Reader(const std::filesystem::path& path, const char* magic) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open file '" + path_ + "'");
        in.seekg(0, std::ios::end);
        data_.resize(static_cast<std::size_t>(in.tellg()));
        in.seekg(0);
        in.read(data_.data(), static_cast<std::streamsize>(data_.size()));
        if (!in) throw IoError("cannot read file '" + path_ + "'");
        if (data_.size() < 4 || std::memcmp(data_.data(), magic, 4) != 0)
            throw IoError("'" + path_ + "': malformed header, expected magic " +
                          std::string(magic, 4));
        pos_ = 4;
    }

    std::uint32_t u32() {
        need(4, "integer field");
        std::uint32_t v;
        std::memcpy(&v, data_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }

    std::uint16_t u16() {
        need(2, "integer field");
        std::uint16_t v;
        std::memcpy(&v, data_.data() + pos_, 2);
        pos_ += 2;
        return v;
    }

    void f32_block(std::size_t count, std::vector<double>& out) {
        need(count * 4, "float payload");
        out.resize(count);
        const char* p = data_.data() + pos_;
        for (std::size_t i = 0; i < count; ++i) {
            float v;
            std::memcpy(&v, p + i * 4, 4);
            out[i] = static_cast<double>(v);
        }
        pos_ += count * 4;
    }

    void f64_block(std::size_t count, std::vector<double>& out) {
        need(count * 8, "float payload");
        out.resize(count);
        std::memcpy(out.data(), data_.data() + pos_, count * 8);
        pos_ += count * 8;
    }

    void u16_block(std::size_t count, std::vector<std::uint16_t>& out) {
        need(count * 2, "label payload");
        out.resize(count);
        std::memcpy(out.data(), data_.data() + pos_, count * 2);
        pos_ += count * 2;
    }

    void u32_block(std::size_t count, std::vector<std::uint32_t>& out) {
        need(count * 4, "label payload");
        out.resize(count);
        std::memcpy(out.data(), data_.data() + pos_, count * 4);
        pos_ += count * 4;
    }

    std::string cstr() {
        const auto end = std::find(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                   data_.end(), '\0');
        if (end == data_.end())
            throw IoError("'" + path_ + "': unterminated sample id");
        std::string s(data_.begin() + static_cast<std::ptrdiff_t>(pos_), end);
        pos_ = static_cast<std::size_t>(end - data_.begin()) + 1;
        return s;
    }

    void expect_end() const {
        if (pos_ != data_.size())
            throw IoError("'" + path_ + "': payload size mismatch (" +
                          std::to_string(data_.size() - pos_) + " trailing bytes)");
    }

    const std::string& path() const { return path_; }

private:
    void need(std::size_t bytes, const char* what) {
        if (data_.size() - pos_ < bytes)
            throw IoError("'" + path_ + "': payload size mismatch (truncated " +
                          std::string(what) + ")");
    }

    std::string path_;
    std::string data_;
    std::size_t pos_ = 0;
};

void check_finite(const std::vector<double>& values, const std::string& path) {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw IoError("'" + path + "': non-finite value at index " + std::to_string(i));
}

} // namespace

void HyperCube::validate() const {
    if (rows < 1 || cols < 1 || bands < 1)
        throw Error("cube dimensions must all be >= 1");
    if (values.size() != rows * cols * bands)
        throw Error("cube payload size mismatch: expected " +
                    std::to_string(rows * cols * bands) + " values, have " +
                    std::to_string(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw Error("non-finite value at index " + std::to_string(i));
}

void LabelRaster::validate() const {
    if (rows < 1 || cols < 1) throw Error("raster dimensions must be >= 1");
    if (labels.size() != rows * cols)
        throw Error("raster payload size mismatch: expected " + std::to_string(rows * cols) +
                    " labels, have " + std::to_string(labels.size()));
}

void SequenceSet::validate() const {
    if (sequences.size() != ids.size() || sequences.size() != labels.size())
        throw Error("sequence set fields have inconsistent sizes");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const auto& s = sequences[i];
        if (s.dim != dim)
            throw Error("sequence '" + ids[i] + "' has dimension " + std::to_string(s.dim) +
                        ", set dimension is " + std::to_string(dim));
        if (s.length() < 1) throw Error("sequence '" + ids[i] + "' is empty");
        if (s.values.size() != s.length() * s.dim)
            throw Error("sequence '" + ids[i] + "' payload size mismatch");
        for (double v : s.values)
            if (!std::isfinite(v))
                throw Error("sequence '" + ids[i] + "' contains a non-finite value");
        if (!seen.insert(ids[i]).second)
            throw Error("duplicate sample id '" + ids[i] + "'");
    }
}

void GramMatrix::validate() const {
    if (entries.size() != rows * cols) throw Error("gram payload size mismatch");
    if (row_ids.size() != rows || col_ids.size() != cols)
        throw Error("gram id list size mismatch");
    for (double v : entries)
        if (!std::isfinite(v)) throw Error("gram matrix contains a non-finite value");
    if (self()) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = i + 1; j < cols; ++j) {
                const double a = at(i, j), b = at(j, i);
                if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
                    throw Error("gram matrix is not symmetric at (" + std::to_string(i) +
                                ", " + std::to_string(j) + ")");
            }
    }
}

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open file '" + tmp.string() + "' for writing");
        writer(out);
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
}

HyperCube read_cube(const std::filesystem::path& path) {
    Reader r(path, "HSC1");
    HyperCube cube;
    cube.rows = r.u32();
    cube.cols = r.u32();
    cube.bands = r.u32();
    if (cube.rows < 1 || cube.cols < 1 || cube.bands < 1)
        throw IoError("'" + r.path() + "': malformed header, zero dimension");
    r.f32_block(cube.rows * cube.cols * cube.bands, cube.values);
    r.expect_end();
    check_finite(cube.values, r.path());
    return cube;
}

void write_cube(const HyperCube& cube, const std::filesystem::path& path) {
    cube.validate();
    for (double v : cube.values)
        if (std::abs(v) > double(std::numeric_limits<float>::max()))
            throw Error("cube value exceeds 32-bit float range");
    atomic_write(path, [&](std::ostream& os) {
        os.write("HSC1", 4);
        write_u32(os, static_cast<std::uint32_t>(cube.rows));
        write_u32(os, static_cast<std::uint32_t>(cube.cols));
        write_u32(os, static_cast<std::uint32_t>(cube.bands));
        for (double v : cube.values) write_f32(os, static_cast<float>(v));
    });
}

LabelRaster read_labels(const std::filesystem::path& path) {
    Reader r(path, "HSL1");
    LabelRaster raster;
    raster.rows = r.u32();
    raster.cols = r.u32();
    if (raster.rows < 1 || raster.cols < 1)
        throw IoError("'" + r.path() + "': malformed header, zero dimension");
    r.u16_block(raster.rows * raster.cols, raster.labels);
    r.expect_end();
    return raster;
}

void write_labels(const LabelRaster& raster, const std::filesystem::path& path) {
    raster.validate();
    atomic_write(path, [&](std::ostream& os) {
        os.write("HSL1", 4);
        write_u32(os, static_cast<std::uint32_t>(raster.rows));
        write_u32(os, static_cast<std::uint32_t>(raster.cols));
        for (std::uint16_t v : raster.labels) write_u16(os, v);
    });
}

LevelMap read_level_map(const std::filesystem::path& path) {
    Reader r(path, "HSH1");
    LevelMap map;
    map.rows = r.u32();
    map.cols = r.u32();
    if (map.rows < 1 || map.cols < 1)
        throw IoError("'" + r.path() + "': malformed header, zero dimension");
    r.u32_block(map.rows * map.cols, map.regions);
    r.expect_end();
    return map;
}

void write_level_map(const LevelMap& map, const std::filesystem::path& path) {
    if (map.regions.size() != map.rows * map.cols)
        throw Error("level map payload size mismatch");
    atomic_write(path, [&](std::ostream& os) {
        os.write("HSH1", 4);
        write_u32(os, static_cast<std::uint32_t>(map.rows));
        write_u32(os, static_cast<std::uint32_t>(map.cols));
        os.write(reinterpret_cast<const char*>(map.regions.data()),
                 static_cast<std::streamsize>(map.regions.size() * 4));
    });
}

GramMatrix read_gram(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open file '" + path.string() + "'");
    char magic[4] = {};
    probe.read(magic, 4);
    probe.close();

    GramMatrix g;
    if (std::memcmp(magic, "HSG1", 4) == 0) {
        Reader r(path, "HSG1");
        const std::size_t n = r.u32();
        g.rows = g.cols = n;
        r.f64_block(n * n, g.entries);
        g.row_ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) g.row_ids.push_back(r.cstr());
        g.col_ids = g.row_ids;
        r.expect_end();
    } else {
        Reader r(path, "HSR1");
        g.rows = r.u32();
        g.cols = r.u32();
        r.f64_block(g.rows * g.cols, g.entries);
        g.row_ids.reserve(g.rows);
        for (std::size_t i = 0; i < g.rows; ++i) g.row_ids.push_back(r.cstr());
        g.col_ids.reserve(g.cols);
        for (std::size_t j = 0; j < g.cols; ++j) g.col_ids.push_back(r.cstr());
        r.expect_end();
    }
    g.validate();
    return g;
}

void write_gram(const GramMatrix& gram, const std::filesystem::path& path) {
    gram.validate();
    atomic_write(path, [&](std::ostream& os) {
        if (gram.self()) {
            os.write("HSG1", 4);
            write_u32(os, static_cast<std::uint32_t>(gram.rows));
            for (double v : gram.entries) write_f64(os, v);
            for (const auto& id : gram.row_ids) write_cstr(os, id);
        } else {
            os.write("HSR1", 4);
            write_u32(os, static_cast<std::uint32_t>(gram.rows));
            write_u32(os, static_cast<std::uint32_t>(gram.cols));
            for (double v : gram.entries) write_f64(os, v);
            for (const auto& id : gram.row_ids) write_cstr(os, id);
            for (const auto& id : gram.col_ids) write_cstr(os, id);
        }
    });
}

SequenceSet read_sequences(const std::filesystem::path& path) {
    Reader r(path, "HSQ1");
    SequenceSet set;
    const std::size_t count = r.u32();
    set.sequences.reserve(count);
    set.ids.reserve(count);
    set.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t length = r.u32();
        const std::size_t dim = r.u32();
        if (length < 1 || dim < 1)
            throw IoError("'" + r.path() + "': sequence " + std::to_string(i) +
                          " has zero length or dimension");
        std::string id = r.cstr();
        const std::uint16_t label = r.u16();
        FeatureSequence seq;
        seq.dim = dim;
        r.f32_block(length * dim, seq.values);
        if (i == 0) set.dim = dim;
        set.sequences.push_back(std::move(seq));
        set.ids.push_back(std::move(id));
        set.labels.push_back(label);
    }
    r.expect_end();
    set.validate();
    return set;
}

void write_sequences(const SequenceSet& set, const std::filesystem::path& path) {
    set.validate();
    atomic_write(path, [&](std::ostream& os) {
        os.write("HSQ1", 4);
        write_u32(os, static_cast<std::uint32_t>(set.size()));
        for (std::size_t i = 0; i < set.size(); ++i) {
            const auto& s = set.sequences[i];
            write_u32(os, static_cast<std::uint32_t>(s.length()));
            write_u32(os, static_cast<std::uint32_t>(s.dim));
            write_cstr(os, set.ids[i]);
            write_u16(os, set.labels[i]);
            for (double v : s.values) write_f32(os, static_cast<float>(v));
        }
    });
}

} // namespace hsk
