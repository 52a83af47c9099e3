#include "gazerep/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gazerep {

namespace {

uint32_t crc_table_entry(uint32_t i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
    return c;
}

const uint32_t* crc_table() {
    static uint32_t table[256];
    static bool ready = [] {
        for (uint32_t i = 0; i < 256; ++i) table[i] = crc_table_entry(i);
        return true;
    }();
    (void)ready;
    return table;
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
    buf.push_back(static_cast<uint8_t>(v));
    buf.push_back(static_cast<uint8_t>(v >> 8));
    buf.push_back(static_cast<uint8_t>(v >> 16));
    buf.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32(const std::vector<uint8_t>& buf, size_t& pos) {
    if (pos + 4 > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    uint32_t v = static_cast<uint32_t>(buf[pos]) | (static_cast<uint32_t>(buf[pos + 1]) << 8) |
                 (static_cast<uint32_t>(buf[pos + 2]) << 16) |
                 (static_cast<uint32_t>(buf[pos + 3]) << 24);
    pos += 4;
    return v;
}

} // namespace

uint32_t crc32(const void* data, size_t n, uint32_t crc) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    const uint32_t* table = crc_table();
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

void write_blob_file(const std::string& path, const char magic[4], uint32_t version,
                     const std::vector<uint8_t>& header, const std::vector<NamedBlob>& blobs) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), magic, magic + 4);
    put_u32(buf, version);
    put_u32(buf, static_cast<uint32_t>(header.size()));
    buf.insert(buf.end(), header.begin(), header.end());
    put_u32(buf, static_cast<uint32_t>(blobs.size()));
    for (const auto& blob : blobs) {
        put_u32(buf, static_cast<uint32_t>(blob.name.size()));
        buf.insert(buf.end(), blob.name.begin(), blob.name.end());
        put_u32(buf, static_cast<uint32_t>(blob.shape.size()));
        size_t numel = 1;
        for (int d : blob.shape) {
            put_u32(buf, static_cast<uint32_t>(d));
            numel *= static_cast<size_t>(d);
        }
        if (numel != blob.data.size())
            throw std::invalid_argument("checkpoint: blob " + blob.name + " shape/data mismatch");
        size_t at = buf.size();
        buf.resize(at + blob.data.size() * 4);
        std::memcpy(buf.data() + at, blob.data.data(), blob.data.size() * 4);
    }
    put_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<NamedBlob> read_blob_file(const std::string& path, const char magic[4],
                                      uint32_t expected_version, std::vector<uint8_t>* header_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw std::runtime_error("checkpoint: " + path + " is too short");

    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    uint32_t actual = crc32(buf.data(), buf.size() - 4);
    if (stored_crc != actual)
        throw std::runtime_error("checkpoint: CRC mismatch in " + path + " (file is corrupt)");

    size_t pos = 0;
    if (std::memcmp(buf.data(), magic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    pos = 4;
    uint32_t version = get_u32(buf, pos);
    if (version != expected_version)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path);
    uint32_t header_len = get_u32(buf, pos);
    if (pos + header_len > buf.size()) throw std::runtime_error("checkpoint: truncated header");
    if (header_out) header_out->assign(buf.begin() + static_cast<long>(pos),
                                       buf.begin() + static_cast<long>(pos + header_len));
    pos += header_len;

    uint32_t n_blobs = get_u32(buf, pos);
    std::vector<NamedBlob> blobs;
    blobs.reserve(n_blobs);
    for (uint32_t i = 0; i < n_blobs; ++i) {
        NamedBlob blob;
        uint32_t name_len = get_u32(buf, pos);
        if (pos + name_len > buf.size()) throw std::runtime_error("checkpoint: truncated name");
        blob.name.assign(reinterpret_cast<const char*>(buf.data() + pos), name_len);
        pos += name_len;
        uint32_t rank = get_u32(buf, pos);
        size_t numel = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            uint32_t d = get_u32(buf, pos);
            blob.shape.push_back(static_cast<int>(d));
            numel *= d;
        }
        if (pos + numel * 4 > buf.size()) throw std::runtime_error("checkpoint: truncated payload");
        blob.data.resize(numel);
        std::memcpy(blob.data.data(), buf.data() + pos, numel * 4);
        pos += numel * 4;
        blobs.push_back(std::move(blob));
    }
    return blobs;
}

} // namespace gazerep
