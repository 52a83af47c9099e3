#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gazerep {

// little-endian binary container: magic, version u32, header blob, record
// count u32, records (name_len u32, name, rank u32, dims u32..., f32
// payload), trailing CRC32 of every preceding byte
struct NamedBlob {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

uint32_t crc32(const void* data, size_t n, uint32_t crc = 0);

void write_blob_file(const std::string& path, const char magic[4], uint32_t version,
                     const std::vector<uint8_t>& header, const std::vector<NamedBlob>& blobs);

// throws on missing file, wrong magic/version, or CRC mismatch
std::vector<NamedBlob> read_blob_file(const std::string& path, const char magic[4],
                                      uint32_t expected_version, std::vector<uint8_t>* header_out);

} // namespace gazerep
