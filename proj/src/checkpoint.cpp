// SPDX-License-Identifier: Apache-2.0

#include "llast/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "llast/error.hpp"

namespace llast {

namespace {

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    uint32_t u32() {
        if (pos_ + 4 > buf_.size()) throw IntegrityError(path_ + ": truncated checkpoint");
        uint32_t v = 0;
        std::memcpy(&v, buf_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }

    std::string bytes(size_t n) {
        if (pos_ + n > buf_.size()) throw IntegrityError(path_ + ": truncated checkpoint");
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void floats(float* dst, size_t n) {
        if (pos_ + 4 * n > buf_.size()) throw IntegrityError(path_ + ": truncated checkpoint");
        std::memcpy(dst, buf_.data() + pos_, 4 * n);
        pos_ += 4 * n;
    }

    bool done() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::string path_;
    size_t pos_ = 0;
};

}  // namespace

void write_checkpoint_file(const std::string& path, const CheckpointFile& ck) {
    std::string payload;
    put_u32(payload, static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& t : ck.tensors) {
        put_u32(payload, static_cast<uint32_t>(t.name.size()));
        payload += t.name;
        put_u32(payload, static_cast<uint32_t>(t.shape.size()));
        for (int64_t d : t.shape) put_u32(payload, static_cast<uint32_t>(d));
        size_t off = payload.size();
        payload.resize(off + 4 * t.data.size());
        std::memcpy(payload.data() + off, t.data.data(), 4 * t.data.size());
    }
    put_u32(payload, static_cast<uint32_t>(ck.blocks.size()));
    for (const auto& [name, body] : ck.blocks) {
        put_u32(payload, static_cast<uint32_t>(name.size()));
        payload += name;
        put_u32(payload, static_cast<uint32_t>(body.size()));
        payload += body;
    }

    uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    std::string header = "LLST";
    put_u32(header, ck.version);
    put_u32(header, crc);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed: " + path);
}

CheckpointFile read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || buf.compare(0, 4, "LLST") != 0) {
        throw IntegrityError(path + ": not a LLST checkpoint");
    }
    uint32_t version = 0, crc_stored = 0;
    std::memcpy(&version, buf.data() + 4, 4);
    std::memcpy(&crc_stored, buf.data() + 8, 4);
    if (version != kCheckpointVersion) {
        throw IntegrityError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    std::string payload = buf.substr(12);
    uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    if (crc != crc_stored) throw IntegrityError(path + ": checksum mismatch, file is corrupt");

    Reader r(payload, path);
    CheckpointFile ck;
    ck.version = version;
    uint32_t n_tensors = r.u32();
    ck.tensors.resize(n_tensors);
    for (uint32_t i = 0; i < n_tensors; ++i) {
        NamedTensor& t = ck.tensors[i];
        t.name = r.bytes(r.u32());
        uint32_t rank = r.u32();
        int64_t numel = 1;
        t.shape.resize(rank);
        for (uint32_t d = 0; d < rank; ++d) {
            t.shape[d] = static_cast<int64_t>(r.u32());
            numel *= t.shape[d];
        }
        t.data.resize(static_cast<size_t>(numel));
        r.floats(t.data.data(), static_cast<size_t>(numel));
    }
    uint32_t n_blocks = r.u32();
    for (uint32_t i = 0; i < n_blocks; ++i) {
        std::string name = r.bytes(r.u32());
        std::string body = r.bytes(r.u32());
        ck.blocks.emplace_back(std::move(name), std::move(body));
    }
    if (!r.done()) throw IntegrityError(path + ": trailing bytes after checkpoint payload");
    return ck;
}

std::map<std::string, std::string> parse_kv_block(const std::string& body) {
    std::map<std::string, std::string> kv;
    size_t start = 0;
    while (start < body.size()) {
        size_t end = body.find('\n', start);
        if (end == std::string::npos) end = body.size();
        std::string line = body.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw IntegrityError("config block line without '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::string format_kv_block(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

}  // namespace llast
