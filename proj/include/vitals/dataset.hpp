#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vitals/error.hpp"
#include "vitals/hash.hpp"
#include "vitals/ingest.hpp"
#include "vitals/model_io.hpp"
#include "vitals/preprocess.hpp"

namespace vitals {

struct SessionChunks {
    SessionMeta meta;
    std::vector<PreparedChunk> chunks; // ordered by start_index
};

struct PreparedDataset {
    std::vector<SessionChunks> sessions;

    std::vector<SessionMeta> metas() const {
        std::vector<SessionMeta> out;
        out.reserve(sessions.size());
        for (const auto& s : sessions) out.push_back(s.meta);
        return out;
    }
};

struct ChunkingParams {
    std::size_t chunk_len = 128;
    std::size_t stride = 128;
    std::int64_t sync_tolerance_ms = 25;
};

inline SessionChunks prepare_session(const SynchronizedSession& session,
                                     const ChunkingParams& chunking,
                                     const PreprocessParams& preprocess) {
    SessionChunks out;
    out.meta = session.meta;
    for (const Chunk& chunk : chunk_session(session, chunking.chunk_len, chunking.stride))
        out.chunks.push_back(prepare_chunk(chunk, preprocess));
    return out;
}

inline SessionChunks prepare_session_dir(const std::filesystem::path& session_dir,
                                         const ChunkingParams& chunking,
                                         const PreprocessParams& preprocess) {
    SynchronizedSession session = load_session(session_dir, chunking.sync_tolerance_ms);
    return prepare_session(session, chunking, preprocess);
}

// Loads and preprocesses every session under `root`. Sessions that fail are
// reported through `failures` (path -> message) and skipped.
inline PreparedDataset prepare_dataset(const std::filesystem::path& root,
                                       const ChunkingParams& chunking,
                                       const PreprocessParams& preprocess,
                                       std::vector<std::pair<std::string, std::string>>* failures =
                                           nullptr) {
    PreparedDataset out;
    for (const auto& dir : list_session_dirs(root)) {
        try {
            out.sessions.push_back(prepare_session_dir(dir, chunking, preprocess));
        } catch (const Error& e) {
            if (failures == nullptr) throw;
            failures->emplace_back(dir.string(), e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chunk cache
// ---------------------------------------------------------------------------
//
// One binary file per session (f32 clips), plus a manifest recording a
// content hash of (raw session bytes, preprocess parameters) so reruns can
// skip unchanged sessions.

inline constexpr char kChunkCacheMagic[8] = {'V', 'C', 'H', 'U', 'N', 'K', '0', '1'};

inline std::string preprocess_canonical_string(const ChunkingParams& chunking,
                                               const PreprocessParams& p) {
    std::string s = "chunk_len=" + std::to_string(chunking.chunk_len) +
                    ";stride=" + std::to_string(chunking.stride) +
                    ";tolerance_ms=" + std::to_string(chunking.sync_tolerance_ms) +
                    ";input_size=" + std::to_string(p.input_size) + ";face_roi=";
    if (p.face_roi_auto) {
        s += "auto:" + format_double(p.face_roi_fraction);
    } else {
        s += std::to_string(p.face_roi.x) + "," + std::to_string(p.face_roi.y) + "," +
             std::to_string(p.face_roi.w) + "," + std::to_string(p.face_roi.h);
    }
    s += ";finger_roi=";
    if (p.finger_full_frame) {
        s += "full";
    } else {
        s += std::to_string(p.finger_roi.x) + "," + std::to_string(p.finger_roi.y) + "," +
             std::to_string(p.finger_roi.w) + "," + std::to_string(p.finger_roi.h);
    }
    return s;
}

// Content hash over every regular file in the session directory (sorted
// relative paths, names and bytes) plus the preprocess parameter string.
inline std::uint64_t session_content_hash(const std::filesystem::path& session_dir,
                                          const std::string& params_string) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(session_dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    Fnv1a h;
    h.update(params_string);
    std::vector<char> buf(1 << 16);
    for (const auto& f : files) {
        h.update(fs::relative(f, session_dir).generic_string());
        std::ifstream in(f, std::ios::binary);
        require(in.good(), ErrorKind::Io, "cannot read " + f.string());
        while (in) {
            in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
            h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
        }
    }
    return h.digest();
}

inline void write_session_cache(const SessionChunks& session, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    bio::write_bytes(os, kChunkCacheMagic, sizeof(kChunkCacheMagic));
    bio::write_string(os, session.meta.subject_id);
    bio::write_string(os, to_string(session.meta.state));
    bio::write_pod<double>(os, session.meta.duration_s);
    bio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(session.chunks.size()));
    for (const PreparedChunk& c : session.chunks) {
        bio::write_pod<std::uint64_t>(os, c.frames);
        bio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.size));
        bio::write_pod<std::uint64_t>(os, c.start_index);
        bio::write_pod<double>(os, c.spo2_y);
        bio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.bvp_y.size()));
        bio::write_bytes(os, c.bvp_y.data(), c.bvp_y.size() * sizeof(double));
        bio::write_pod<std::uint64_t>(os, c.face_x.size());
        bio::write_bytes(os, c.face_x.data(), c.face_x.size() * sizeof(float));
        bio::write_pod<std::uint64_t>(os, c.finger_x.size());
        bio::write_bytes(os, c.finger_x.data(), c.finger_x.size() * sizeof(float));
    }
    os.flush();
    require(os.good(), ErrorKind::Io, "write failed for " + path.string());
}

inline SessionChunks read_session_cache(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), ErrorKind::Format, "cannot open cache file " + path.string());
    char magic[8];
    bio::read_bytes(is, magic, sizeof(magic), "cache magic");
    require(std::memcmp(magic, kChunkCacheMagic, sizeof(magic)) == 0, ErrorKind::Format,
            "not a chunk cache file");
    SessionChunks out;
    out.meta.subject_id = bio::read_string(is, "subject");
    out.meta.state = protocol_state_from_string(bio::read_string(is, "state"));
    out.meta.duration_s = bio::read_pod<double>(is, "duration");
    const auto n = bio::read_pod<std::uint32_t>(is, "chunk count");
    for (std::uint32_t i = 0; i < n; ++i) {
        PreparedChunk c;
        c.frames = bio::read_pod<std::uint64_t>(is, "frames");
        c.size = static_cast<int>(bio::read_pod<std::uint32_t>(is, "size"));
        c.start_index = bio::read_pod<std::uint64_t>(is, "start index");
        c.spo2_y = bio::read_pod<double>(is, "spo2 label");
        const auto nb = bio::read_pod<std::uint32_t>(is, "bvp length");
        c.bvp_y.resize(nb);
        bio::read_bytes(is, c.bvp_y.data(), nb * sizeof(double), "bvp label");
        const auto nf = bio::read_pod<std::uint64_t>(is, "face size");
        c.face_x.resize(nf);
        bio::read_bytes(is, c.face_x.data(), nf * sizeof(float), "face clip");
        const auto ng = bio::read_pod<std::uint64_t>(is, "finger size");
        c.finger_x.resize(ng);
        bio::read_bytes(is, c.finger_x.data(), ng * sizeof(float), "finger clip");
        c.meta = out.meta;
        out.chunks.push_back(std::move(c));
    }
    return out;
}

} // namespace vitals
