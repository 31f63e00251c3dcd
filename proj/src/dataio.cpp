#include "sumgraph/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sumgraph/byte_io.hpp"
#include "sumgraph/errors.hpp"
#include "sumgraph/random.hpp"

namespace sumgraph {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFeatureMagic = "SGFT";
constexpr std::uint16_t kFeatureVersion = 1;
constexpr std::size_t kFeatureHeaderBytes = 4 + 2 + 4 + 4;
constexpr std::string_view kManifestHeader = "sumgraph-dataset 1";
constexpr std::string_view kAnnotationHeader = "sumgraph-annotation 1";

std::string format_real(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T parse_number(std::string_view tok, std::size_t line_no) {
  T v{};
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string> read_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

bool skippable(std::string_view line) {
  const auto t = tokens(line);
  return t.empty() || t.front().front() == '#';
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

void VideoRecord::validate() const {
  const std::size_t t = frames();
  if (labels && labels->frames() != t) {
    throw DataError(id + ": " + std::to_string(labels->frames()) + " labels for " +
                    std::to_string(t) + " frames");
  }
  if (users) {
    for (std::size_t u = 0; u < users->users(); ++u) {
      if (users->scores[u].size() != t) {
        throw DataError(id + ": user " + std::to_string(u) + " has " +
                        std::to_string(users->scores[u].size()) + " scores for " +
                        std::to_string(t) + " frames");
      }
    }
  }
  if (segments && segments->frames() != t) {
    throw DataError(id + ": segments cover " + std::to_string(segments->frames()) + " frames, video has " +
                    std::to_string(t));
  }
}

// ---------------------------------------------------------------------------
// Features

std::vector<std::uint8_t> encode_features(const FeatureMatrix& x) {
  ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u16(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(x.frames()));
  w.u32(static_cast<std::uint32_t>(x.dims()));
  for (double v : x.values().data()) w.f32(static_cast<float>(v));
  return w.take();
}

FeatureMatrix decode_features(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "feature file");
  if (r.bytes(kFeatureMagic.size()) != kFeatureMagic) r.fail("bad magic at byte offset 0");
  const std::uint16_t version = r.u16();
  if (version != kFeatureVersion) {
    r.fail("unsupported version " + std::to_string(version) + " at byte offset 4");
  }
  const std::uint32_t t = r.u32();
  const std::uint32_t d = r.u32();
  const std::size_t payload = std::size_t{4} * t * d;
  if (r.remaining() < payload) {
    r.fail("truncated at byte offset " + std::to_string(kFeatureHeaderBytes + r.remaining()) +
           ", expected " + std::to_string(kFeatureHeaderBytes + payload) + " bytes for " +
           std::to_string(t) + "x" + std::to_string(d) + " features");
  }
  if (r.remaining() > payload) {
    r.fail("trailing data after byte offset " + std::to_string(kFeatureHeaderBytes + payload));
  }
  Matrix m(t, d);
  for (double& v : m.data()) v = static_cast<double>(r.f32());
  try {
    return FeatureMatrix(std::move(m));
  } catch (const DegenerateInputError& e) {
    throw DataError(std::string("feature file: ") + e.what());
  }
}

void save_features(const fs::path& path, const FeatureMatrix& x) {
  write_file_bytes(path, encode_features(x));
}

FeatureMatrix load_features(const fs::path& path) {
  try {
    return decode_features(read_file_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Annotations

std::string encode_annotations(const VideoRecord& v) {
  std::string out(kAnnotationHeader);
  out += "\nframes " + std::to_string(v.frames()) + "\n";
  if (v.labels) {
    out += "labels";
    for (bool b : v.labels->labels()) out += b ? " 1" : " 0";
    out += "\n";
  }
  if (v.segments) {
    out += "segments";
    for (const Segment& s : v.segments->segments()) {
      out += " " + std::to_string(s.start) + " " + std::to_string(s.end);
    }
    out += "\n";
  }
  if (v.users) {
    for (const auto& user : v.users->scores) {
      out += "user";
      for (double x : user) out += " " + format_real(x);
      out += "\n";
    }
  }
  return out;
}

Annotations decode_annotations(const std::string& text) {
  const auto lines = read_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && skippable(lines[i])) ++i;
  if (i == lines.size() || tokens(lines[i]) != tokens(kAnnotationHeader)) {
    throw DataError("missing '" + std::string(kAnnotationHeader) + "' header");
  }
  Annotations a;
  bool have_frames = false;
  std::optional<std::vector<Segment>> segs;
  for (++i; i < lines.size(); ++i) {
    if (skippable(lines[i])) continue;
    const std::size_t line_no = i + 1;
    const auto tok = tokens(lines[i]);
    const std::string_view key = tok.front();
    const std::span<const std::string_view> args(tok.data() + 1, tok.size() - 1);
    if (key == "frames") {
      if (args.size() != 1) throw DataError("line " + std::to_string(line_no) + ": frames takes one value");
      a.frames = parse_number<std::size_t>(args[0], line_no);
      have_frames = true;
    } else if (key == "labels") {
      Mask m;
      for (auto t : args) {
        const int v = parse_number<int>(t, line_no);
        if (v != 0 && v != 1) throw DataError("line " + std::to_string(line_no) + ": label must be 0 or 1");
        m.push_back(v == 1);
      }
      a.labels = GroundTruth(std::move(m));
    } else if (key == "segments") {
      if (args.size() % 2 != 0) {
        throw DataError("line " + std::to_string(line_no) + ": segments need start/end pairs");
      }
      segs.emplace();
      for (std::size_t k = 0; k < args.size(); k += 2) {
        segs->push_back({parse_number<std::size_t>(args[k], line_no),
                         parse_number<std::size_t>(args[k + 1], line_no)});
      }
    } else if (key == "user") {
      std::vector<double> scores;
      for (auto t : args) {
        const double v = parse_number<double>(t, line_no);
        if (!std::isfinite(v)) throw DataError("line " + std::to_string(line_no) + ": non-finite score");
        scores.push_back(v);
      }
      if (!a.users) a.users.emplace();
      a.users->scores.push_back(std::move(scores));
    } else {
      throw DataError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_frames) throw DataError("missing 'frames' line");
  if (a.labels && a.labels->frames() != a.frames) {
    throw DataError("labels has " + std::to_string(a.labels->frames()) + " values, expected " +
                    std::to_string(a.frames));
  }
  if (a.users) {
    for (std::size_t u = 0; u < a.users->users(); ++u) {
      if (a.users->scores[u].size() != a.frames) {
        throw DataError("user " + std::to_string(u) + " has " +
                        std::to_string(a.users->scores[u].size()) + " scores, expected " +
                        std::to_string(a.frames));
      }
    }
  }
  if (segs) a.segments = SegmentList(std::move(*segs), a.frames);
  return a;
}

// ---------------------------------------------------------------------------
// Datasets

void save_dataset(const fs::path& dir, std::span<const VideoRecord> videos) {
  fs::create_directories(dir);
  std::string manifest(kManifestHeader);
  manifest += "\n";
  for (const VideoRecord& v : videos) {
    v.validate();
    manifest += v.id + "\n";
    save_features(dir / (v.id + ".sgft"), v.features);
    if (v.labels || v.users || v.segments) write_text(dir / (v.id + ".ann"), encode_annotations(v));
  }
  write_text(dir / "manifest.txt", manifest);
}

std::vector<VideoRecord> load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.txt";
  if (!fs::exists(manifest_path)) throw DataError(manifest_path.string() + ": manifest not found");
  const auto lines = read_lines(read_text(manifest_path));
  std::size_t i = 0;
  while (i < lines.size() && skippable(lines[i])) ++i;
  if (i == lines.size() || tokens(lines[i]) != tokens(kManifestHeader)) {
    throw DataError(manifest_path.string() + ": missing '" + std::string(kManifestHeader) + "' header");
  }

  std::vector<VideoRecord> videos;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (++i; i < lines.size(); ++i) {
    if (skippable(lines[i])) continue;
    const auto tok = tokens(lines[i]);
    if (tok.size() != 1) {
      problems.push_back(manifest_path.string() + ": line " + std::to_string(i + 1) +
                         ": expected a single video id");
      continue;
    }
    const std::string id(tok.front());
    if (!seen.insert(id).second) {
      problems.push_back(manifest_path.string() + ": duplicate id '" + id + "'");
      continue;
    }
    const fs::path feat_path = dir / (id + ".sgft");
    const fs::path ann_path = dir / (id + ".ann");
    if (!fs::exists(feat_path)) {
      problems.push_back("video '" + id + "': missing feature file " + feat_path.string());
      continue;
    }
    try {
      VideoRecord v{id, load_features(feat_path), {}, {}, {}};
      if (fs::exists(ann_path)) {
        Annotations a;
        try {
          a = decode_annotations(read_text(ann_path));
        } catch (const Error& e) {
          throw DataError(ann_path.string() + ": " + e.what());
        }
        if (a.frames != v.frames()) {
          throw DataError(ann_path.string() + ": declares " + std::to_string(a.frames) +
                          " frames, features have " + std::to_string(v.frames()));
        }
        v.labels = std::move(a.labels);
        v.users = std::move(a.users);
        v.segments = std::move(a.segments);
        try {
          v.validate();
        } catch (const DataError& e) {
          throw DataError(ann_path.string() + ": " + e.what());
        }
      }
      videos.push_back(std::move(v));
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "dataset " + dir.string() + " has " + std::to_string(problems.size()) +
                      " problem(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return videos;
}

std::vector<VideoRecord> load_datasets(std::span<const fs::path> dirs) {
  std::vector<VideoRecord> all;
  std::set<std::string> seen;
  for (const fs::path& d : dirs) {
    for (VideoRecord& v : load_dataset(d)) {
      if (!seen.insert(v.id).second) {
        throw DataError("video id '" + v.id + "' appears in more than one dataset directory");
      }
      all.push_back(std::move(v));
    }
  }
  return all;
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SyntheticSpec::validate() const {
  if (videos == 0) throw ConfigError("synthetic: need at least one video");
  if (min_frames < 2 || max_frames < min_frames) throw ConfigError("synthetic: bad frame range");
  if (dims == 0) throw ConfigError("synthetic: dims must be positive");
  if (!(keyframe_fraction > 0.0 && keyframe_fraction <= 0.5)) {
    throw ConfigError("synthetic: keyframe fraction must be in (0, 0.5]");
  }
  if (clusters < 2) throw ConfigError("synthetic: need at least 2 clusters");
  if (!(noise >= 0.0) || !(user_noise >= 0.0)) throw ConfigError("synthetic: noise must be >= 0");
  if (segment_length == 0) throw ConfigError("synthetic: segment length must be positive");
}

namespace {

std::vector<double> unit_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

std::vector<VideoRecord> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t story_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(static_cast<double>(spec.clusters) * spec.keyframe_fraction)),
      1, spec.clusters - 1);
  std::vector<std::vector<double>> story;
  for (std::size_t c = 0; c < story_count; ++c) story.push_back(unit_vector(spec.dims, rng));

  std::vector<VideoRecord> videos;
  for (std::size_t v = 0; v < spec.videos; ++v) {
    const auto t = static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::int64_t>(spec.min_frames), static_cast<std::int64_t>(spec.max_frames)));
    std::vector<std::vector<double>> background;
    for (std::size_t c = story_count; c < spec.clusters; ++c) {
      background.push_back(unit_vector(spec.dims, rng));
    }
    SegmentList segments = SegmentList::uniform(t, spec.segment_length);

    const std::size_t keyframes = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(spec.keyframe_fraction * static_cast<double>(t))), 1, t - 1);
    std::vector<std::size_t> order(segments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    Mask labels(t, false);
    std::size_t placed = 0;
    for (std::size_t s : order) {
      const Segment& seg = segments.segments()[s];
      for (std::size_t f = seg.start; f < seg.end && placed < keyframes; ++f, ++placed) labels[f] = true;
      if (placed == keyframes) break;
    }

    // One centre per segment and class, so a partial keyframe segment still
    // draws its background frames from a background cluster.
    Matrix x(t, spec.dims);
    for (const Segment& seg : segments.segments()) {
      const auto& story_c = story[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(story.size()) - 1))];
      const auto& bg_c = background[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(background.size()) - 1))];
      for (std::size_t f = seg.start; f < seg.end; ++f) {
        const auto& centre = labels[f] ? story_c : bg_c;
        bool nonzero = false;
        while (!nonzero) {
          for (std::size_t c = 0; c < spec.dims; ++c) {
            const double value = centre[c] + spec.noise * rng.normal();
            x(f, c) = static_cast<double>(static_cast<float>(value));
            nonzero = nonzero || x(f, c) != 0.0;
          }
        }
      }
    }

    UserAnnotations users;
    for (std::size_t u = 0; u < spec.users; ++u) {
      std::vector<double> s(t);
      for (std::size_t f = 0; f < t; ++f) {
        s[f] = (labels[f] ? 1.0 : 0.0) + rng.uniform(-spec.user_noise, spec.user_noise);
      }
      users.scores.push_back(std::move(s));
    }

    char id[32];
    std::snprintf(id, sizeof id, "synth_%03zu", v);
    VideoRecord rec{id, FeatureMatrix(std::move(x)), GroundTruth(std::move(labels)), {},
                    std::move(segments)};
    if (spec.users > 0) rec.users = std::move(users);
    videos.push_back(std::move(rec));
  }
  return videos;
}

}  // namespace sumgraph
