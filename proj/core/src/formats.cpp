#include "segdet/formats.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "segdet/error.hpp"

namespace segdet {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'M', 'F'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[offset + i]) << (8 * i);
  return v;
}

// Line-oriented reader that tracks positions for error messages.
class LineSource {
 public:
  LineSource(std::istream& in, const std::string& name) : in_(in), name_(name) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(name_, line_no_, 0, msg); }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  const std::string& name_;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
T parse_num(std::string_view field, const LineSource& src, const char* what) {
  T v{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    src.fail(std::string("bad ") + what + " '" + std::string(field) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) src.fail(std::string("non-finite ") + what);
  }
  return v;
}

bool is_header(std::string_view line) { return line.rfind("image_id", 0) == 0; }

std::vector<std::string_view> csv_fields(const std::string& line, std::size_t expected,
                                         const LineSource& src) {
  auto f = split(line, ',');
  if (f.size() != expected) {
    src.fail("expected " + std::to_string(expected) + " fields, got " + std::to_string(f.size()));
  }
  if (f[0].empty()) src.fail("empty image_id");
  return f;
}

Box parse_box(const std::vector<std::string_view>& f, std::size_t at, const LineSource& src) {
  Box b{parse_num<double>(f[at], src, "x1"), parse_num<double>(f[at + 1], src, "y1"),
        parse_num<double>(f[at + 2], src, "x2"), parse_num<double>(f[at + 3], src, "y2")};
  if (!b.valid()) src.fail("box has x1 > x2 or y1 > y2");
  return b;
}

void write_box(std::ostream& out, const Box& b) {
  out << format_double(b.x1) << ',' << format_double(b.y1) << ',' << format_double(b.x2) << ','
      << format_double(b.y2);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kFeatureHeaderBytes + m.data.size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kFeatureFormatVersion);
  put_le<std::uint64_t>(out, m.rows);
  put_le<std::uint64_t>(out, m.cols);
  for (float f : m.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes, const std::string& name) {
  if (bytes.size() < kFeatureHeaderBytes) {
    throw FormatError(name, 0, bytes.size(), "truncated header");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(kMagic[i])) {
      throw FormatError(name, 0, i, "bad magic, expected SDMF");
    }
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kFeatureFormatVersion) {
    throw FormatError(name, 0, 4, "unsupported version " + std::to_string(version));
  }
  const auto rows = get_le<std::uint64_t>(bytes, 8);
  const auto cols = get_le<std::uint64_t>(bytes, 16);
  const std::uint64_t payload = bytes.size() - kFeatureHeaderBytes;
  if (cols != 0 && rows > payload / 4 / cols) {
    throw FormatError(name, 0, 8, "header claims more values than the payload holds");
  }
  if (rows * cols * 4 != payload) {
    throw FormatError(name, 0, kFeatureHeaderBytes + rows * cols * 4,
                      "payload length does not match header (" + std::to_string(payload) +
                          " bytes for " + std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
  FeatureMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const std::size_t off = kFeatureHeaderBytes + 4 * i;
    const float f = std::bit_cast<float>(get_le<std::uint32_t>(bytes, off));
    if (!std::isfinite(f)) throw FormatError(name, 0, off, "non-finite value");
    m.data[i] = f;
  }
  return m;
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m) {
  const auto bytes = encode_feature_matrix(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open feature file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_feature_matrix(bytes, path.string());
}

std::vector<SegmentMask> read_masks(std::istream& in, const std::string& name) {
  LineSource src(in, name);
  std::vector<SegmentMask> masks;
  std::string line;
  while (src.next(line)) {
    std::istringstream ls(line);
    std::string image_id, seg, h, w, runs_text;
    if (!(ls >> image_id >> seg >> h >> w)) src.fail("expected 'image_id segment_id height width runs'");
    ls >> runs_text;
    std::string extra;
    if (ls >> extra) src.fail("trailing tokens after runs");
    std::vector<Run> runs;
    if (!runs_text.empty() && runs_text != "-") {
      for (auto item : split(runs_text, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) src.fail("run '" + std::string(item) + "' lacks ':'");
        runs.push_back({parse_num<std::int64_t>(item.substr(0, colon), src, "run start"),
                        parse_num<std::int64_t>(item.substr(colon + 1), src, "run length")});
      }
    }
    try {
      masks.push_back(SegmentMask::from_runs(image_id, parse_num<std::int64_t>(seg, src, "segment_id"),
                                             parse_num<int>(h, src, "height"),
                                             parse_num<int>(w, src, "width"), std::move(runs)));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      src.fail(e.what());
    }
  }
  return masks;
}

void write_masks(std::ostream& out, std::span<const SegmentMask> masks) {
  for (const auto& m : masks) {
    out << m.image_id() << ' ' << m.segment_id() << ' ' << m.height() << ' ' << m.width() << ' ';
    if (m.runs().empty()) out << '-';
    for (std::size_t i = 0; i < m.runs().size(); ++i) {
      if (i) out << ',';
      out << m.runs()[i].start << ':' << m.runs()[i].length;
    }
    out << '\n';
  }
}

std::vector<BoxRecord> read_boxes(std::istream& in, const std::string& name) {
  LineSource src(in, name);
  std::vector<BoxRecord> out;
  std::string line;
  while (src.next(line)) {
    if (is_header(line)) continue;
    auto f = csv_fields(line, 6, src);
    out.push_back({std::string(f[0]), parse_num<std::int64_t>(f[1], src, "box_id"), parse_box(f, 2, src)});
  }
  return out;
}

void write_boxes(std::ostream& out, std::span<const BoxRecord> boxes) {
  out << "image_id,box_id,x1,y1,x2,y2\n";
  for (const auto& b : boxes) {
    out << b.image_id << ',' << b.box_id << ',';
    write_box(out, b.box);
    out << '\n';
  }
}

std::vector<GroundTruthObject> read_ground_truth(std::istream& in, const std::string& name) {
  LineSource src(in, name);
  std::vector<GroundTruthObject> out;
  std::string line;
  while (src.next(line)) {
    if (is_header(line)) continue;
    auto f = csv_fields(line, 7, src);
    const int cls = parse_num<int>(f[1], src, "class_id");
    if (cls < 1) src.fail("class_id must be >= 1");
    if (f[6] != "0" && f[6] != "1") src.fail("difficult must be 0 or 1");
    out.push_back({std::string(f[0]), cls, parse_box(f, 2, src), f[6] == "1"});
  }
  return out;
}

void write_ground_truth(std::ostream& out, std::span<const GroundTruthObject> objects) {
  out << "image_id,class_id,x1,y1,x2,y2,difficult\n";
  for (const auto& g : objects) {
    out << g.image_id << ',' << g.class_id << ',';
    write_box(out, g.box);
    out << ',' << (g.difficult ? 1 : 0) << '\n';
  }
}

std::vector<SegmentScore> read_segment_scores(std::istream& in, const std::string& name) {
  LineSource src(in, name);
  std::vector<SegmentScore> out;
  std::string line;
  while (src.next(line)) {
    if (is_header(line)) continue;
    auto f = csv_fields(line, 4, src);
    const int cls = parse_num<int>(f[2], src, "class_id");
    if (cls < 1) src.fail("class_id must be >= 1");
    out.push_back({std::string(f[0]), parse_num<std::int64_t>(f[1], src, "segment_id"), cls,
                   parse_num<double>(f[3], src, "raw_score")});
  }
  return out;
}

void write_segment_scores(std::ostream& out, std::span<const SegmentScore> scores) {
  out << "image_id,segment_id,class_id,raw_score\n";
  for (const auto& s : scores) {
    out << s.image_id << ',' << s.segment_id << ',' << s.class_id << ',' << format_double(s.raw_score)
        << '\n';
  }
}

std::vector<Detection> read_detections(std::istream& in, const std::string& name) {
  LineSource src(in, name);
  std::vector<Detection> out;
  std::string line;
  while (src.next(line)) {
    if (is_header(line)) continue;
    auto f = csv_fields(line, 8, src);
    Detection d;
    d.image_id = std::string(f[0]);
    d.class_id = parse_num<int>(f[1], src, "class_id");
    if (d.class_id < 1) src.fail("class_id must be >= 1");
    d.score = parse_num<double>(f[2], src, "score");
    d.box = parse_box(f, 3, src);
    if (!f[7].empty()) {
      for (auto id : split(f[7], ';')) {
        if (id == "NONE") {
          d.chosen_segments.push_back(std::nullopt);
        } else {
          d.chosen_segments.push_back(parse_num<std::int64_t>(id, src, "segment id"));
        }
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

void write_detections(std::ostream& out, std::span<const Detection> detections) {
  out << "image_id,class_id,score,x1,y1,x2,y2,chosen_seg_ids\n";
  for (const auto& d : detections) {
    out << d.image_id << ',' << d.class_id << ',' << format_double(d.score) << ',';
    write_box(out, d.box);
    out << ',';
    for (std::size_t i = 0; i < d.chosen_segments.size(); ++i) {
      if (i) out << ';';
      if (d.chosen_segments[i]) {
        out << *d.chosen_segments[i];
      } else {
        out << "NONE";
      }
    }
    out << '\n';
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  return out;
}

}  // namespace segdet
