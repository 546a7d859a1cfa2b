#include "idn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

namespace idn {

Box union_box(const Box& a, const Box& b) {
  return Box{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

std::array<Real, 4> normalize_box(const Box& box, Real image_w, Real image_h) {
  if (!(image_w > 0) || !(image_h > 0)) {
    throw ContractError(fmt::format("image size must be positive, got {}x{}", image_w, image_h));
  }
  auto clip = [](Real v, Real hi) { return std::clamp(v, Real{0}, hi); };
  return {clip(box.x1, image_w) / image_w, clip(box.y1, image_h) / image_h, clip(box.x2, image_w) / image_w,
          clip(box.y2, image_h) / image_h};
}

std::vector<int> PairSample::verbs() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

PairSample make_pair(std::int64_t human_id, std::int64_t object_id, Tensor union_appearance,
                     const std::vector<int>& verbs, int n_verbs) {
  PairSample p;
  p.human_id = human_id;
  p.object_id = object_id;
  p.union_appearance = std::move(union_appearance);
  p.labels.assign(static_cast<std::size_t>(n_verbs), 0);
  for (int v : verbs) {
    if (v < 0 || v >= n_verbs) throw ContractError(fmt::format("verb index {} outside [0, {})", v, n_verbs));
    p.labels[static_cast<std::size_t>(v)] = 1;
  }
  p.interactive = !verbs.empty();
  return p;
}

Dataset::Dataset(int n_verbs, FeatureDims dims) : n_verbs_(n_verbs), dims_(dims) {
  if (n_verbs <= 0) throw ContractError("a dataset needs at least one verb");
}

void Dataset::add_instance(Instance instance) {
  if (index_.contains(instance.id)) throw ContractError(fmt::format("duplicate instance id {}", instance.id));
  index_.emplace(instance.id, instances_.size());
  instances_.push_back(std::move(instance));
}

void Dataset::add_pair(PairSample pair) { pairs_.push_back(std::move(pair)); }

const Instance& Dataset::instance(std::int64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ContractError(fmt::format("unknown instance id {}", id));
  return instances_[it->second];
}

std::vector<std::size_t> Dataset::positive_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (pairs_[i].interactive) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::negative_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (!pairs_[i].interactive) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  for (const auto& inst : instances_) {
    const bool human = inst.kind == InstanceKind::human;
    const std::size_t width = human ? dims_.human_width : dims_.object_width;
    if (inst.appearance.size() != width) {
      throw FormatError(fmt::format("instance {}: feature width {} but expected {}", inst.id, inst.appearance.size(), width));
    }
    if (!inst.box.valid()) throw FormatError(fmt::format("instance {}: invalid box", inst.id));
    if (!(inst.confidence >= 0 && inst.confidence <= 1)) {
      throw FormatError(fmt::format("instance {}: confidence {} outside [0, 1]", inst.id, inst.confidence));
    }
    if (!human && !inst.pose.empty()) throw FormatError(fmt::format("instance {}: object with pose", inst.id));
    if (human && inst.category != kHumanCategory) {
      throw FormatError(fmt::format("instance {}: human with category {}", inst.id, inst.category));
    }
    if (!human && inst.category < 0) throw FormatError(fmt::format("instance {}: object without category", inst.id));
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& p = pairs_[i];
    if (p.labels.size() != static_cast<std::size_t>(n_verbs_)) {
      throw FormatError(fmt::format("pair {}: {} labels for {} verbs", i, p.labels.size(), n_verbs_));
    }
    const bool any = std::any_of(p.labels.begin(), p.labels.end(), [](auto l) { return l != 0; });
    if (any != p.interactive) throw FormatError(fmt::format("pair {}: interactiveness label disagrees with verbs", i));
    if (p.union_appearance.size() != dims_.union_width) {
      throw FormatError(fmt::format("pair {}: union width {} but expected {}", i, p.union_appearance.size(),
                                    dims_.union_width));
    }
    if (!has_instance(p.human_id) || instance(p.human_id).kind != InstanceKind::human) {
      throw FormatError(fmt::format("pair {}: {} is not a human instance", i, p.human_id));
    }
    if (!has_instance(p.object_id) || instance(p.object_id).kind != InstanceKind::object) {
      throw FormatError(fmt::format("pair {}: {} is not an object instance", i, p.object_id));
    }
  }
}

Real round_to_float(Real v) { return static_cast<Real>(static_cast<float>(v)); }

Tensor round_to_float(const Tensor& t) {
  Tensor out = t;
  for (auto& v : out.data()) v = round_to_float(v);
  return out;
}

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".blob");
  return p;
}

namespace {

void append_floats(std::vector<unsigned char>& blob, const Tensor& t) {
  for (Real v : t.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) blob.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xffu));
  }
}

Tensor read_floats(std::span<const unsigned char> blob, std::size_t offset, std::size_t count, const std::string& who,
                   const std::string& source) {
  if (offset + 4 * count > blob.size()) {
    throw FormatError(fmt::format("{}: feature blob too short for {} ({} floats at byte {}, blob has {} bytes)", source,
                                  who, count, offset, blob.size()));
  }
  Tensor t({count});
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(blob[offset + 4 * k + i]) << (8 * i);
    t[k] = static_cast<Real>(std::bit_cast<float>(bits));
  }
  return t;
}

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_no, const std::string& source)
      : line_(line), line_no_(line_no), source_(source) {}

  std::string_view word(const char* what) {
    skip_space();
    if (pos_ >= line_.size()) fail(fmt::format("missing {}", what));
    const auto start = pos_;
    while (pos_ < line_.size() && line_[pos_] != ' ' && line_[pos_] != '\t') ++pos_;
    return line_.substr(start, pos_ - start);
  }

  template <class T>
  T number(const char* what) {
    const auto w = word(what);
    T value{};
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec != std::errc{} || ptr != w.data() + w.size()) fail(fmt::format("bad {} '{}'", what, w));
    return value;
  }

  bool at_end() {
    skip_space();
    return pos_ >= line_.size();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(fmt::format("{}:{}: {}", source_, line_no_, msg));
  }

 private:
  void skip_space() {
    while (pos_ < line_.size() && (line_[pos_] == ' ' || line_[pos_] == '\t' || line_[pos_] == '\r')) ++pos_;
  }
  std::string_view line_;
  std::size_t line_no_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

EncodedDataset encode_dataset(const Dataset& dataset) {
  dataset.validate();
  EncodedDataset out;
  const auto& d = dataset.dims();
  std::string& m = out.manifest;
  m += fmt::format("IDN-MANIFEST v1 n_verbs={} feat_dims={},{},{}\n", dataset.n_verbs(), d.union_width, d.human_width,
                   d.object_width);
  for (const auto& inst : dataset.instances()) {
    const std::size_t offset = out.blob.size();
    append_floats(out.blob, inst.appearance);
    m += fmt::format("I {} {} {} {} {} {} {} {} {} {} {}", inst.id,
                     inst.kind == InstanceKind::human ? "human" : "object", inst.category, inst.confidence, inst.box.x1,
                     inst.box.y1, inst.box.x2, inst.box.y2, inst.image_w, inst.image_h, offset);
    if (!inst.pose.empty()) {
      m += fmt::format(" {}", inst.pose.size());
      for (const auto& kp : inst.pose) {
        if (kp.valid) {
          m += fmt::format(" {} {}", kp.x, kp.y);
        } else {
          m += " -1 -1";
        }
      }
    }
    m += '\n';
  }
  for (const auto& p : dataset.pairs()) {
    const std::size_t offset = out.blob.size();
    append_floats(out.blob, p.union_appearance);
    std::string verbs;
    for (int v : p.verbs()) verbs += (verbs.empty() ? "" : ",") + std::to_string(v);
    m += fmt::format("P {} {} {} {}\n", p.human_id, p.object_id, offset, verbs.empty() ? "-" : verbs);
  }
  return out;
}

Dataset decode_dataset(const std::string& manifest, std::span<const unsigned char> blob, const std::string& source) {
  std::istringstream in(manifest);
  std::string line;
  std::size_t line_no = 0;
  Dataset dataset;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    LineParser p(line, line_no, source);
    if (!have_header) {
      if (p.word("magic") != "IDN-MANIFEST" || p.word("version") != "v1") p.fail("expected 'IDN-MANIFEST v1' header");
      const auto verbs_kv = p.word("n_verbs");
      const auto dims_kv = p.word("feat_dims");
      if (!verbs_kv.starts_with("n_verbs=") || !dims_kv.starts_with("feat_dims=")) {
        p.fail("header must carry n_verbs= and feat_dims=");
      }
      int n_verbs = 0;
      auto vs = verbs_kv.substr(8);
      if (std::from_chars(vs.data(), vs.data() + vs.size(), n_verbs).ec != std::errc{} || n_verbs <= 0) {
        p.fail("bad n_verbs");
      }
      std::array<std::size_t, 3> dims{};
      auto rest = dims_kv.substr(10);
      for (std::size_t k = 0; k < 3; ++k) {
        const auto comma = rest.find(',');
        const auto tok = rest.substr(0, comma);
        if (std::from_chars(tok.data(), tok.data() + tok.size(), dims[k]).ec != std::errc{} || dims[k] == 0) {
          p.fail("bad feat_dims");
        }
        if (k < 2 && comma == std::string_view::npos) p.fail("feat_dims needs three widths");
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
      if (!rest.empty()) p.fail("feat_dims needs three widths");
      dataset = Dataset(n_verbs, FeatureDims{dims[0], dims[1], dims[2]});
      have_header = true;
      if (!p.at_end()) p.fail("trailing tokens in header");
      continue;
    }
    const auto tag = p.word("record tag");
    if (tag == "I") {
      Instance inst;
      inst.id = p.number<std::int64_t>("instance id");
      const auto kind = p.word("kind");
      if (kind == "human") {
        inst.kind = InstanceKind::human;
      } else if (kind == "object") {
        inst.kind = InstanceKind::object;
      } else {
        p.fail(fmt::format("unknown instance kind '{}'", kind));
      }
      inst.category = p.number<int>("category");
      inst.confidence = p.number<Real>("confidence");
      inst.box.x1 = p.number<Real>("x1");
      inst.box.y1 = p.number<Real>("y1");
      inst.box.x2 = p.number<Real>("x2");
      inst.box.y2 = p.number<Real>("y2");
      inst.image_w = p.number<Real>("image width");
      inst.image_h = p.number<Real>("image height");
      const auto offset = p.number<std::size_t>("blob offset");
      if (!p.at_end()) {
        const auto k = p.number<std::size_t>("keypoint count");
        for (std::size_t j = 0; j < k; ++j) {
          Keypoint kp;
          kp.x = p.number<Real>("keypoint x");
          kp.y = p.number<Real>("keypoint y");
          kp.valid = !(kp.x < 0 || kp.y < 0);
          if (!kp.valid) kp.x = kp.y = 0;
          inst.pose.push_back(kp);
        }
      }
      if (!p.at_end()) p.fail("trailing tokens in instance record");
      const auto width = inst.kind == InstanceKind::human ? dataset.dims().human_width : dataset.dims().object_width;
      inst.appearance = read_floats(blob, offset, width, fmt::format("instance {}", inst.id), source);
      if (dataset.has_instance(inst.id)) p.fail(fmt::format("duplicate instance id {}", inst.id));
      dataset.add_instance(std::move(inst));
    } else if (tag == "P") {
      const auto human = p.number<std::int64_t>("human id");
      const auto object = p.number<std::int64_t>("object id");
      const auto offset = p.number<std::size_t>("blob offset");
      const auto verbs_tok = p.word("verb list");
      if (!p.at_end()) p.fail("trailing tokens in pair record");
      std::vector<int> verbs;
      if (verbs_tok != "-") {
        std::string_view rest = verbs_tok;
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          const auto tok = rest.substr(0, comma);
          int v = -1;
          auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
          if (ec != std::errc{} || ptr != tok.data() + tok.size() || v < 0 || v >= dataset.n_verbs()) {
            p.fail(fmt::format("bad verb index '{}'", tok));
          }
          verbs.push_back(v);
          rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
      }
      auto feature = read_floats(blob, offset, dataset.dims().union_width, fmt::format("pair on line {}", line_no), source);
      dataset.add_pair(make_pair(human, object, std::move(feature), verbs, dataset.n_verbs()));
    } else {
      p.fail(fmt::format("unknown record tag '{}'", tag));
    }
  }
  if (!have_header) throw ParseError(source + ":1: missing manifest header");
  try {
    dataset.validate();
  } catch (const FormatError& e) {
    throw FormatError(source + ": " + e.what());
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& manifest) {
  const auto encoded = encode_dataset(dataset);
  {
    std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw PathError("cannot write manifest " + manifest.string());
    out << encoded.manifest;
  }
  const auto blob = blob_path_for(manifest);
  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot write blob " + blob.string());
  out.write(reinterpret_cast<const char*>(encoded.blob.data()), static_cast<std::streamsize>(encoded.blob.size()));
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw PathError("cannot open manifest " + manifest.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto blob_path = blob_path_for(manifest);
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw PathError("cannot open feature blob " + blob_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  return decode_dataset(text, blob, manifest.string());
}

}  // namespace idn
