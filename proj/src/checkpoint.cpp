// SPDX-License-Identifier: Apache-2.0
#include "cgl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "cgl/error.hpp"

namespace cgl {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "cgl-checkpoint 1";

void put_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string shape_field(const ad::Shape& shape) {
  if (shape.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s;
}

ad::Shape parse_shape(const std::string& field) {
  ad::Shape shape;
  if (field == "-") return shape;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ',')) shape.push_back(std::stoull(item));
  return shape;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

struct ArrayEntry {
  ad::Shape shape;
  std::size_t offset = 0;
  std::size_t count = 0;
};

}  // namespace

void save_checkpoint(const fs::path& dir, CglModel& model, const OntologyTree& tree, const Vocabulary& vocab) {
  if (!model.frozen()) throw StateError("cannot checkpoint a model without frozen code embeddings");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::ostringstream manifest;
  manifest << kMagic << '\n';
  for (const auto& [k, v] : model.config().to_key_values()) manifest << "config " << k << ' ' << v << '\n';
  manifest << "meta num_patients " << model.dims().num_patients << '\n';
  manifest << "meta vocab_documents " << vocab.documents() << '\n';
  for (const auto& [name, state] : model.batchnorm_states()) {
    manifest << "meta initialized." << name << ' ' << (state->initialized ? 1 : 0) << '\n';
  }

  auto blob = open_out(dir / "arrays.bin", std::ios::out | std::ios::binary | std::ios::trunc);
  std::size_t offset = 0;
  for (const auto& [name, tensor] : model.state_arrays()) {
    manifest << "array " << name << ' ' << shape_field(tensor->shape()) << ' ' << offset << ' ' << tensor->size()
             << '\n';
    for (double v : tensor->values()) put_le(blob, v);
    offset += tensor->size() * 8;
  }
  if (!blob) throw IoError("failed writing " + (dir / "arrays.bin").string());

  auto m = open_out(dir / "manifest.txt");
  m << manifest.str();
  auto t = open_out(dir / "ontology.tsv");
  tree.save(t);
  auto v = open_out(dir / "vocab.tsv");
  vocab.save(v);
  if (!m || !t || !v) throw IoError("failed writing checkpoint files in " + dir.string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory " + dir.string() + " does not exist");
  auto in = open_in(dir / "manifest.txt");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ParseError("not a checkpoint manifest: " + dir.string());

  ModelConfig config;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, ArrayEntry>> arrays;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = "manifest line " + std::to_string(line_no);
    std::istringstream ss(line);
    std::string kind, name;
    ss >> kind >> name;
    if (kind == "config" || kind == "meta") {
      std::string value;
      std::getline(ss, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      if (kind == "meta") {
        meta[name] = value;
      } else {
        try {
          if (!config.set(name, value)) throw ParseError(where + ": unknown setting '" + name + "'");
        } catch (const ContractError& e) {
          throw ParseError(where + ": " + e.what());
        }
      }
    } else if (kind == "array") {
      std::string shape;
      ArrayEntry e;
      if (!(ss >> shape >> e.offset >> e.count)) throw ParseError(where + ": malformed array entry");
      try {
        e.shape = parse_shape(shape);
      } catch (const std::logic_error&) {
        throw ParseError(where + ": bad shape '" + shape + "'");
      }
      if (ad::shape_size(e.shape) != e.count) throw ParseError(where + ": shape and count disagree");
      arrays.emplace_back(name, std::move(e));
    } else {
      throw ParseError(where + ": unknown record '" + kind + "'");
    }
  }
  auto meta_size = [&](const std::string& key) -> std::size_t {
    auto it = meta.find(key);
    if (it == meta.end()) throw ParseError("checkpoint manifest lacks '" + key + "'");
    try {
      return std::stoull(it->second);
    } catch (const std::logic_error&) {
      throw ParseError("checkpoint metadata '" + key + "' is not a count");
    }
  };

  auto tree_in = open_in(dir / "ontology.tsv");
  OntologyTree tree = OntologyTree::parse(tree_in);
  auto vocab_in = open_in(dir / "vocab.tsv");
  Vocabulary vocab = Vocabulary::load(vocab_in, meta_size("vocab_documents"));

  auto blob_in = open_in(dir / "arrays.bin", std::ios::in | std::ios::binary);
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(blob_in)), std::istreambuf_iterator<char>());

  ModelDims dims = ModelDims::from(tree, meta_size("num_patients"), vocab.size());
  Checkpoint ck{CglModel(config, std::move(dims), 0), std::move(tree), std::move(vocab)};
  for (const auto& [name, state] : ck.model.batchnorm_states()) state->initialized = meta_size("initialized." + name) != 0;

  std::map<std::string, ad::Tensor*> targets;
  for (const auto& [name, tensor] : ck.model.state_arrays()) targets[name] = tensor;
  bool have_codes = false;
  for (const auto& [name, entry] : arrays) {
    if (entry.offset + entry.count * 8 > blob.size()) throw ParseError("array '" + name + "' runs past arrays.bin");
    ad::Tensor value(entry.shape);
    for (std::size_t i = 0; i < entry.count; ++i) value[i] = get_le(blob.data() + entry.offset + 8 * i);
    if (name == "H_c") {
      ck.model.set_frozen_codes(std::move(value));
      have_codes = true;
      continue;
    }
    auto it = targets.find(name);
    if (it == targets.end()) throw ParseError("checkpoint has unexpected array '" + name + "'");
    if (it->second->shape() != entry.shape) {
      throw ParseError("array '" + name + "' has shape " + ad::shape_str(entry.shape) + ", model expects " +
                       ad::shape_str(it->second->shape()));
    }
    *it->second = std::move(value);
    targets.erase(it);
  }
  if (!targets.empty()) throw ParseError("checkpoint lacks array '" + targets.begin()->first + "'");
  if (!have_codes) throw ParseError("checkpoint lacks frozen code embeddings");
  return ck;
}

}  // namespace cgl
