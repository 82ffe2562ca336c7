#include "ctc/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "ctc/error.hpp"

namespace ctc {

using nlohmann::ordered_json;

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error("SHA-256 initialisation failed");
    }
  }
  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("SHA-256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw Error("SHA-256 final failed");
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      out += buf;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

RunManifest::RunManifest(std::string command) : start_(std::chrono::steady_clock::now()) {
  doc_["command"] = std::move(command);
  doc_["argv"] = ordered_json::array();
  doc_["config"] = ordered_json::object();
  doc_["seeds"] = ordered_json::object();
  doc_["inputs"] = ordered_json::array();
  doc_["stages"] = ordered_json::object();
  doc_["warnings"] = ordered_json::array();
  doc_["outputs"] = ordered_json::array();
}

void RunManifest::set_argv(const std::vector<std::string>& argv) { doc_["argv"] = argv; }

void RunManifest::set_config(ordered_json config) { doc_["config"] = std::move(config); }

void RunManifest::set_seed(const std::string& name, std::uint64_t seed) {
  doc_["seeds"][name] = seed;
}

void RunManifest::add_input(const std::string& role, const std::string& path) {
  doc_["inputs"].push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
}

void RunManifest::add_output(const std::string& role, const std::string& path) {
  doc_["outputs"].push_back({{"role", role}, {"path", path}});
}

void RunManifest::add_stage(const std::string& name, ordered_json stage) {
  if (stage.is_object() && stage.contains("warnings")) {
    for (const auto& w : stage["warnings"]) doc_["warnings"].push_back(w);
  }
  doc_["stages"][name] = std::move(stage);
}

void RunManifest::add_warning(const std::string& text) { doc_["warnings"].push_back(text); }

ordered_json RunManifest::to_json() const {
  ordered_json j = doc_;
  j["wall_seconds"] = wall_seconds_;
  return j;
}

void RunManifest::save(const std::string& path) {
  wall_seconds_ =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  for (auto& out : doc_["outputs"]) {
    const std::string p = out["path"].get<std::string>();
    std::ifstream probe(p, std::ios::binary);
    if (probe) out["sha256"] = sha256_file(p);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json().dump(2) << '\n';
}

}  // namespace ctc
