#include "birl/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace birl {

Var ParamStore::add(const std::string& name, Array init) {
  if (index_.count(name)) fail("ParamStore: duplicate parameter name '" + name + "'");
  Var p = parameter(std::move(init));
  index_[name] = nodes_.size();
  names_.push_back(name);
  nodes_.push_back(p);
  snapshot_.reset();  // a snapshot must always cover every parameter
  return p;
}

size_t ParamStore::total_values() const {
  size_t n = 0;
  for (const auto& v : nodes_) n += v->value.size();
  return n;
}

const Var& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail("ParamStore: unknown parameter '" + name + "'");
  return nodes_[it->second];
}

void ParamStore::take_snapshot() {
  std::vector<Array> snap;
  snap.reserve(nodes_.size());
  for (const auto& v : nodes_) snap.push_back(v->value);
  snapshot_ = std::move(snap);
}

const std::vector<Array>& ParamStore::snapshot_values() const {
  if (!snapshot_) fail("ParamStore: no snapshot taken");
  return *snapshot_;
}

std::vector<double> ParamStore::displacement() const {
  if (!snapshot_) fail("ParamStore: displacement requested without a snapshot");
  std::vector<double> out;
  out.reserve(total_values());
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const auto& cur = nodes_[i]->value.data;
    const auto& old = (*snapshot_)[i].data;
    for (size_t j = 0; j < cur.size(); ++j) out.push_back(cur[j] - old[j]);
  }
  return out;
}

void ParamStore::sgd_update(double learning_rate, bool ascent) {
  const double step = ascent ? learning_rate : -learning_rate;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    auto& g = nodes_[i]->grad.data;
    for (double gv : g)
      if (!std::isfinite(gv)) fail("sgd_update: non-finite gradient in '" + names_[i] + "'");
    auto& v = nodes_[i]->value.data;
    for (size_t j = 0; j < v.size(); ++j) v[j] += step * g[j];
    std::fill(g.begin(), g.end(), 0.0);
  }
}

void ParamStore::zero_grads() {
  for (auto& n : nodes_) std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(total_values());
  for (const auto& n : nodes_) out.insert(out.end(), n->value.data.begin(), n->value.data.end());
  return out;
}

void ParamStore::set_flat_values(const std::vector<double>& flat) {
  if (flat.size() != total_values()) fail("ParamStore: flat value size mismatch");
  size_t off = 0;
  for (auto& n : nodes_) {
    std::copy(flat.begin() + off, flat.begin() + off + n->value.size(), n->value.data.begin());
    off += n->value.size();
  }
}

void ParamStore::save(const std::string& path) const {
  std::vector<std::pair<std::string, Array>> records;
  records.reserve(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) records.emplace_back(names_[i], nodes_[i]->value);
  write_checkpoint(path, records);
}

void ParamStore::load(const std::string& path) {
  auto records = read_checkpoint(path);
  if (records.size() != nodes_.size())
    fail("checkpoint '" + path + "': expected " + std::to_string(nodes_.size()) +
         " parameters, found " + std::to_string(records.size()));
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].first != names_[i])
      fail("checkpoint '" + path + "': parameter " + std::to_string(i) + " is '" +
           records[i].first + "', expected '" + names_[i] + "'");
    if (!(records[i].second.shape == nodes_[i]->value.shape))
      fail("checkpoint '" + path + "': shape mismatch for '" + names_[i] + "' (" +
           records[i].second.shape_str() + " vs " + nodes_[i]->value.shape_str() + ")");
    nodes_[i]->value.data = std::move(records[i].second.data);
  }
}

namespace {

constexpr char kMagic[8] = {'B', 'I', 'R', 'L', 'P', 'K', '0', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail("checkpoint '" + path + "': truncated file");
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<std::pair<std::string, Array>>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("checkpoint: cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  put<uint64_t>(out, records.size());
  for (const auto& [name, arr] : records) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(arr.rank()));
    for (size_t d : arr.shape) put<uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(arr.data.data()),
              static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
  }
  if (!out) fail("checkpoint: write failed for '" + path + "'");
}

std::vector<std::pair<std::string, Array>> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail("checkpoint '" + path + "': bad magic/version tag");
  const auto count = take<uint64_t>(in, path);
  std::vector<std::pair<std::string, Array>> records;
  records.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = take<uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) fail("checkpoint '" + path + "': truncated name");
    const auto rank = take<uint32_t>(in, path);
    if (rank == 0 || rank > 2) fail("checkpoint '" + path + "': bad rank");
    std::vector<size_t> shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(take<uint64_t>(in, path));
    Array arr(shape);
    in.read(reinterpret_cast<char*>(arr.data.data()),
            static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
    if (!in) fail("checkpoint '" + path + "': truncated values");
    records.emplace_back(std::move(name), std::move(arr));
  }
  return records;
}

double check_gradients(const std::function<Var()>& build, const std::vector<Var>& params,
                       double step) {
  Var root = build();
  if (root->value.size() != 1) fail("check_gradients: root must be scalar");
  if (!std::isfinite(root->value.data[0])) fail("check_gradients: non-finite forward value");
  backward(root);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad.data);

  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi]->value.data;
    for (size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + step;
      const double fp = build()->value.data[0];
      vals[i] = orig - step;
      const double fm = build()->value.data[0];
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
  }
  return max_rel;
}

double check_gradients(const std::function<Var()>& build, ParamStore& params, double step) {
  std::vector<Var> nodes;
  nodes.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) nodes.push_back(params.node(i));
  return check_gradients(build, nodes, step);
}

}  // namespace birl
