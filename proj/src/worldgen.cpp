#include "galforge/worldgen.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "galforge/io_util.hpp"
#include "galforge/pools.hpp"
#include "galforge/rng.hpp"

namespace galforge {

namespace {

constexpr std::uint64_t kDrawStream = 0x7764;      // 'wd'
constexpr std::uint64_t kTemplateStream = 0x7774;  // 'wt'
constexpr std::uint64_t kTableStream = 0x7765;     // 'we'

void validate_spec(const WorldSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("world: need at least 2 classes");
  if (spec.subclusters < 1) throw std::invalid_argument("world: need at least 1 subcluster");
  if (spec.dim < 2) throw std::invalid_argument("world: need at least 2 dimensions");
  if (spec.layout != "ring" && spec.layout != "grid")
    throw std::invalid_argument("world: unknown layout '" + spec.layout + "'");
  if (!(spec.class_std > 0.0)) throw std::invalid_argument("world: class_std must be positive");
  if (!(spec.overlap > 0.0)) throw std::invalid_argument("world: overlap must be positive");
  if (spec.pretrain_n == 0 || spec.pool_n == 0 || spec.test_n == 0)
    throw std::invalid_argument("world: split sizes must be positive");
  if (spec.cond_dim == 0) throw std::invalid_argument("world: cond_dim must be positive");
  if (spec.templates == 0) throw std::invalid_argument("world: need at least one template");
}

// component k sits at layout position k and belongs to class k % classes, so
// consecutive positions interleave the classes
std::vector<std::vector<double>> raw_means(const WorldSpec& spec) {
  const std::size_t components = spec.classes * spec.subclusters;
  std::vector<std::vector<double>> means(components, std::vector<double>(spec.dim, 0.0));
  if (spec.layout == "ring") {
    for (std::size_t k = 0; k < components; ++k) {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(components);
      means[k][0] = std::cos(angle);
      means[k][1] = std::sin(angle);
    }
  } else {  // grid with unit spacing, centered at the origin
    const auto side = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(components))));
    const double half = (static_cast<double>(side) - 1.0) / 2.0;
    for (std::size_t k = 0; k < components; ++k) {
      means[k][0] = static_cast<double>(k % side) - half;
      means[k][1] = static_cast<double>(k / side) - half;
    }
  }
  return means;
}

DataSplit draw_split(Rng& rng, const std::vector<std::vector<double>>& means,
                     std::size_t classes, double sigma, std::size_t n, std::size_t d) {
  DataSplit split;
  split.n = n;
  split.d = d;
  split.xs.resize(n * d);
  split.ys.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.uniform_int(means.size());
    split.ys[i] = static_cast<int>(k % classes);
    for (std::size_t j = 0; j < d; ++j)
      split.xs[i * d + j] = means[k][j] + sigma * rng.normal();
  }
  return split;
}

void z_score(DataSplit& split, std::span<const double> mean, std::span<const double> std) {
  for (std::size_t i = 0; i < split.n; ++i)
    for (std::size_t j = 0; j < split.d; ++j)
      split.xs[i * split.d + j] = (split.xs[i * split.d + j] - mean[j]) / std[j];
}

void append_bytes(std::string& out, const void* data, std::size_t size) {
  out.append(static_cast<const char*>(data), size);
}

void append_u64(std::string& out, std::uint64_t v) { append_bytes(out, &v, sizeof v); }

void append_f64(std::string& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  append_u64(out, bits);
}

void append_split(std::string& out, const DataSplit& split) {
  append_u64(out, split.n);
  append_u64(out, split.d);
  for (double v : split.xs) append_f64(out, v);
  for (int y : split.ys) append_u64(out, static_cast<std::uint64_t>(y));
  for (int t : split.taus) append_u64(out, static_cast<std::uint64_t>(t));
}

}  // namespace

WorldSpec WorldSpec::stock(const std::string& name) {
  WorldSpec spec;
  spec.name = name;
  if (name == "default") return spec;
  if (name == "hard100") {
    spec.classes = 100;
    spec.dim = 8;
    spec.layout = "grid";
    spec.class_std = 0.28;
    return spec;
  }
  throw std::invalid_argument("world: unknown stock spec '" + name + "'");
}

int gaussian_posterior_argmax(const std::vector<std::vector<double>>& means,
                              std::span<const double> coord_std, std::span<const double> x) {
  if (means.empty()) throw std::invalid_argument("posterior: no components");
  const std::size_t d = means[0].size();
  if (coord_std.size() != d || x.size() != d)
    throw std::invalid_argument("posterior: dimension mismatch");
  // Equal weights and shared covariance: the argmax of the posterior is the
  // argmin of the variance-scaled squared distance. Strict improvement keeps
  // the lowest id on ties.
  int best = 0;
  double best_score = 0.0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    double score = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (x[j] - means[c][j]) / coord_std[j];
      score += z * z;
    }
    if (c == 0 || score < best_score) {
      best = static_cast<int>(c);
      best_score = score;
    }
  }
  return best;
}

int mixture_class_argmax(const std::vector<std::vector<double>>& component_means,
                         std::size_t classes, std::span<const double> coord_std,
                         std::span<const double> x) {
  if (component_means.empty()) throw std::invalid_argument("posterior: no components");
  if (classes == 0 || component_means.size() % classes != 0)
    throw std::invalid_argument("posterior: component count not a multiple of classes");
  const std::size_t d = component_means[0].size();
  if (coord_std.size() != d || x.size() != d)
    throw std::invalid_argument("posterior: dimension mismatch");
  // Equal component weights and shared diagonal covariance: the class posterior
  // is proportional to the sum of exp(-d2/2) over that class's components, with
  // d2 the variance-scaled squared distance. Shift by the minimum distance so
  // the exponentials stay in range.
  std::vector<double> d2(component_means.size(), 0.0);
  double d2_min = 0.0;
  for (std::size_t k = 0; k < component_means.size(); ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (x[j] - component_means[k][j]) / coord_std[j];
      acc += z * z;
    }
    d2[k] = acc;
    if (k == 0 || acc < d2_min) d2_min = acc;
  }
  std::vector<double> mass(classes, 0.0);
  for (std::size_t k = 0; k < component_means.size(); ++k)
    mass[k % classes] += std::exp(-0.5 * (d2[k] - d2_min));
  // Strict improvement keeps the lowest class id on ties.
  int best = 0;
  for (std::size_t c = 1; c < classes; ++c)
    if (mass[c] > mass[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

int World::oracle_label(std::span<const double> x) const {
  return mixture_class_argmax(means, spec.classes, coord_std, x);
}

std::uint64_t World::digest() const {
  std::string buf;
  buf += spec.name;
  buf += '\0';
  buf += spec.layout;
  buf += '\0';
  append_u64(buf, spec.classes);
  append_u64(buf, spec.subclusters);
  append_u64(buf, spec.dim);
  append_f64(buf, spec.class_std);
  append_f64(buf, spec.overlap);
  append_u64(buf, spec.pretrain_n);
  append_u64(buf, spec.pool_n);
  append_u64(buf, spec.test_n);
  append_u64(buf, spec.cond_dim);
  append_u64(buf, spec.templates);
  append_u64(buf, spec.seed);
  for (const auto& m : means)
    for (double v : m) append_f64(buf, v);
  for (double v : coord_std) append_f64(buf, v);
  append_split(buf, pretrain);
  append_split(buf, pool);
  append_split(buf, test);
  for (const auto& e : table.class_embeddings)
    for (double v : e) append_f64(buf, v);
  for (const auto& o : table.template_offsets)
    for (double v : o) append_f64(buf, v);
  append_f64(buf, bayes_ceiling);
  return fnv1a64(buf);
}

World make_world(const WorldSpec& spec) {
  validate_spec(spec);
  World world;
  world.spec = spec;
  world.means = raw_means(spec);
  const double sigma = spec.class_std * spec.overlap;

  Rng draw(seed_mix(spec.seed, kDrawStream));
  world.pretrain = draw_split(draw, world.means, spec.classes, sigma, spec.pretrain_n, spec.dim);
  world.pool = draw_split(draw, world.means, spec.classes, sigma, spec.pool_n, spec.dim);
  world.test = draw_split(draw, world.means, spec.classes, sigma, spec.test_n, spec.dim);

  Rng tau(seed_mix(spec.seed, kTemplateStream));
  world.pretrain.taus.resize(spec.pretrain_n);
  for (std::size_t i = 0; i < spec.pretrain_n; ++i)
    world.pretrain.taus[i] = static_cast<int>(tau.uniform_int(spec.templates));

  // z-score every split by the pretrain statistics so the generator and the
  // classifiers share one normalized space
  std::vector<double> mean(spec.dim, 0.0);
  std::vector<double> std(spec.dim, 0.0);
  for (std::size_t i = 0; i < world.pretrain.n; ++i)
    for (std::size_t j = 0; j < spec.dim; ++j) mean[j] += world.pretrain.xs[i * spec.dim + j];
  for (std::size_t j = 0; j < spec.dim; ++j) mean[j] /= static_cast<double>(world.pretrain.n);
  for (std::size_t i = 0; i < world.pretrain.n; ++i)
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const double dev = world.pretrain.xs[i * spec.dim + j] - mean[j];
      std[j] += dev * dev;
    }
  for (std::size_t j = 0; j < spec.dim; ++j) {
    std[j] = std::sqrt(std[j] / static_cast<double>(world.pretrain.n));
    if (std[j] < 1e-12) std[j] = 1.0;
  }
  z_score(world.pretrain, mean, std);
  z_score(world.pool, mean, std);
  z_score(world.test, mean, std);
  world.coord_std.resize(spec.dim);
  for (std::size_t j = 0; j < spec.dim; ++j) {
    for (auto& m : world.means) m[j] = (m[j] - mean[j]) / std[j];
    world.coord_std[j] = sigma / std[j];
  }

  world.table = EmbeddingTable::build(spec.classes, spec.cond_dim, spec.templates,
                                      seed_mix(spec.seed, kTableStream));

  std::size_t hits = 0;
  for (std::size_t i = 0; i < world.test.n; ++i)
    if (world.oracle_label(world.test.row(i)) == world.test.ys[i]) ++hits;
  world.bayes_ceiling = static_cast<double>(hits) / static_cast<double>(world.test.n);
  return world;
}

PretrainSet pretrain_set(const World& world) {
  PretrainSet set;
  set.xs = world.pretrain.xs;
  set.n = world.pretrain.n;
  set.d = world.pretrain.d;
  set.labels = world.pretrain.ys;
  set.templates = world.pretrain.taus;
  return set;
}

std::string world_metadata(const World& world) {
  std::ostringstream out;
  out << "world.name = " << world.spec.name << "\n";
  out << "world.layout = " << world.spec.layout << "\n";
  out << "world.classes = " << world.spec.classes << "\n";
  out << "world.dim = " << world.spec.dim << "\n";
  out << "world.class_std = " << format_double(world.spec.class_std) << "\n";
  out << "world.overlap = " << format_double(world.spec.overlap) << "\n";
  out << "world.pretrain_n = " << world.spec.pretrain_n << "\n";
  out << "world.pool_n = " << world.spec.pool_n << "\n";
  out << "world.test_n = " << world.spec.test_n << "\n";
  out << "world.cond_dim = " << world.spec.cond_dim << "\n";
  out << "world.templates = " << world.spec.templates << "\n";
  out << "world.seed = " << world.spec.seed << "\n";
  out << "world.bayes_ceiling = " << format_double(world.bayes_ceiling) << "\n";
  for (std::size_t c = 0; c < world.means.size(); ++c) {
    out << "world.mean." << c << " =";
    for (double v : world.means[c]) out << " " << format_double(v);
    out << "\n";
  }
  out << "world.coord_std =";
  for (double v : world.coord_std) out << " " << format_double(v);
  out << "\n";
  out << "world.digest = " << hex64(world.digest()) << "\n";
  return out.str();
}

namespace {

// pretrain rows keep their template assignment in the snapshot cycle column;
// world.meta documents this
std::vector<SnapshotRow> split_rows(const DataSplit& split, const std::string& provenance) {
  std::vector<SnapshotRow> rows(split.n);
  for (std::size_t i = 0; i < split.n; ++i) {
    rows[i].x.assign(split.row(i).begin(), split.row(i).end());
    rows[i].label = split.ys[i];
    rows[i].provenance = provenance;
    rows[i].cycle = split.taus.empty() ? 0 : split.taus[i];
  }
  return rows;
}

DataSplit rows_split(const std::vector<SnapshotRow>& rows, const std::string& provenance,
                     bool taus, const std::filesystem::path& path) {
  DataSplit split;
  if (rows.empty()) throw std::runtime_error("world: empty split in " + path.string());
  split.n = rows.size();
  split.d = rows[0].x.size();
  split.xs.reserve(split.n * split.d);
  split.ys.reserve(split.n);
  for (const auto& row : rows) {
    if (row.provenance != provenance || row.x.size() != split.d)
      throw std::runtime_error("world: malformed split file " + path.string());
    split.xs.insert(split.xs.end(), row.x.begin(), row.x.end());
    split.ys.push_back(row.label);
    if (taus) split.taus.push_back(row.cycle);
  }
  return split;
}

std::uint64_t parse_meta_u64(const std::string& value, const std::string& key) {
  std::uint64_t parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::runtime_error("world: bad integer for " + key + ": '" + value + "'");
  return parsed;
}

std::vector<double> parse_meta_doubles(const std::string& value) {
  std::vector<double> out;
  for (const auto field : split(value, ' '))
    if (!field.empty()) out.push_back(parse_double(field));
  return out;
}

}  // namespace

void save_world(const World& world, const std::filesystem::path& path) {
  std::filesystem::create_directories(path);
  atomic_write_file(path / "pretrain.csv",
                    snapshot_csv(split_rows(world.pretrain, "pretrain"), world.pretrain.d));
  atomic_write_file(path / "pool.csv",
                    snapshot_csv(split_rows(world.pool, "pool"), world.pool.d));
  atomic_write_file(path / "test.csv",
                    snapshot_csv(split_rows(world.test, "test"), world.test.d));
  atomic_write_file(path / "world.meta", world_metadata(world));
}

World load_world(const std::filesystem::path& path) {
  const std::string meta = read_file(path / "world.meta");
  World world;
  std::vector<std::vector<double>> means;
  std::uint64_t stored_digest = 0;
  bool have_digest = false;
  std::istringstream in(meta);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key{trim(line.substr(0, eq))};
    const std::string value{trim(line.substr(eq + 1))};
    if (key == "world.name") world.spec.name = value;
    else if (key == "world.layout") world.spec.layout = value;
    else if (key == "world.classes") world.spec.classes = parse_meta_u64(value, key);
    else if (key == "world.dim") world.spec.dim = parse_meta_u64(value, key);
    else if (key == "world.class_std") world.spec.class_std = parse_double(value);
    else if (key == "world.overlap") world.spec.overlap = parse_double(value);
    else if (key == "world.pretrain_n") world.spec.pretrain_n = parse_meta_u64(value, key);
    else if (key == "world.pool_n") world.spec.pool_n = parse_meta_u64(value, key);
    else if (key == "world.test_n") world.spec.test_n = parse_meta_u64(value, key);
    else if (key == "world.cond_dim") world.spec.cond_dim = parse_meta_u64(value, key);
    else if (key == "world.templates") world.spec.templates = parse_meta_u64(value, key);
    else if (key == "world.seed") world.spec.seed = parse_meta_u64(value, key);
    else if (key == "world.bayes_ceiling") world.bayes_ceiling = parse_double(value);
    else if (key == "world.coord_std") world.coord_std = parse_meta_doubles(value);
    else if (key == "world.digest") {
      stored_digest = std::stoull(value, nullptr, 16);
      have_digest = true;
    } else if (key.starts_with("world.mean.")) {
      const std::size_t c = parse_meta_u64(key.substr(11), key);
      if (means.size() <= c) means.resize(c + 1);
      means[c] = parse_meta_doubles(value);
    }
  }
  world.means = std::move(means);
  if (world.means.size() != world.spec.classes || world.coord_std.size() != world.spec.dim)
    throw std::runtime_error("world: incomplete metadata in " + (path / "world.meta").string());

  world.pretrain = rows_split(parse_snapshot_csv(read_file(path / "pretrain.csv")), "pretrain",
                              true, path / "pretrain.csv");
  world.pool =
      rows_split(parse_snapshot_csv(read_file(path / "pool.csv")), "pool", false, path / "pool.csv");
  world.test =
      rows_split(parse_snapshot_csv(read_file(path / "test.csv")), "test", false, path / "test.csv");
  if (world.pretrain.d != world.spec.dim || world.pool.d != world.spec.dim ||
      world.test.d != world.spec.dim)
    throw std::runtime_error("world: split dimension mismatch in " + path.string());

  // the table is deterministic from the seed; the digest check below catches
  // any drift between writer and reader
  world.table = EmbeddingTable::build(world.spec.classes, world.spec.cond_dim,
                                      world.spec.templates, seed_mix(world.spec.seed, kTableStream));
  if (have_digest && world.digest() != stored_digest)
    throw std::runtime_error("world: digest mismatch loading " + path.string());
  return world;
}

}  // namespace galforge
