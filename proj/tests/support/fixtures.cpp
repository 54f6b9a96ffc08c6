#include "fixtures.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace fixtures {

using analogion::AnalogyQuad;
using analogion::Rng;
using analogion::Source;
using analogion::WordVector;
using nlohmann::json;

namespace {

std::string word(const char* prefix, std::size_t i, std::size_t j) {
  return std::string(prefix) + std::to_string(i) + "x" + std::to_string(j);
}

// One question per line; the answer slot rotates so answer_index varies.
std::string mc_file(const char* prefix, std::size_t from, std::size_t count, Rng& rng) {
  std::string out;
  for (std::size_t q = from; q < from + count; ++q) {
    json j;
    j["stem"] = {word(prefix, q, 0), word(prefix, q, 1)};
    json choices = json::array();
    for (std::size_t c = 0; c < 5; ++c) choices.push_back({word(prefix, q, 2 + 2 * c), word(prefix, q, 3 + 2 * c)});
    j["choices"] = choices;
    j["answer"] = rng.uniform_index(5);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

analogion::CorpusSourceText published_size_sources(std::uint64_t seed) {
  Rng rng(seed);
  analogion::CorpusSourceText s;
  s.sat = mc_file("sat", 0, 374, rng);
  s.u2 = mc_file("uu", 0, 252, rng);
  // U4 repeats the U2 questions verbatim, then adds 352 of its own.
  s.u4 = s.u2 + mc_file("uf", 0, 352, rng);

  // 70 topics of 7 entities (21 each), one of 6 (15) and two of 2 (1 each).
  std::vector<std::size_t> sizes(70, 7);
  sizes.push_back(6);
  sizes.push_back(2);
  sizes.push_back(2);
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    json j;
    j["source"] = "src" + std::to_string(t);
    j["target"] = "tgt" + std::to_string(t);
    json src = json::array(), tgt = json::array();
    for (std::size_t e = 0; e < sizes[t]; ++e) {
      src.push_back(word("se", t, e));
      tgt.push_back(word("te", t, e));
    }
    j["source_entities"] = src;
    j["target_entities"] = tgt;
    j["subtype"] = t % 3 == 0 ? "metaphor" : "science";
    s.scan += j.dump() + "\n";
  }
  return s;
}

analogion::ScanTopicPair random_topic(Rng& rng, std::size_t n, int tag) {
  analogion::ScanTopicPair t;
  t.source_name = "s" + std::to_string(tag);
  t.target_name = "t" + std::to_string(tag);
  t.subtype = rng.uniform_index(2) ? analogion::ScanSubtype::science : analogion::ScanSubtype::metaphor;
  for (std::size_t i = 0; i < n; ++i) {
    // Small alphabet so distinct topics occasionally share entities.
    t.source_entities.push_back("e" + std::to_string(rng.uniform_index(3 * n)) + "_" + std::to_string(i));
    t.target_entities.push_back("f" + std::to_string(rng.uniform_index(3 * n)) + "_" + std::to_string(i));
  }
  return t;
}

RelationWorld make_relation_world(const RelationWorldConfig& config) {
  RelationWorld world;
  world.config = config;
  Rng rng(config.seed);
  const int L = config.latent_dim;
  const int D = L + config.nuisance_dim;

  auto gaussian = [&](int n, double sd) {
    WordVector v(n);
    for (int i = 0; i < n; ++i) v[i] = sd * rng.normal();
    return v;
  };

  struct Pair {
    std::string a, b;
  };
  std::vector<std::vector<Pair>> pairs(static_cast<std::size_t>(config.relations));
  for (int r = 0; r < config.relations; ++r) {
    WordVector offset = gaussian(L, 1.0);
    offset *= config.offset_norm / offset.norm();
    const double sd = config.noise_ratio * config.offset_norm;
    for (int p = 0; p < config.pairs_per_relation; ++p) {
      const WordVector base = gaussian(L, 1.0);
      const WordVector tail = base + offset + gaussian(L, sd);
      Pair pair{"r" + std::to_string(r) + "p" + std::to_string(p) + "a",
                "r" + std::to_string(r) + "p" + std::to_string(p) + "b"};
      for (const auto& [name, latent] : {std::pair{pair.a, base}, std::pair{pair.b, tail}}) {
        WordVector v(D);
        v.head(L) = latent;
        v.tail(config.nuisance_dim) = gaussian(config.nuisance_dim, config.nuisance_scale);
        world.table.emplace(name, v);
      }
      pairs[static_cast<std::size_t>(r)].push_back(pair);
    }
  }

  world.table.emplace("[CLS]", gaussian(D, 1.0));
  world.table.emplace("[SEP]", gaussian(D, 1.0));

  // Each pair heads one positive with the next pair of its relation and one
  // negative with a pair drawn from a different relation.
  std::vector<AnalogyQuad> quads;
  for (int r = 0; r < config.relations; ++r) {
    const auto& rel = pairs[static_cast<std::size_t>(r)];
    for (std::size_t p = 0; p < rel.size(); ++p) {
      const auto& first = rel[p];
      const auto& second = rel[(p + 1) % rel.size()];
      const std::string id = "W" + std::to_string(r) + ":" + std::to_string(p);
      auto other = static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(config.relations - 1)));
      if (other >= static_cast<std::size_t>(r)) ++other;
      const auto& donor = pairs[other][rng.uniform_index(pairs[other].size())];
      quads.push_back(AnalogyQuad{id, first.a, first.b, second.a, second.b, true, Source::SAT, {}, {}});
      quads.push_back(AnalogyQuad{id + ":neg", first.a, first.b, donor.a, donor.b, false, Source::SAT, {}, id});
    }
  }
  world.corpus = analogion::assemble_corpus({quads});
  Rng fold_rng(analogion::derive_seed(config.seed, 5));
  world.folds = analogion::make_folds(world.corpus, config.k, fold_rng);
  return world;
}

analogion::BackendFactory relation_world_factory(const RelationWorld& world, bool extra_layer, bool freeze_backbone,
                                                 double context_init_scale) {
  const int D = world.config.latent_dim + world.config.nuisance_dim;
  auto features = std::make_shared<analogion::TableTokenFeatures>(D, world.table);
  auto tokenizer = std::make_shared<analogion::ChunkTokenizer>(32);
  return [=] {
    analogion::ContextualConfig cfg;
    cfg.dimension = D;
    cfg.backbone_layer = true;
    cfg.extra_layer = extra_layer;
    cfg.context_init_scale = context_init_scale;
    auto backend = std::make_unique<analogion::ContextualBackend>(tokenizer, features, cfg, "toy:relation-world");
    if (freeze_backbone) backend->set_trainable("backbone", false);
    return backend;
  };
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("analogion_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace fixtures
