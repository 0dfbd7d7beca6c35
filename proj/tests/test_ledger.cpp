#include <functional>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"

using namespace metachain;
using fx::mk;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Truncated;
}

// Every root-to-leaf path; best = longest, ties by smallest tip hash.
Hash32 brute_longest(const LedgerView& l) {
  std::optional<std::pair<std::size_t, Hash32>> best;
  std::function<void(const Hash32&, std::size_t)> walk = [&](const Hash32& h, std::size_t len) {
    if (l.children(h).empty()) {
      if (!best || len > best->first || (len == best->first && h < best->second)) best = {len, h};
      return;
    }
    for (const auto& c : l.children(h)) walk(c, len + 1);
  };
  walk(l.genesis().blockhash, 0);
  return best->second;
}

std::size_t count_subtree(const LedgerView& l, const Hash32& h) {
  std::size_t n = 1;
  for (const auto& c : l.children(h)) n += count_subtree(l, c);
  return n;
}

Hash32 brute_ghost(const LedgerView& l) {
  Hash32 cur = l.genesis().blockhash;
  while (!l.children(cur).empty()) {
    auto kids = l.children(cur);
    std::sort(kids.begin(), kids.end());
    Hash32 best = kids.front();
    for (const auto& k : kids)
      if (count_subtree(l, k) > count_subtree(l, best)) best = k;
    cur = best;
  }
  return cur;
}

}  // namespace

TEST_CASE("append_block") {
  LedgerView l;
  const Hash32 g = l.genesis().blockhash;
  const Block b1 = mk(g, 1, 1);
  l = append_block(l, b1);
  CHECK(l.tips() == std::set<Hash32>{b1.blockhash});

  CHECK(code_of([&] { l.append(mk({g, b1.blockhash}, 2, 2)); }) == Errc::WrongParentArity);
  CHECK(code_of([&] { l.append(b1); }) == Errc::DuplicateBlock);
  CHECK(code_of([&] { l.append(mk(Hash32{}, 1, 3)); }) == Errc::UnknownParent);
  CHECK(code_of([&] { l.append(mk(g, 5, 3)); }) == Errc::BadHeight);
  Block forged = mk(g, 1, 4);
  forged.proposer = 9;
  CHECK(code_of([&] { l.append(forged); }) == Errc::BadBlockHash);
}

TEST_CASE("fork tips") {
  LedgerView l;
  const Hash32 g = l.genesis().blockhash;
  const Block a = mk(g, 1, 1), b = mk(g, 1, 2);
  l.append(a);
  l.append(b);
  const Block a2 = mk(a.blockhash, 2, 3);
  l.append(a2);
  CHECK(l.tips() == std::set<Hash32>{b.blockhash, a2.blockhash});
}

TEST_CASE("longest_chain_tip") {
  LedgerView l;
  const Hash32 g = l.genesis().blockhash;
  CHECK(l.longest_chain_tip() == g);

  Hash32 a = g, b = g;
  for (int h = 1; h <= 5; ++h) {
    const Block blk = mk(a, h, 100 + h);
    l.append(blk);
    a = blk.blockhash;
  }
  for (int h = 1; h <= 3; ++h) {
    const Block blk = mk(b, h, 200 + h);
    l.append(blk);
    b = blk.blockhash;
  }
  CHECK(l.longest_chain_tip() == a);

  // two length-4 branches over an 8-block fixture
  LedgerView t;
  Hash32 x = t.genesis().blockhash, y = x;
  for (int h = 1; h <= 4; ++h) {
    const Block bx = mk(x, h, 300 + h), by = mk(y, h, 400 + h);
    t.append(bx);
    t.append(by);
    x = bx.blockhash;
    y = by.blockhash;
  }
  CHECK(t.longest_chain_tip() == std::min(x, y));
  CHECK(t.longest_chain_tip() == brute_longest(t));
}

TEST_CASE("longest_chain_tip matches brute force on random trees") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    LedgerView l;
    for (const auto& b : fx::random_tree(rng, 1 + static_cast<int>(rng() % 19), trial * 100)) l.append(b);
    REQUIRE(l.longest_chain_tip() == brute_longest(l));
    REQUIRE(l.ghost_tip() == brute_ghost(l));
  }
}

TEST_CASE("ghost_tip") {
  LedgerView chain;
  Hash32 tip = chain.genesis().blockhash;
  for (int h = 1; h <= 4; ++h) {
    const Block b = mk(tip, h, h);
    chain.append(b);
    tip = b.blockhash;
  }
  CHECK(chain.ghost_tip() == tip);
  CHECK(chain.ghost_tip() == chain.longest_chain_tip());

  // 10 blocks: thin branch of 4, bushy branch of 5 that is only 3 deep
  LedgerView l;
  const Hash32 g = l.genesis().blockhash;
  Hash32 thin = g;
  for (int h = 1; h <= 4; ++h) {
    const Block b = mk(thin, h, 10 + h);
    l.append(b);
    thin = b.blockhash;
  }
  const Block r = mk(g, 1, 20);
  const Block c1 = mk(r.blockhash, 2, 21), c2 = mk(r.blockhash, 2, 22);
  const Block d1 = mk(c1.blockhash, 3, 23), d2 = mk(c1.blockhash, 3, 24);
  for (const auto& b : {r, c1, c2, d1, d2}) l.append(b);
  CHECK(count_subtree(l, r.blockhash) == 5);
  const Hash32 g_tip = l.ghost_tip();
  CHECK(l.is_ancestor(r.blockhash, g_tip));
  CHECK(g_tip == std::min(d1.blockhash, d2.blockhash));
  CHECK(l.longest_chain_tip() == thin);
  CHECK(g_tip == brute_ghost(l));

  // equalize: a fifth block on the thin branch makes both subtrees 5
  const Block extra = mk(thin, 5, 30);
  l.append(extra);
  const Hash32 thin_root = l.children(g).front() == r.blockhash ? l.children(g).back() : l.children(g).front();
  const Hash32 expect_root = std::min(thin_root, r.blockhash);
  CHECK(l.is_ancestor(expect_root, l.ghost_tip()));
  CHECK(l.ghost_tip() == brute_ghost(l));
}

TEST_CASE("beacon_elect") {
  const Hash32 c = sha256(std::string_view("c"));
  for (int s = 0; s < 5; ++s) CHECK(beacon_elect(sha256(std::to_string(s)), std::vector<Hash32>{c}) == c);
  CHECK(code_of([] { beacon_elect(Hash32{}, std::vector<Hash32>{}); }) == Errc::EmptyCandidates);

  const Hash32 a = sha256(std::string_view("a")), b = sha256(std::string_view("b"));
  std::vector<Hash32> cands{std::min(a, b), std::max(a, b)};
  std::set<Hash32> seen;
  for (int s = 0; s < 16; ++s) {
    const Hash32 seed = sha256(std::to_string(s));
    Bytes buf(seed.begin(), seed.end());
    for (const auto& x : cands) buf.insert(buf.end(), x.begin(), x.end());
    const Hash32 d = sha256(buf);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    CHECK(beacon_elect(seed, cands) == cands[v % 2]);
    CHECK(beacon_elect(seed, std::vector<Hash32>{cands[1], cands[0]}) == cands[v % 2]);
    seen.insert(cands[v % 2]);
  }
  CHECK(seen.size() == 2);
}

TEST_CASE("chain_to_dag") {
  SUBCASE("fork-free") {
    LedgerView l;
    Hash32 tip = l.genesis().blockhash;
    for (int h = 1; h <= 4; ++h) {
      const Block b = mk(tip, h, h);
      l.append(b);
      tip = b.blockhash;
    }
    const LedgerView d = chain_to_dag(l, 5, Hash32{});
    CHECK(d.mode() == LedgerMode::Dag);
    CHECK(d.size() == l.size());
    CHECK(*d.anchor() == tip);
    for (const auto& h : l.insertion_order()) CHECK_FALSE(d.is_discarded(h));
    CHECK(code_of([&] { chain_to_dag(d, 6, Hash32{}); }) == Errc::WrongMode);
  }

  SUBCASE("two branches, both beacon outcomes") {
    LedgerView l;
    const Block b1 = mk(l.genesis().blockhash, 1, 1);
    l.append(b1);
    const Block a2 = mk(b1.blockhash, 2, 2), a3 = mk(a2.blockhash, 3, 3);
    const Block c2 = mk(b1.blockhash, 2, 4), c3 = mk(c2.blockhash, 3, 5);
    for (const auto& b : {a2, a3, c2, c3}) l.append(b);
    l.commit_through(b1.blockhash);

    std::set<Hash32> leaders;
    for (int s = 0; s < 32 && leaders.size() < 2; ++s) {
      const Hash32 seed = sha256(std::to_string(s));
      const LedgerView d = chain_to_dag(l, 4, seed);
      const Hash32 win = beacon_elect(seed, std::vector<Hash32>{a3.blockhash, c3.blockhash});
      const Hash32 lose = win == a3.blockhash ? c3.blockhash : a3.blockhash;
      const Hash32 lose_parent = win == a3.blockhash ? c2.blockhash : a2.blockhash;
      CHECK(*d.anchor() == win);
      CHECK(d.is_committed(win));
      CHECK(d.is_discarded(lose));
      CHECK(d.is_discarded(lose_parent));
      CHECK_FALSE(d.is_committed(lose_parent));
      CHECK(d.discarded_transactions().size() == 2);
      LedgerView next = d;
      CHECK(code_of([&] { next.append(mk(lose, 4, 90)); }) == Errc::NotAnchored);
      next.append(mk(win, 4, 91));
      leaders.insert(win);
    }
    CHECK(leaders.size() == 2);
  }

  SUBCASE("height checks") {
    LedgerView l;
    const Block b1 = mk(l.genesis().blockhash, 1, 1);
    const Block b2 = mk(b1.blockhash, 2, 2);
    l.append(b1);
    l.append(b2);
    l.commit_through(b2.blockhash);
    CHECK(code_of([&] { chain_to_dag(l, 2, Hash32{}); }) == Errc::ConvertHeightTooLow);
    CHECK(code_of([&] { chain_to_dag(l, 5, Hash32{}); }) == Errc::NoCandidateAtHeight);
  }
}

TEST_CASE("dag_to_chain") {
  SUBCASE("path") {
    LedgerView l;
    Hash32 tip = l.genesis().blockhash;
    for (int h = 1; h <= 5; ++h) {
      const Block b = mk(tip, h, h);
      l.append(b);
      tip = b.blockhash;
    }
    const LedgerView d = chain_to_dag(l, 6, Hash32{});
    const LedgerView c = dag_to_chain(d, 6);
    CHECK(c.mode() == LedgerMode::Chain);
    REQUIRE(c.committed().size() == 6);
    Hash32 cur = tip;
    for (auto it = c.committed().rbegin(); it != c.committed().rend(); ++it) {
      CHECK(*it == cur);
      const auto& ps = l.at(cur).parents;
      if (!ps.empty()) cur = ps.front();
    }
  }

  SUBCASE("diamond against all topological orders") {
    LedgerView l;
    const Block a = mk(l.genesis().blockhash, 1, 1);
    l.append(a);
    LedgerView d = chain_to_dag(l, 2, Hash32{});
    const Block b = mk(a.blockhash, 2, 2), c = mk(a.blockhash, 2, 3);
    d.append(b);
    d.append(c);
    const Block dd = mk({b.blockhash, c.blockhash}, 3, 4);
    d.append(dd);
    d.commit_through(dd.blockhash);

    // brute force: permutations of {a,b,c,d} that respect edges; keep the
    // minimum under the (height, hash) key sequence
    std::vector<const Block*> blocks{&a, &b, &c, &dd};
    std::sort(blocks.begin(), blocks.end());
    std::optional<std::vector<std::pair<Height, Hash32>>> best;
    do {
      std::set<Hash32> placed{d.genesis().blockhash};
      bool ok = true;
      std::vector<std::pair<Height, Hash32>> key;
      for (const Block* x : blocks) {
        for (const auto& p : x->parents) ok = ok && placed.count(p);
        placed.insert(x->blockhash);
        key.emplace_back(x->height, x->blockhash);
      }
      if (ok && (!best || key < *best)) best = key;
    } while (std::next_permutation(blocks.begin(), blocks.end()));

    const LedgerView ch = dag_to_chain(d, 4);
    REQUIRE(ch.committed().size() == 5);
    for (std::size_t i = 0; i < 4; ++i) {
      const Block& got = ch.at(ch.committed()[i + 1]);
      CHECK(got.parents.size() == 1);
      CHECK(fx::tag_of(got) == fx::tag_of(d.at((*best)[i].second)));
    }
    CHECK(code_of([&] { dag_to_chain(d, 3); }) == Errc::ConvertHeightTooLow);
  }
}

TEST_CASE("round trip and determinism") {
  LedgerView l;
  Hash32 tip = l.genesis().blockhash;
  for (int h = 1; h <= 12; ++h) {
    const Block b = mk(tip, h, h);
    l.append(b);
    tip = b.blockhash;
    if (h == 4) l.commit_through(tip);
  }
  const LedgerView d = chain_to_dag(l, 6, derive_beacon_seed(l, 6));
  const LedgerView back = dag_to_chain(d, 13);
  LedgerView full = l;
  full.commit_through(tip);
  CHECK(back.committed() == full.committed());

  const LedgerView d2 = chain_to_dag(l, 6, derive_beacon_seed(l, 6));
  CHECK(d.dump() == d2.dump());
  const auto j = nlohmann::json::parse(back.dump());
  CHECK(j["mode"] == "Chain");
  CHECK(j["committedHeight"] == 12);
  CHECK(j["blocks"].size() == 13);
}

TEST_CASE("acyclicity under random appends") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    LedgerView l;
    for (const auto& b : fx::random_tree(rng, 20, trial * 1000)) l.append(b);
    // Kahn's algorithm must consume every block
    std::map<Hash32, std::size_t> indeg;
    for (const auto& h : l.insertion_order()) indeg[h] = l.at(h).parents.size();
    std::vector<Hash32> ready{l.genesis().blockhash};
    std::size_t seen = 0;
    while (!ready.empty()) {
      const Hash32 h = ready.back();
      ready.pop_back();
      ++seen;
      for (const auto& c : l.children(h))
        if (--indeg[c] == 0) ready.push_back(c);
    }
    REQUIRE(seen == l.size());
  }
}
