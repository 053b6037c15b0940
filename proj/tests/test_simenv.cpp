#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace infoctl;
using namespace testing_support;

namespace {

const HashEmbedder kEmb;
const ToyScorer kToy;

double sq_norm(const EmbeddingVector& v) {
  double s = 0.0;
  for (double x : v.values) s += x * x;
  return s;
}

bool mentions(const std::string& text, const std::string& answer) {
  return (" " + normalize_answer(text) + " ").find(" " + normalize_answer(answer) + " ") != std::string::npos;
}

EpisodeTrace play(const std::shared_ptr<const SimWorld>& world, std::size_t task, AgentProfile profile, Mode mode) {
  SimEnvironment env(world, task, kEmb, kToy);
  ScriptedAgent agent(profile);
  return run_episode(env, agent, EpisodeConfig{}, mode);
}

}  // namespace

TEST(HashEmbedder, Basics) {
  EXPECT_THROW(HashEmbedder(8), Error);
  EXPECT_EQ(kEmb.dim(), 256u);
  const auto a = kEmb.embed("alpha beta gamma");
  EXPECT_NEAR(sq_norm(a), 1.0, 1e-12);
  EXPECT_EQ(a, kEmb.embed("alpha beta gamma"));
  EXPECT_NEAR(clamped_cosine(a, kEmb.embed("gamma alpha beta")), 1.0, 1e-12);
  EXPECT_NEAR(clamped_cosine(a, kEmb.embed("Alpha, BETA gamma!")), 1.0, 1e-12);

  const auto empty = kEmb.embed("");
  ASSERT_EQ(empty.dim(), 256u);
  EXPECT_EQ(empty.values[0], 1.0);
  EXPECT_NEAR(sq_norm(empty), 1.0, 1e-15);
}

TEST(HashEmbedder, DisjointBucketsAreOrthogonal) {
  std::vector<std::string> words;
  std::set<std::size_t> used;
  for (std::size_t i = 0; words.size() < 6; ++i) {
    const auto w = detail::pseudo_word(i);
    if (used.insert(kEmb.bucket(w)).second) words.push_back(w);
  }
  const auto a = kEmb.embed(words[0] + " " + words[1] + " " + words[2]);
  const auto b = kEmb.embed(words[3] + " " + words[4] + " " + words[5]);
  EXPECT_EQ(clamped_cosine(a, b), 0.0);
}

TEST(ToyScorer, Fixtures) {
  const std::vector<std::string> none;
  const ScoringContext ctx{"a1 b1", none, "a1"};
  // counts a1=2, b1=1; N=3, V=2 -> denominator 4.5.
  const auto seen = kToy.score_tokens("a1", ctx);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NEAR(seen[0], std::log(2.5 / 4.5), 1e-15);
  const auto two = kToy.score_tokens("b1 zz", ctx);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_NEAR(two[0], std::log(1.5 / 4.5), 1e-15);
  EXPECT_NEAR(two[1], std::log(0.5 / 4.5), 1e-15);
  const auto punct = kToy.score_tokens("!!", ctx);
  ASSERT_EQ(punct.size(), 1u);
  EXPECT_NEAR(punct[0], std::log(0.5 / 4.5), 1e-15);

  const std::vector<std::string> ev{"zz zz"};
  EXPECT_GT(kToy.score_tokens("zz", ScoringContext{"a1 b1", ev, "a1"})[0], two[1]);
}

TEST(CorpusSpecTest, Validation) {
  EXPECT_NO_THROW(CorpusSpec{}.validate());
  auto expect_invalid = [](CorpusSpec s) {
    try {
      s.validate();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidSpec);
    }
  };
  CorpusSpec s;
  s.num_docs = 0;
  expect_invalid(s);
  s = CorpusSpec{};
  s.num_docs = 10;  // fewer than num_tasks * redundancy
  expect_invalid(s);
  s = CorpusSpec{};
  s.depth = 0;
  expect_invalid(s);
  s = CorpusSpec{};
  s.branching = 10;
  expect_invalid(s);
  s = CorpusSpec{};
  s.redundancy_factor = 0;
  expect_invalid(s);
}

TEST(Corpus, DeterministicInSeed) {
  const auto a = generate_corpus(CorpusSpec{});
  const auto b = generate_corpus(CorpusSpec{});
  ASSERT_EQ(a.documents.size(), b.documents.size());
  for (std::size_t i = 0; i < a.documents.size(); ++i) EXPECT_EQ(to_json(a.documents[i]), to_json(b.documents[i]));
  for (std::size_t i = 0; i < a.tasks.size(); ++i) EXPECT_EQ(to_json(a.tasks[i]), to_json(b.tasks[i]));

  CorpusSpec other;
  other.seed = 8;
  const auto c = generate_corpus(other);
  bool differs = false;
  for (std::size_t i = 0; i < a.documents.size(); ++i) differs |= to_json(a.documents[i]) != to_json(c.documents[i]);
  EXPECT_TRUE(differs);
}

TEST(Corpus, ShapeAndPlantedAnswers) {
  const CorpusSpec spec;
  const auto corpus = generate_corpus(spec);
  EXPECT_EQ(corpus.documents.size(), spec.num_docs);
  EXPECT_EQ(corpus.tasks.size(), spec.num_tasks);
  std::set<NodeId> ids;
  for (const auto& d : corpus.documents) {
    const auto t = build_tree(d);
    EXPECT_EQ(d.nodes.size(), 1u + 3u + 9u);
    EXPECT_EQ(t.leaves().size(), 9u);
    for (const auto& n : d.nodes) EXPECT_TRUE(ids.insert(n.node_id).second) << n.node_id;
  }
  for (const auto& task : corpus.tasks) {
    ASSERT_EQ(task.gold_answers.size(), 1u);
    EXPECT_EQ(task.candidates.size(), 5u);
    ASSERT_TRUE(task.candidates.gold_index.has_value());
    EXPECT_EQ(task.candidates.candidates[*task.candidates.gold_index], task.gold_answers[0]);
    EXPECT_EQ(task.relevant_leaf_ids.size(), spec.redundancy_factor);

    std::set<NodeId> holders;
    for (const auto& d : corpus.documents) {
      for (const auto& n : d.nodes) {
        if (mentions(n.text, task.gold_answers[0])) holders.insert(n.node_id);
      }
    }
    EXPECT_EQ(holders, std::set<NodeId>(task.relevant_leaf_ids.begin(), task.relevant_leaf_ids.end()));
  }
}

TEST(Corpus, DepthOneIsRootOnly) {
  CorpusSpec spec;
  spec.depth = 1;
  const auto corpus = generate_corpus(spec);
  for (const auto& d : corpus.documents) {
    ASSERT_EQ(d.nodes.size(), 1u);
    EXPECT_FALSE(d.nodes[0].parent_id.has_value());
  }
  for (const auto& task : corpus.tasks) {
    std::size_t holders = 0;
    for (const auto& d : corpus.documents) holders += mentions(d.nodes[0].text, task.gold_answers[0]);
    EXPECT_EQ(holders, spec.redundancy_factor);
  }
}

TEST(Retrieve, Examples) {
  std::vector<DocumentRecord> docs{doc("b", {{"b0", ""}}), doc("a", {{"a0", ""}}), doc("c", {{"c0", ""}})};
  docs[2].title = "zebra crossing";
  docs[2].nodes[0].text = "zebra crossing";
  const auto out = retrieve("zebra crossing", docs, 2, kEmb);
  ASSERT_EQ(out.trees.size(), 2u);
  EXPECT_EQ(out.trees[0]->doc_id(), "c");
  EXPECT_NEAR(out.scores[0], 1.0, 1e-12);

  // Equal-scoring docs come back in doc id order.
  std::vector<DocumentRecord> twins{doc("y", {{"n1", ""}}), doc("x", {{"n2", ""}})};
  twins[0].title = twins[1].title = "same";
  twins[0].nodes[0].text = twins[1].nodes[0].text = "same";
  const auto tied = retrieve("same", twins, 5, kEmb);
  ASSERT_EQ(tied.trees.size(), 2u);
  EXPECT_EQ(tied.trees[0]->doc_id(), "x");

  EXPECT_THROW(retrieve("q", docs, 0, kEmb), Error);
  try {
    (void)retrieve("q", std::vector<DocumentRecord>{}, 3, kEmb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyCorpus);
  }
}

TEST(Retrieve, QueryVariantsKeepTheWords) {
  EXPECT_EQ(query_variant("a b c", 0), "a b c");
  EXPECT_EQ(query_variant("a b c", 1), "b c a");
  EXPECT_EQ(query_variant("a b c", 4), "b c a");
  EXPECT_EQ(query_variant("solo", 3), "solo");
}

TEST(Retrieve, EveryTaskReachable) {
  const auto corpus = generate_corpus(CorpusSpec{});
  const auto world = SimWorld::build(corpus, kEmb);
  EXPECT_TRUE(unreachable_tasks(*world, 8, kEmb).empty());
  for (const auto& t : corpus.tasks) EXPECT_EQ(min_actions_to_gold(t, world->index, 5, 8, kEmb), 3u);
  EXPECT_FALSE(min_actions_to_gold(corpus.tasks[0], world->index, 5, 2, kEmb).has_value());
}

TEST(Profiles, NamesRoundTrip) {
  for (auto p : {AgentProfile::GreedyExpander, AgentProfile::OverRetriever, AgentProfile::PrematureStopper,
                 AgentProfile::Compliant}) {
    EXPECT_EQ(parse_profile(to_string(p)), p);
  }
  try {
    (void)parse_profile("lazy");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
  }
}

TEST(Profiles, FreeModeBehaviour) {
  const auto corpus = generate_corpus(CorpusSpec{});
  const auto world = SimWorld::build(corpus, kEmb);
  std::size_t correct = 0;
  for (std::size_t task = 0; task < corpus.tasks.size(); ++task) {
    const auto greedy = play(world, task, AgentProfile::GreedyExpander, Mode::Free);
    ASSERT_EQ(greedy.actions.size(), 4u);
    EXPECT_EQ(greedy.actions[0].kind, ActionKind::Retrieve);
    EXPECT_EQ(greedy.actions[1].kind, ActionKind::Expand);
    EXPECT_EQ(greedy.actions[2].kind, ActionKind::Expand);
    EXPECT_EQ(greedy.actions[3].kind, ActionKind::Answer);
    EXPECT_TRUE(greedy.violations.empty());
    ASSERT_TRUE(greedy.prediction.has_value());
    const auto& cands = corpus.tasks[task].candidates.candidates;
    EXPECT_NE(std::find(cands.begin(), cands.end(), *greedy.prediction), cands.end());
    correct += greedy.reward.f1 == 1.0;

    const auto over = play(world, task, AgentProfile::OverRetriever, Mode::Free);
    EXPECT_EQ(over.actions.size(), 8u);
    EXPECT_FALSE(over.prediction.has_value());
    ASSERT_EQ(over.utilities.size(), 8u);
    EXPECT_DOUBLE_EQ(over.utilities[0].score.novelty, 1.0);
    EXPECT_LT(over.utilities[1].score.novelty, 0.5);

    const auto quitter = play(world, task, AgentProfile::PrematureStopper, Mode::Free);
    ASSERT_EQ(quitter.actions.size(), 2u);
    EXPECT_EQ(quitter.actions[1].kind, ActionKind::Answer);
    EXPECT_TRUE(quitter.prediction.has_value());

    const auto compliant = play(world, task, AgentProfile::Compliant, Mode::Free);
    EXPECT_EQ(to_json(compliant).dump(), to_json(greedy).dump());
  }
  // Relevance-only planning sometimes lands on a distractor's planted passage.
  EXPECT_GT(correct * 2, corpus.tasks.size());
}

TEST(Profiles, ControlledModeBehaviour) {
  const auto corpus = generate_corpus(CorpusSpec{});
  const auto world = SimWorld::build(corpus, kEmb);
  for (std::size_t task = 0; task < corpus.tasks.size(); ++task) {
    const auto over = play(world, task, AgentProfile::OverRetriever, Mode::Controlled);
    EXPECT_TRUE(over.prediction.has_value());
    EXPECT_LT(over.actions.size(), 8u);
    std::vector<double> u;
    for (const auto& s : over.utilities) u.push_back(s.score.utility);
    const auto l_star = should_stop(u, 0.2, 2);
    ASSERT_TRUE(l_star.has_value());
    EXPECT_EQ(*l_star + 1, u.size());

    const auto compliant = play(world, task, AgentProfile::Compliant, Mode::Controlled);
    EXPECT_TRUE(compliant.violations.empty());
    for (const auto& e : compliant.control_events) EXPECT_TRUE(e.complied);
    EXPECT_TRUE(compliant.prediction.has_value());

    // Greedy ignores the directive and keeps its own plan; that is recorded, not penalized.
    const auto greedy = play(world, task, AgentProfile::GreedyExpander, Mode::Controlled);
    for (const auto& v : greedy.violations) EXPECT_NE(v.kind, ViolationKind::BudgetOverrun);
  }
}
