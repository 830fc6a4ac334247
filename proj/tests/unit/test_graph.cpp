#include "causalmech/error.hpp"
#include "causalmech/graph.hpp"

#include <doctest.h>

using namespace causalmech;

TEST_CASE("edge marks") {
  CausalGraph g({"U", "A", "B"}, 0);
  g.add_undirected(1, 2);
  CHECK(g.undirected(1, 2));
  CHECK(g.undirected(2, 1));
  CHECK_FALSE(g.directed(1, 2));
  g.orient(2, 1);
  CHECK(g.directed(2, 1));
  CHECK(g.parents(1) == std::vector<std::size_t>{2});
  CHECK(g.children(2) == std::vector<std::size_t>{1});
  CHECK_THROWS(g.add_directed(1, 1));
  CHECK_THROWS(g.orient(0, 1));
  g.add_directed(0, 2);
  CHECK(g.has_directed_path(0, 1));
  CHECK_FALSE(g.has_directed_path(1, 0));
  CHECK(g.edge_count() == 2);
  g.remove_edge(2, 1);
  CHECK_FALSE(g.adjacent(1, 2));
}

TEST_CASE("complete graph and skeleton") {
  auto g = CausalGraph::complete({"a", "b", "c", "d"});
  CHECK(g.edge_count() == 6);
  CHECK(g.undirected_edges().size() == 6);
  g.orient(0, 1);
  const auto s = g.skeleton();
  CHECK(s.undirected(0, 1));
  CHECK(s.edge_count() == 6);
}

TEST_CASE("json and dot round trip with inclusion") {
  CausalGraph g({"U", "phi", "T"}, 0);
  g.add_directed(0, 1);
  g.add_directed(1, 2);
  g.inclusion()[{0, 1}] = Inclusion{48, 50};
  const auto back = graph_from_json(graph_to_json(g));
  CHECK(back == g);
  CHECK(back.inclusion().at({0, 1}).value() == 0.96);
  const auto dot = graph_to_dot(g);
  CHECK(dot.find("\"U\" -> \"phi\" [label=\"0.96\"]") != std::string::npos);
  CHECK(dot.find("\"phi\" -> \"T\";") != std::string::npos);
  CHECK_THROWS_AS(graph_from_json("{\"nodes\": [\"a\"], \"edges\": [{\"from\": \"a\", \"to\": \"b\"}]}"), DataError);
  CHECK_THROWS_AS(graph_from_json("not json"), DataError);
}
