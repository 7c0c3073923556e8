"""
Bipartite user-trend network construction and structure analysis: k-core
filtering, single-attack noise removal, weighted Newman modularity, and a
deterministic two-phase Louvain community detection.

Nodes are ("user", id) or ("trend", "keyword@date") tuples; an edge's weight
counts the qualifying tweets the user posted into the trend.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping, Optional, Union

from .core import Duration, Timestamp, TrendGuardError
from .ingest import TrendInstance
from .classify import TweetFlags

Node = tuple[str, object]  # ("user", int) | ("trend", str)

USER = "user"
TREND = "trend"

UNDELETED = "undeleted"
DELETED_LEXICON = "deleted-lexicon"


class EmptyGraph(TrendGuardError):
    """Louvain was asked to partition a graph with no nodes."""


class IncompleteAssignment(TrendGuardError):
    """A modularity computation found nodes without a community."""


def _node_sort_key(node: Node) -> tuple[str, str]:
    return (node[0], str(node[1]))


class Graph:
    """Undirected bipartite graph with positive integer edge weights."""

    def __init__(self):
        self._adj: dict[Node, dict[Node, int]] = {}
        self._kind: dict[Node, str] = {}

    def add_node(self, node: Node, kind: str) -> None:
        if node in self._kind:
            if self._kind[node] != kind:
                raise ValueError(f"node {node} already present with kind {self._kind[node]}")
            return
        self._kind[node] = kind
        self._adj[node] = {}

    def add_edge(self, u: Node, v: Node, weight: int = 1) -> None:
        if u == v:
            raise ValueError(f"self-loop on {u}")
        if u not in self._kind or v not in self._kind:
            raise ValueError("add nodes before edges")
        if self._kind[u] == self._kind[v]:
            raise ValueError(f"edge within partition {self._kind[u]}: {u} -- {v}")
        if weight < 1:
            raise ValueError("edge weight must be positive")
        self._adj[u][v] = self._adj[u].get(v, 0) + weight
        self._adj[v][u] = self._adj[v].get(u, 0) + weight

    @property
    def n_nodes(self) -> int:
        return len(self._kind)

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def nodes(self) -> list[Node]:
        return sorted(self._kind, key=_node_sort_key)

    def kind(self, node: Node) -> str:
        return self._kind[node]

    def has_node(self, node: Node) -> bool:
        return node in self._kind

    def degree(self, node: Node) -> int:
        return len(self._adj[node])

    def weighted_degree(self, node: Node) -> int:
        return sum(self._adj[node].values())

    def neighbors(self, node: Node) -> dict[Node, int]:
        return self._adj[node]

    def edges(self) -> list[tuple[Node, Node, int]]:
        seen = []
        for u in self.nodes():
            for v, w in sorted(self._adj[u].items(), key=lambda item: _node_sort_key(item[0])):
                if _node_sort_key(u) < _node_sort_key(v):
                    seen.append((u, v, w))
        return seen

    def total_weight(self) -> int:
        return sum(w for _, _, w in self.edges())

    def subgraph(self, keep: set[Node]) -> "Graph":
        sub = Graph()
        for node in keep:
            sub.add_node(node, self._kind[node])
        for u in keep:
            for v, w in self._adj[u].items():
                if v in keep and _node_sort_key(u) < _node_sort_key(v):
                    sub.add_edge(u, v, w)
        return sub


def user_node(user_id: int) -> Node:
    return (USER, user_id)


def trend_node(instance: TrendInstance) -> Node:
    trend = instance.trend
    return (TREND, f"{trend.keyword.normalized}@{trend.date.isoformat()}")


def build_graph(
    instances: Union[Mapping[tuple[date, str], TrendInstance], Iterable[TrendInstance]],
    edge_predicate: str = UNDELETED,
    flags: Optional[Mapping[tuple[date, str], Mapping[int, TweetFlags]]] = None,
) -> Graph:
    """One edge per (user, trend) pair with a qualifying tweet; weight counts them.

    The "undeleted" predicate builds the interest-group network; the
    "deleted-lexicon" predicate builds the astrobot network and requires
    per-tweet flags.
    """
    if edge_predicate not in (UNDELETED, DELETED_LEXICON):
        raise ValueError(f"unknown edge predicate: {edge_predicate!r}")
    if edge_predicate == DELETED_LEXICON and flags is None:
        raise ValueError("deleted-lexicon predicate requires tweet flags")

    if isinstance(instances, Mapping):
        items = instances.values()
    else:
        items = instances

    graph = Graph()
    for instance in sorted(items, key=lambda i: (i.trend.date, i.keyword.normalized)):
        key = (instance.trend.date, instance.keyword.normalized)
        tnode = trend_node(instance)
        for tweet in instance.tweets:
            deleted = tweet.id in instance.deletions
            if edge_predicate == UNDELETED:
                qualifies = not deleted
            else:
                qualifies = deleted and flags[key][tweet.id].is_lexicon
            if not qualifies:
                continue
            unode = user_node(tweet.user_id)
            graph.add_node(unode, USER)
            graph.add_node(tnode, TREND)
            graph.add_edge(unode, tnode, 1)
    return graph


def k_core(graph: Graph, k: int) -> Graph:
    """Maximal subgraph where every node has degree >= k, by iterative peeling."""
    if k < 1:
        raise ValueError("k must be at least 1")
    degrees = {node: graph.degree(node) for node in graph.nodes()}
    removed: set[Node] = set()
    stack = [node for node, deg in degrees.items() if deg < k]
    while stack:
        node = stack.pop()
        if node in removed:
            continue
        removed.add(node)
        for neighbor in graph.neighbors(node):
            if neighbor in removed:
                continue
            degrees[neighbor] -= 1
            if degrees[neighbor] < k:
                stack.append(neighbor)
    keep = {node for node in degrees if node not in removed}
    return graph.subgraph(keep)


def single_attack_filter(graph: Graph) -> Graph:
    """Drop users linked to a single trend, then trends left isolated."""
    keep = {
        node
        for node in graph.nodes()
        if graph.kind(node) != USER or graph.degree(node) >= 2
    }
    trimmed = graph.subgraph(keep)
    keep = {
        node
        for node in trimmed.nodes()
        if trimmed.kind(node) != TREND or trimmed.degree(node) >= 1
    }
    return trimmed.subgraph(keep)


# ---------------------------------------------------------------------------
# Modularity and Louvain
# ---------------------------------------------------------------------------

@dataclass
class Partition:
    assignment: dict[Node, int]
    modularity: float


def modularity(graph: Graph, assignment: Mapping[Node, int]) -> float:
    """Weighted Newman modularity of a complete node-to-community assignment."""
    nodes = graph.nodes()
    for node in nodes:
        if node not in assignment:
            raise IncompleteAssignment(f"node {node} has no community")
    m = float(graph.total_weight())
    if m == 0.0:
        return 0.0
    intra: dict[int, float] = {}
    degree_sum: dict[int, float] = {}
    for node in nodes:
        c = assignment[node]
        degree_sum[c] = degree_sum.get(c, 0.0) + graph.weighted_degree(node)
    for u, v, w in graph.edges():
        if assignment[u] == assignment[v]:
            c = assignment[u]
            intra[c] = intra.get(c, 0.0) + w
    q = 0.0
    for c, deg in degree_sum.items():
        q += intra.get(c, 0.0) / m - (deg / (2.0 * m)) ** 2
    return q


def _one_level(
    adj: dict[int, dict[int, float]],
    loops: dict[int, float],
    m: float,
    rng: random.Random,
) -> tuple[dict[int, int], bool]:
    """Local-move phase: greedily move nodes to the neighbor community with
    the best modularity gain until no move improves. Ties between equally
    good moves go to the lowest community id; ties with staying put stay.
    """
    order = sorted(adj)
    rng.shuffle(order)
    degree = {u: sum(adj[u].values()) + 2.0 * loops.get(u, 0.0) for u in adj}
    com = {u: u for u in adj}
    tot = {u: degree[u] for u in adj}
    moved_any = False
    while True:
        moves = 0
        for u in order:
            cu = com[u]
            ku = degree[u]
            links: dict[int, float] = {}
            for v, w in adj[u].items():
                cv = com[v]
                links[cv] = links.get(cv, 0.0) + w
            tot[cu] -= ku
            best_c = cu
            best_gain = links.get(cu, 0.0) - tot[cu] * ku / (2.0 * m)
            for c in sorted(links):
                if c == cu:
                    continue
                gain = links[c] - tot[c] * ku / (2.0 * m)
                if gain > best_gain:
                    best_gain = gain
                    best_c = c
            tot[best_c] += ku
            com[u] = best_c
            if best_c != cu:
                moves += 1
        if moves == 0:
            break
        moved_any = True
    return com, moved_any


def _aggregate(
    adj: dict[int, dict[int, float]],
    loops: dict[int, float],
    com: Mapping[int, int],
) -> tuple[dict[int, dict[int, float]], dict[int, float], dict[int, int]]:
    relabel: dict[int, int] = {}
    for u in sorted(adj):
        c = com[u]
        if c not in relabel:
            relabel[c] = len(relabel)
    new_adj: dict[int, dict[int, float]] = {relabel[c]: {} for c in relabel}
    new_loops: dict[int, float] = {relabel[c]: 0.0 for c in relabel}
    for u, nbrs in adj.items():
        cu = relabel[com[u]]
        new_loops[cu] += loops.get(u, 0.0)
        for v, w in nbrs.items():
            cv = relabel[com[v]]
            if cu == cv:
                # Each undirected edge is seen from both endpoints.
                new_loops[cu] += w / 2.0
            else:
                new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
    mapping = {u: relabel[com[u]] for u in adj}
    return new_adj, new_loops, mapping


def _internal_modularity(
    adj: dict[int, dict[int, float]], loops: dict[int, float], m: float
) -> float:
    q = 0.0
    for u in adj:
        ku = sum(adj[u].values()) + 2.0 * loops.get(u, 0.0)
        q += loops.get(u, 0.0) / m - (ku / (2.0 * m)) ** 2
    return q


def louvain(graph: Graph, seed: int = 0) -> Partition:
    """Two-phase Louvain over the weighted graph, deterministic given a seed.

    The seed only fixes the node visiting order. The reported modularity is
    cross-checked against the standalone formula on every run.
    """
    nodes = graph.nodes()
    if not nodes:
        raise EmptyGraph("cannot partition an empty graph")

    index = {node: i for i, node in enumerate(nodes)}
    adj: dict[int, dict[int, float]] = {i: {} for i in range(len(nodes))}
    for u, v, w in graph.edges():
        adj[index[u]][index[v]] = float(w)
        adj[index[v]][index[u]] = float(w)
    loops: dict[int, float] = {}
    m = float(graph.total_weight())

    assignment_chain = {i: i for i in range(len(nodes))}
    if m > 0.0:
        rng = random.Random(seed)
        while True:
            com, moved = _one_level(adj, loops, m, rng)
            if not moved:
                break
            adj, loops, mapping = _aggregate(adj, loops, com)
            assignment_chain = {u: mapping[c] for u, c in assignment_chain.items()}
            if len(adj) == 1:
                break

    # Canonical community ids: first appearance over stable node order.
    relabel: dict[int, int] = {}
    assignment: dict[Node, int] = {}
    for node in nodes:
        c = assignment_chain[index[node]]
        if c not in relabel:
            relabel[c] = len(relabel)
        assignment[node] = relabel[c]

    q = modularity(graph, assignment)
    if m > 0.0:
        internal = _internal_modularity(adj, loops, m)
        if abs(internal - q) > 1e-9:
            raise AssertionError(
                f"louvain bookkeeping drifted from the modularity formula: {internal} vs {q}"
            )
    return Partition(assignment=assignment, modularity=q)


def network_overlap(a: Graph, b: Graph) -> int:
    """Number of user nodes present in both graphs."""
    users_a = {node for node in a.nodes() if a.kind(node) == USER}
    users_b = {node for node in b.nodes() if b.kind(node) == USER}
    return len(users_a & users_b)


# ---------------------------------------------------------------------------
# Community summaries
# ---------------------------------------------------------------------------

@dataclass
class CommunitySummary:
    community: int
    n_users: int
    n_trends: int
    first_seen: Optional[Timestamp]
    last_seen: Optional[Timestamp]
    dormancy_gaps: list[tuple[int, Duration]]
    dormant_users: list[int]


def community_summary(
    partition: Partition,
    instances: Union[Mapping[tuple[date, str], TrendInstance], Iterable[TrendInstance]],
    attack_times: Mapping[int, Iterable[Timestamp]],
    dormancy_threshold: Duration = Duration.days(365),
) -> list[CommunitySummary]:
    """Sizes, first/last attack participation, and per-user dormancy gaps.

    A user's dormancy gap is the absolute difference between their last
    attack and their last undeleted tweet anywhere in the corpus; gaps above
    the threshold flag the user as dormant.
    """
    if isinstance(instances, Mapping):
        items = list(instances.values())
    else:
        items = list(instances)

    last_undeleted: dict[int, Timestamp] = {}
    for instance in items:
        for tweet in instance.tweets:
            if tweet.id in instance.deletions:
                continue
            prior = last_undeleted.get(tweet.user_id)
            if prior is None or tweet.created_at > prior:
                last_undeleted[tweet.user_id] = tweet.created_at

    members: dict[int, list[Node]] = {}
    for node, community in partition.assignment.items():
        members.setdefault(community, []).append(node)

    summaries = []
    for community in sorted(members):
        nodes = members[community]
        users = [node[1] for node in nodes if node[0] == USER]
        n_trends = sum(1 for node in nodes if node[0] == TREND)
        first_seen: Optional[Timestamp] = None
        last_seen: Optional[Timestamp] = None
        last_attack: dict[int, Timestamp] = {}
        for user in users:
            for ts in attack_times.get(user, ()):
                if first_seen is None or ts < first_seen:
                    first_seen = ts
                if last_seen is None or ts > last_seen:
                    last_seen = ts
                prior = last_attack.get(user)
                if prior is None or ts > prior:
                    last_attack[user] = ts
        gaps = []
        dormant = []
        for user in sorted(last_attack):
            undeleted_at = last_undeleted.get(user)
            if undeleted_at is None:
                continue
            gap = abs(undeleted_at - last_attack[user])
            gaps.append((user, gap))
            if gap > dormancy_threshold:
                dormant.append(user)
        summaries.append(
            CommunitySummary(
                community=community,
                n_users=len(users),
                n_trends=n_trends,
                first_seen=first_seen,
                last_seen=last_seen,
                dormancy_gaps=gaps,
                dormant_users=dormant,
            )
        )
    return summaries


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def _render_node(node: Node) -> str:
    return str(node[1])


def write_edge_csv(handle, graph: Graph) -> None:
    writer = csv.writer(handle)
    writer.writerow(["source", "target", "weight", "source_kind", "target_kind"])
    for u, v, w in graph.edges():
        writer.writerow([_render_node(u), _render_node(v), w, graph.kind(u), graph.kind(v)])


def write_partition_csv(handle, partition: Partition) -> None:
    writer = csv.writer(handle)
    writer.writerow(["node", "community"])
    for node in sorted(partition.assignment, key=_node_sort_key):
        writer.writerow([f"{node[0]}:{node[1]}", partition.assignment[node]])
