"""Sparsity graph of the lifted problem and its clique-tree decomposition.

Lifting a rank-r polynomial in n variables introduces the partial-product
variables t_{l,i} next to the original x_i.  Each recursion constraint
couples only {t_{l,i}, t_{l,i-1}, x_i}, so the interaction graph over the
n(r+1) lifted variables is a ladder of r chains glued through the x column.
That graph has treewidth min(n, r+1): eliminating it column by column (rows
first within each column) when r+1 <= n, or row by row when n < r+1, yields
a perfect elimination ordering whose largest clique has min(n, r+1) + 1
vertices.  The clique tree built here realizes exactly that width, which is
what keeps the moment-relaxation blocks independent of n.

Vertices are plain tuples: ("x", i) for original variables and ("t", l, i)
for partial products, with 1-based i and l.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "xvar",
    "tvar",
    "var_label",
    "var_sort_key",
    "SparsityGraph",
    "CliqueTree",
    "build_lr_graph",
    "peo_order",
    "min_degree_order",
    "chordal_extend",
    "clique_tree",
    "verify_rip",
    "graph_to_dot",
    "tree_to_dot",
]

Var = tuple


def xvar(i: int) -> Var:
    return ("x", i)


def tvar(l: int, i: int) -> Var:
    return ("t", l, i)


def var_label(v: Var) -> str:
    if v[0] == "x":
        return f"x_{v[1]}"
    return f"t_{v[1]}_{v[2]}"


def var_sort_key(v: Var):
    # canonical identity order: x_1 < ... < x_n < t_{1,1} < ... < t_{r,n}
    return (0, v[1], 0) if v[0] == "x" else (1, v[1], v[2])


@dataclass
class SparsityGraph:
    """Undirected graph with an explicit vertex order and adjacency sets."""

    vertices: tuple[Var, ...]
    adj: dict[Var, set[Var]] = field(default_factory=dict)

    def __post_init__(self):
        for v in self.vertices:
            self.adj.setdefault(v, set())

    @classmethod
    def from_edges(cls, vertices, edges) -> "SparsityGraph":
        g = cls(tuple(vertices))
        for a, b in edges:
            g.add_edge(a, b)
        return g

    def add_edge(self, a: Var, b: Var):
        if a == b:
            raise ValueError("self-loops are not allowed")
        if a not in self.adj or b not in self.adj:
            raise ValueError("edge endpoints must be existing vertices")
        self.adj[a].add(b)
        self.adj[b].add(a)

    def has_edge(self, a: Var, b: Var) -> bool:
        return b in self.adj.get(a, ())

    def edges(self) -> set[frozenset]:
        return {frozenset((a, b)) for a, nbrs in self.adj.items() for b in nbrs}

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adj.values()) // 2

    def copy(self) -> "SparsityGraph":
        g = SparsityGraph(self.vertices)
        for v, nbrs in self.adj.items():
            g.adj[v] = set(nbrs)
        return g


@dataclass
class CliqueTree:
    """Maximal cliques of a chordal graph plus a spanning tree over them.

    separators[(a, b)] is the bag intersection for each tree edge, with
    (a, b) stored a < b.
    """

    cliques: list[frozenset]
    tree_edges: list[tuple[int, int]]
    separators: dict[tuple[int, int], frozenset]

    @property
    def n_cliques(self) -> int:
        return len(self.cliques)

    @property
    def max_clique_size(self) -> int:
        return max(len(c) for c in self.cliques)

    def neighbors(self, a: int) -> list[int]:
        out = []
        for i, j in self.tree_edges:
            if i == a:
                out.append(j)
            elif j == a:
                out.append(i)
        return out


def build_lr_graph(r: int, n: int) -> SparsityGraph:
    """Interaction graph of the lifted problem for rank r and n variables.

    Edges come from the recursion constraints only: {t_{l,1}, x_1} for the
    first column and the triangle {t_{l,i}, t_{l,i-1}, x_i} for i >= 2.
    Single-variable box constraints contribute no edges.
    """
    if r < 1 or n < 1:
        raise ValueError("need r >= 1 and n >= 1")
    vertices = [xvar(i) for i in range(1, n + 1)]
    vertices += [tvar(l, i) for l in range(1, r + 1) for i in range(1, n + 1)]
    g = SparsityGraph(tuple(vertices))
    for l in range(1, r + 1):
        g.add_edge(tvar(l, 1), xvar(1))
        for i in range(2, n + 1):
            g.add_edge(tvar(l, i), tvar(l, i - 1))
            g.add_edge(tvar(l, i), xvar(i))
            g.add_edge(tvar(l, i - 1), xvar(i))
    return g


def peo_order(r: int, n: int) -> list[Var]:
    """Perfect elimination ordering achieving width min(n, r+1).

    For r+1 <= n:  column-major from the last column down, partial products
    first within a column (ascending l), then the column's x.
    For n < r+1:   row-major, each t row right to left, all x last.
    """
    if r < 1 or n < 1:
        raise ValueError("need r >= 1 and n >= 1")
    order: list[Var] = []
    if r + 1 <= n:
        for i in range(n, 0, -1):
            order.extend(tvar(l, i) for l in range(1, r + 1))
            order.append(xvar(i))
    else:
        for l in range(1, r + 1):
            order.extend(tvar(l, i) for i in range(n, 0, -1))
        order.extend(xvar(i) for i in range(n, 0, -1))
    return order


def min_degree_order(g: SparsityGraph) -> list[Var]:
    """Greedy minimum-degree elimination order.

    Heuristic fallback for graphs that do not come from the lifting; it
    carries no width guarantee.  Ties break on the canonical vertex order.
    """
    work = g.copy()
    remaining = set(work.vertices)
    order = []
    while remaining:
        v = min(remaining, key=lambda u: (len(work.adj[u] & remaining), var_sort_key(u)))
        nbrs = [u for u in work.adj[v] if u in remaining]
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1 :]:
                work.adj[a].add(b)
                work.adj[b].add(a)
        remaining.remove(v)
        order.append(v)
    return order


def chordal_extend(g: SparsityGraph, order: list[Var]) -> SparsityGraph:
    """Run the elimination game along `order` and return g plus all fill
    edges; the result is chordal and `order` is a perfect elimination
    ordering for it."""
    if sorted(order, key=var_sort_key) != sorted(g.vertices, key=var_sort_key):
        raise ValueError("order must be a permutation of the graph vertices")
    out = g.copy()
    pos = {v: k for k, v in enumerate(order)}
    for v in order:
        later = [u for u in out.adj[v] if pos[u] > pos[v]]
        for i, a in enumerate(later):
            for b in later[i + 1 :]:
                if not out.has_edge(a, b):
                    out.add_edge(a, b)
    return out


def _elimination_cliques(g: SparsityGraph, order: list[Var]) -> list[frozenset]:
    """Clique-of-elimination for each vertex; raises if `order` is not a
    perfect elimination ordering of g (i.e. any elimination needs fill)."""
    pos = {v: k for k, v in enumerate(order)}
    if len(pos) != len(g.vertices) or any(v not in pos for v in g.vertices):
        raise ValueError("order must be a permutation of the graph vertices")
    cliques = []
    for v in order:
        later = [u for u in g.adj[v] if pos[u] > pos[v]]
        for i, a in enumerate(later):
            for b in later[i + 1 :]:
                if not g.has_edge(a, b):
                    raise ValueError(
                        f"not a perfect elimination ordering: eliminating "
                        f"{var_label(v)} leaves non-adjacent {var_label(a)}, {var_label(b)}"
                    )
        cliques.append(frozenset([v, *later]))
    return cliques


def clique_tree(chordal: SparsityGraph, order: list[Var]) -> CliqueTree:
    """Maximal cliques from the elimination process plus a maximum-weight
    spanning tree on separator sizes, which guarantees the running
    intersection property."""
    candidates = _elimination_cliques(chordal, order)
    # dedupe preserving first-elimination order, then drop non-maximal bags
    seen: dict[frozenset, int] = {}
    for c in candidates:
        if c not in seen:
            seen[c] = len(seen)
    bags = list(seen)
    member: dict[Var, list[int]] = {}
    for idx, c in enumerate(bags):
        for v in c:
            member.setdefault(v, []).append(idx)
    maximal = []
    for idx, c in enumerate(bags):
        host = min((member[v] for v in c), key=len)
        if any(j != idx and c < bags[j] for j in host):
            continue
        maximal.append(c)
    cliques = maximal

    # candidate tree edges: bag pairs with non-empty intersection
    member = {}
    for idx, c in enumerate(cliques):
        for v in c:
            member.setdefault(v, []).append(idx)
    pairs: set[tuple[int, int]] = set()
    for ids in member.values():
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                pairs.add((a, b) if a < b else (b, a))
    weights = {(a, b): len(cliques[a] & cliques[b]) for a, b in pairs}

    parent = list(range(len(cliques)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree_edges = []
    for (a, b), w in sorted(weights.items(), key=lambda kv: (-kv[1], kv[0])):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            tree_edges.append((a, b))
    # a disconnected input graph yields a forest; join components with
    # empty separators so downstream code always sees one tree
    for b in range(1, len(cliques)):
        if find(b) != find(0):
            parent[find(b)] = find(0)
            tree_edges.append((0, b))
    separators = {e: cliques[e[0]] & cliques[e[1]] for e in tree_edges}
    return CliqueTree(cliques, tree_edges, separators)


def verify_rip(t: CliqueTree) -> bool:
    """True iff, for every vertex, the bags containing it form a connected
    subtree of the clique tree."""
    adj: dict[int, list[int]] = {i: [] for i in range(t.n_cliques)}
    for a, b in t.tree_edges:
        adj[a].append(b)
        adj[b].append(a)
    vertices = set().union(*t.cliques) if t.cliques else set()
    for v in vertices:
        holding = [i for i, c in enumerate(t.cliques) if v in c]
        if not holding:
            return False
        reach = {holding[0]}
        stack = [holding[0]]
        allowed = set(holding)
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt in allowed and nxt not in reach:
                    reach.add(nxt)
                    stack.append(nxt)
        if reach != allowed:
            return False
    return True


def graph_to_dot(g: SparsityGraph, name: str = "sparsity") -> str:
    lines = [f"graph {name} {{"]
    for v in g.vertices:
        lines.append(f'  "{var_label(v)}";')
    done = set()
    for v in g.vertices:
        for u in sorted(g.adj[v], key=var_sort_key):
            key = frozenset((v, u))
            if key not in done:
                done.add(key)
                lines.append(f'  "{var_label(v)}" -- "{var_label(u)}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_to_dot(t: CliqueTree, name: str = "cliquetree") -> str:
    lines = [f"graph {name} {{", "  node [shape=box];"]
    for i, c in enumerate(t.cliques):
        label = ", ".join(var_label(v) for v in sorted(c, key=var_sort_key))
        lines.append(f'  b{i} [label="{{{label}}}"];')
    for a, b in t.tree_edges:
        sep = len(t.separators[(a, b) if a < b else (b, a)]) if t.separators else 0
        lines.append(f'  b{a} -- b{b} [label="{sep}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
