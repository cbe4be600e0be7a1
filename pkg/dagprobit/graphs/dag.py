import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import networkx as nx
import numpy as np

from dagprobit.errors import InvalidOperatorError, ValidationError

# Vertex 0 is the latent response. It may have parents but never children.
RESPONSE = 0


class Dag:
    """
    Directed acyclic graph on the vertices 0, ..., q-1.

    The structure is held as a dense boolean adjacency matrix, `adj[u, v]`
    being True when u -> v, together with per-node parent arrays. Instances
    are immutable; local moves return new graphs (see `apply_operator`).
    Pass `check=False` to build a graph that may violate the DAG invariants,
    e.g. to query `is_acyclic` on an arbitrary edge set.
    """

    def __init__(
        self,
        q: int,
        edges: Iterable[Tuple[int, int]] = (),
        adjacency: np.ndarray = None,
        check: bool = True,
    ):
        if q < 1:
            raise ValidationError(f"a DAG needs at least one vertex, got q={q}")
        if adjacency is not None:
            adj = np.array(adjacency, dtype=bool)
            if adj.shape != (q, q):
                raise ValidationError(
                    f"adjacency matrix has shape {adj.shape}, expected {(q, q)}"
                )
        else:
            adj = np.zeros((q, q), dtype=bool)
            for u, v in edges:
                u, v = int(u), int(v)
                if not (0 <= u < q and 0 <= v < q):
                    raise ValidationError(f"edge {(u, v)} out of range for q={q}")
                if u == v:
                    raise ValidationError(f"self loop on vertex {u}")
                adj[u, v] = True
        adj.setflags(write=False)
        self.q = q
        self.adj = adj
        self._parents = []
        for j in range(q):
            pa = np.flatnonzero(adj[:, j])
            pa.setflags(write=False)
            self._parents.append(pa)
        if check:
            self.check()

    def check(self):
        if np.diag(self.adj).any():
            raise ValidationError("self loops are not allowed")
        if (self.adj & self.adj.T).any():
            raise ValidationError("both u -> v and v -> u are present")
        if self.adj[RESPONSE].any():
            raise ValidationError("the response vertex cannot have children")
        if not self.is_acyclic():
            raise ValidationError("graph contains a directed cycle")

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.to_networkx())

    def _check_vertex(self, j: int):
        if not 0 <= j < self.q:
            raise ValidationError(f"vertex {j} out of range for q={self.q}")

    def parents(self, j: int) -> np.ndarray:
        self._check_vertex(j)
        return self._parents[j]

    def family(self, j: int) -> np.ndarray:
        """
        Returns j followed by its parents. Node j always comes first.
        """
        self._check_vertex(j)
        return np.concatenate([[j], self._parents[j]]).astype(int)

    def children(self, j: int) -> np.ndarray:
        self._check_vertex(j)
        return np.flatnonzero(self.adj[j])

    @property
    def edges(self) -> List[Tuple[int, int]]:
        return [(int(u), int(v)) for u, v in np.argwhere(self.adj)]

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum())

    @property
    def skeleton_size(self) -> int:
        # at most one orientation per pair, so edges and skeleton coincide
        return int((self.adj | self.adj.T).sum() // 2)

    def topological_order(self) -> List[int]:
        return list(nx.topological_sort(self.to_networkx()))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.q))
        graph.add_edges_from(self.edges)
        return graph

    @classmethod
    def from_networkx(cls, graph: nx.DiGraph, q: int = None) -> "Dag":
        if q is None:
            q = graph.number_of_nodes()
        return cls(q, graph.edges())

    @classmethod
    def empty(cls, q: int) -> "Dag":
        return cls(q)

    def to_edge_list(self, path):
        """
        Writes one `u v` pair per line with 1-based vertices. The first line
        is a `# q <count>` header so isolated vertices survive a round trip.
        """
        with open(path, "w") as f:
            f.write(f"# q {self.q}\n")
            for u, v in self.edges:
                f.write(f"{u + 1} {v + 1}\n")

    @classmethod
    def from_edge_list(cls, path, q: int = None) -> "Dag":
        edges = []
        try:
            f = open(path)
        except OSError as e:
            raise ValidationError(f"cannot read edge list {path}: {e}")
        with f:
            for line_no, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    tokens = line[1:].split()
                    if len(tokens) == 2 and tokens[0] == "q" and q is None:
                        try:
                            q = int(tokens[1])
                        except ValueError:
                            raise ValidationError(f"line {line_no}: bad vertex count {tokens[1]!r}")
                    continue
                tokens = line.split()
                if len(tokens) != 2:
                    raise ValidationError(f"line {line_no}: expected 'u v', got {line!r}")
                try:
                    u, v = int(tokens[0]), int(tokens[1])
                except ValueError:
                    raise ValidationError(
                        f"line {line_no}: vertices must be integers, got {line!r}"
                    )
                edges.append((u - 1, v - 1))
        if q is None:
            q = max([max(e) for e in edges], default=0) + 1
        return cls(q, edges)

    def to_adjacency_csv(self, path):
        np.savetxt(path, self.adj.astype(int), fmt="%d", delimiter=",")

    @classmethod
    def from_adjacency_csv(cls, path) -> "Dag":
        adj = np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=int))
        return cls(adj.shape[0], adjacency=adj != 0)

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash((self.q, self.adj.tobytes()))

    def __repr__(self):
        return f"Dag(q={self.q}, edges={self.edges})"


def is_acyclic(dag: Dag) -> bool:
    return dag.is_acyclic()


class OperatorType(enum.Enum):
    insert = "insert"
    delete = "delete"
    reverse = "reverse"


@dataclass(frozen=True)
class DagOperator:
    kind: OperatorType
    edge: Tuple[int, int]

    def changed_nodes(self) -> Tuple[int, ...]:
        """
        Vertices whose parent set is modified. A reversal is a deletion of
        u -> v followed by an insertion of v -> u, so it touches both ends.
        """
        u, v = self.edge
        if self.kind == OperatorType.reverse:
            return (v, u)
        return (v,)


def reachability(dag: Dag) -> np.ndarray:
    """
    Boolean matrix whose (u, v) entry is True when a directed path of length
    at least one leads from u to v.
    """
    reach = np.zeros((dag.q, dag.q), dtype=bool)
    for u in reversed(dag.topological_order()):
        children = dag.adj[u]
        reach[u] = children | reach[children].any(axis=0)
    return reach


def _operator_masks(dag: Dag, max_edges: int = None):
    adj = dag.adj
    reach = reachability(dag)
    off_diagonal = ~np.eye(dag.q, dtype=bool)

    insert = off_diagonal & ~adj & ~adj.T & ~reach.T
    insert[RESPONSE, :] = False
    if max_edges is not None and dag.n_edges >= max_edges:
        insert[:] = False

    # u -> v can be reversed unless another path leads from u to v
    indirect = (adj.astype(np.int64) @ reach.astype(np.int64)) > 0
    reverse = adj & ~indirect
    reverse[:, RESPONSE] = False
    return insert, adj, reverse


def valid_operators(dag: Dag, max_edges: int = None) -> List[DagOperator]:
    """
    Enumerates every insert, delete and reverse move that keeps the graph
    acyclic with the response childless. The order is deterministic.
    """
    masks = _operator_masks(dag, max_edges)
    ops = []
    for kind, mask in zip(OperatorType, masks):
        ops.extend(DagOperator(kind, (int(u), int(v))) for u, v in np.argwhere(mask))
    return ops


def count_valid_operators(dag: Dag, max_edges: int = None) -> int:
    return int(sum(mask.sum() for mask in _operator_masks(dag, max_edges)))


def is_valid_operator(dag: Dag, op: DagOperator, max_edges: int = None) -> bool:
    u, v = op.edge
    if not (0 <= u < dag.q and 0 <= v < dag.q) or u == v:
        return False
    masks = dict(zip(OperatorType, _operator_masks(dag, max_edges)))
    return bool(masks[op.kind][u, v])


def apply_operator(
    dag: Dag, op: DagOperator, validate: bool = True, max_edges: int = None
) -> Dag:
    if validate and not is_valid_operator(dag, op, max_edges):
        raise InvalidOperatorError(f"{op.kind.value} {op.edge} is not valid for {dag}")
    u, v = op.edge
    adj = dag.adj.copy()
    if op.kind == OperatorType.insert:
        adj[u, v] = True
    elif op.kind == OperatorType.delete:
        adj[u, v] = False
    else:
        adj[u, v] = False
        adj[v, u] = True
    return Dag(dag.q, adjacency=adj, check=False)


def enumerate_dags(q: int) -> List[Dag]:
    """
    Every DAG on q vertices in which the response has no children.
    Only practical for q <= 4.
    """
    pairs = list(itertools.combinations(range(q), 2))
    dags = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (u, v), state in zip(pairs, states):
            if state == 1:
                edges.append((u, v))
            elif state == 2:
                edges.append((v, u))
        if any(tail == RESPONSE for tail, _ in edges):
            continue
        dag = Dag(q, edges, check=False)
        if dag.is_acyclic():
            dags.append(dag)
    return dags
