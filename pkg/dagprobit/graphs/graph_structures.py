import enum

from dagprobit.errors import ValidationError
from dagprobit.graphs.dag import RESPONSE, Dag


class DagStructure(enum.Enum):
    empty = "empty"
    naive = "naive"
    chain = "chain"
    confounded = "confounded"
    complete = "complete"


def empty(q):
    return []


def naive(q):
    # every covariate is a parent of the response, no other edges
    return [(j, RESPONSE) for j in range(1, q)]


def chain(q):
    return [(j, j - 1) for j in range(1, q)]


def confounded(q):
    # 2 -> 1 -> 0 with 2 -> 0: vertex 2 confounds the effect of 1 on the response
    if q < 3:
        raise ValidationError("the confounded structure needs at least 3 vertices")
    return [(2, 1), (1, RESPONSE), (2, RESPONSE)]


def complete(q):
    return [(u, v) for u in range(q) for v in range(u)]


structure_map = {
    DagStructure.empty: empty,
    DagStructure.naive: naive,
    DagStructure.chain: chain,
    DagStructure.confounded: confounded,
    DagStructure.complete: complete,
}


def make_dag(structure: DagStructure, q: int) -> Dag:
    if isinstance(structure, str):
        structure = DagStructure(structure)
    return Dag(q, structure_map[structure](q))
