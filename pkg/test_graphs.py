import networkx as nx
import numpy as np
import pytest

from dagprobit.errors import InvalidOperatorError, ValidationError
from dagprobit.graphs.dag import (
    RESPONSE,
    Dag,
    DagOperator,
    OperatorType,
    apply_operator,
    count_valid_operators,
    enumerate_dags,
    is_acyclic,
    is_valid_operator,
    reachability,
    valid_operators,
)
from dagprobit.graphs.graph_structures import DagStructure, make_dag


def op(kind, u, v):
    return DagOperator(OperatorType(kind), (u, v))


def reverse_of(o: DagOperator) -> DagOperator:
    u, v = o.edge
    if o.kind == OperatorType.insert:
        return op("delete", u, v)
    if o.kind == OperatorType.delete:
        return op("insert", u, v)
    return op("reverse", v, u)


def test_is_acyclic():
    assert is_acyclic(Dag(2))
    assert not is_acyclic(Dag(3, [(1, 2), (2, 1)], check=False))
    assert is_acyclic(Dag(3, [(2, 1), (1, 0), (2, 0)]))


def test_dag_rejects_invalid_graphs():
    with pytest.raises(ValidationError):
        Dag(3, [(0, 1)])
    with pytest.raises(ValidationError):
        Dag(3, [(1, 2), (2, 1)])
    with pytest.raises(ValidationError):
        Dag(3, [(1, 1)])
    with pytest.raises(ValidationError):
        Dag(3, [(1, 3)])
    with pytest.raises(ValidationError):
        Dag(0)


def test_valid_operators_examples():
    assert set(valid_operators(Dag(2))) == {op("insert", 1, 0)}
    assert set(valid_operators(Dag(3))) == {
        op("insert", 1, 0),
        op("insert", 2, 0),
        op("insert", 1, 2),
        op("insert", 2, 1),
    }
    assert set(valid_operators(Dag(2, [(1, 0)]))) == {op("delete", 1, 0)}


def test_valid_operators_never_cycle():
    # 3 -> 2 -> 1 path forbids inserting 1 -> 3 and reversing 3 -> 1
    dag = Dag(4, [(3, 2), (2, 1), (3, 1)])
    ops = set(valid_operators(dag))
    assert op("insert", 1, 3) not in ops
    assert op("reverse", 3, 1) not in ops
    assert op("reverse", 3, 2) in ops
    assert op("reverse", 2, 1) in ops


def test_apply_operator_examples():
    assert apply_operator(Dag(3), op("insert", 1, 0)) == Dag(3, [(1, 0)])
    assert apply_operator(Dag(3, [(1, 0)]), op("delete", 1, 0)) == Dag(3)
    assert apply_operator(Dag(3, [(1, 2)]), op("reverse", 1, 2)) == Dag(3, [(2, 1)])


def test_apply_operator_rejects_invalid():
    with pytest.raises(InvalidOperatorError):
        apply_operator(Dag(2, [(1, 0)]), op("reverse", 1, 0))
    with pytest.raises(InvalidOperatorError):
        apply_operator(Dag(2), op("delete", 1, 0))
    with pytest.raises(InvalidOperatorError):
        apply_operator(Dag(2), op("insert", 0, 1))
    assert not is_valid_operator(Dag(2), op("insert", 1, 1))


def test_parents_and_family():
    dag = Dag(3, [(1, 0), (2, 0)])
    assert list(dag.parents(0)) == [1, 2]
    assert list(dag.family(0)) == [0, 1, 2]
    assert list(Dag(3).parents(1)) == []
    assert list(Dag(3).family(1)) == [1]
    dag = Dag(3, [(2, 1)])
    assert list(dag.family(1)) == [1, 2]
    assert list(dag.children(2)) == [1]
    with pytest.raises(ValidationError):
        dag.parents(3)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_operators_exhaustive(q):
    for dag in enumerate_dags(q):
        ops = valid_operators(dag)
        assert count_valid_operators(dag) == len(ops)
        for o in ops:
            new = apply_operator(dag, o)
            new.check()
            assert not new.adj[RESPONSE].any()
            assert reverse_of(o) in set(valid_operators(new))
            assert apply_operator(new, reverse_of(o)) == dag


def test_operators_match_brute_force():
    # every single-edge change that stays a valid DAG is offered, nothing else
    for dag in enumerate_dags(4):
        expected = set()
        for u in range(4):
            for v in range(4):
                if u == v:
                    continue
                if dag.adj[u, v]:
                    candidates = [op("delete", u, v), op("reverse", u, v)]
                elif not dag.adj[v, u]:
                    candidates = [op("insert", u, v)]
                else:
                    candidates = []
                for c in candidates:
                    new = apply_operator(dag, c, validate=False)
                    if new.is_acyclic() and not new.adj[RESPONSE].any():
                        expected.add(c)
        assert set(valid_operators(dag)) == expected


def test_max_edges_cap():
    dag = Dag(3, [(1, 0)])
    kinds = {o.kind for o in valid_operators(dag, max_edges=1)}
    assert OperatorType.insert not in kinds
    assert OperatorType.delete in kinds
    assert count_valid_operators(dag, max_edges=2) == len(valid_operators(dag))


def test_enumerate_dags_counts():
    assert len(enumerate_dags(2)) == 2
    assert len(enumerate_dags(3)) == 12
    assert len(set(enumerate_dags(3))) == 12


def test_reachability():
    dag = Dag(4, [(3, 2), (2, 1)])
    reach = reachability(dag)
    assert reach[3, 1] and reach[3, 2] and reach[2, 1]
    assert not reach[1, 3]
    assert not reach.diagonal().any()


def test_topological_order():
    dag = Dag(4, [(3, 2), (2, 1), (1, 0), (3, 0)])
    order = dag.topological_order()
    position = {v: i for i, v in enumerate(order)}
    for u, v in dag.edges:
        assert position[u] < position[v]


def test_networkx_round_trip():
    dag = make_dag(DagStructure.confounded, 4)
    graph = dag.to_networkx()
    assert isinstance(graph, nx.DiGraph)
    assert Dag.from_networkx(graph) == dag


def test_edge_list_round_trip(tmp_path):
    dag = Dag(5, [(4, 0), (3, 2), (2, 0)])
    path = tmp_path / "dag.txt"
    dag.to_edge_list(path)
    text = path.read_text().splitlines()
    assert text[0] == "# q 5"
    assert "5 1" in text
    assert Dag.from_edge_list(path) == dag


def test_edge_list_rejects_bad_files(tmp_path):
    path = tmp_path / "dag.txt"
    for text in ("# q 4\n2 x\n", "# q four\n2 1\n", "2 1 3\n"):
        path.write_text(text)
        with pytest.raises(ValidationError):
            Dag.from_edge_list(path)
    with pytest.raises(ValidationError):
        Dag.from_edge_list(tmp_path / "absent.txt")


def test_adjacency_csv_round_trip(tmp_path):
    dag = make_dag("naive", 4)
    path = tmp_path / "adj.csv"
    dag.to_adjacency_csv(path)
    assert Dag.from_adjacency_csv(path) == dag


def test_skeleton_size():
    dag = Dag(4, [(3, 2), (2, 1), (1, 0)])
    assert dag.n_edges == 3
    assert dag.skeleton_size == 3


def test_named_structures():
    for structure in DagStructure:
        dag = make_dag(structure, 5)
        dag.check()
    assert make_dag("naive", 4).edges == [(1, 0), (2, 0), (3, 0)]
    assert make_dag("complete", 4).n_edges == 6
    with pytest.raises(ValidationError):
        make_dag("confounded", 2)


def test_dag_is_immutable():
    dag = Dag(3, [(1, 0)])
    with pytest.raises(ValueError):
        dag.adj[2, 0] = True
    assert hash(dag) == hash(Dag(3, [(1, 0)]))
    assert np.array_equal(dag.parents(0), [1])
