from dagprobit.graphs.dag import (
    RESPONSE,
    Dag,
    DagOperator,
    OperatorType,
    apply_operator,
    count_valid_operators,
    enumerate_dags,
    is_acyclic,
    valid_operators,
)
from dagprobit.graphs.graph_structures import DagStructure, make_dag
