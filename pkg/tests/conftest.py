import pytest

from necsuf.blackbox import ExprModel, OutcomeSpec
from necsuf.graph import graph_from_json
from necsuf.oracle import fixture_f1


@pytest.fixture(scope="session")
def f1():
    return fixture_f1()


@pytest.fixture(scope="session")
def f1_joint(f1):
    return f1.exhaustive_joint()


@pytest.fixture(scope="session")
def f1_outcome(f1):
    return OutcomeSpec.from_schema(f1.graph.schema, "O", 1)


@pytest.fixture(scope="session")
def f1_box_xz(f1, f1_outcome):
    """Monotone decision function reading both of the outcome's parents."""
    return ExprModel("if X == 1 or Z == 1 then 1 else 0", ["X", "Z"], f1_outcome)


@pytest.fixture(scope="session")
def f1_box_x(f1, f1_outcome):
    """Threshold decision function reading only X."""
    return ExprModel("if X >= 1 then 1 else 0", ["X"], f1_outcome)


@pytest.fixture
def chain_graph():
    return graph_from_json(
        {
            "variables": [
                {"name": "A", "domain": [0, 1]},
                {"name": "B", "domain": [0, 1]},
                {"name": "C", "domain": [0, 1]},
            ],
            "edges": [["A", "B"], ["B", "C"]],
        }
    )


@pytest.fixture
def collider_graph():
    return graph_from_json(
        {
            "variables": [
                {"name": "A", "domain": [0, 1]},
                {"name": "B", "domain": [0, 1]},
                {"name": "C", "domain": [0, 1]},
            ],
            "edges": [["A", "B"], ["C", "B"]],
        }
    )


@pytest.fixture
def confounder_graph():
    return graph_from_json(
        {
            "variables": [
                {"name": "Z", "domain": [0, 1]},
                {"name": "X", "domain": [0, 1]},
                {"name": "Y", "domain": [0, 1]},
            ],
            "edges": [["Z", "X"], ["Z", "Y"], ["X", "Y"]],
        }
    )


@pytest.fixture
def loan_graph():
    """Five-variable loan diagram: demographics into duration, proxies and
    the decision."""
    return graph_from_json(
        {
            "variables": [
                {"name": "G", "domain": [0, 1]},
                {"name": "A", "domain": [0, 1]},
                {"name": "D", "domain": [0, 1]},
                {"name": "R", "domain": [0, 1]},
                {"name": "O", "domain": [1, 0], "ordered": True},
            ],
            "edges": [
                ["G", "D"],
                ["G", "O"],
                ["A", "D"],
                ["A", "O"],
                ["D", "O"],
                ["R", "O"],
                ["G", "R"],
                ["A", "R"],
            ],
        }
    )
