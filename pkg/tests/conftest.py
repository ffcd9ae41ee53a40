# tests/conftest.py
import pytest

from blueprints.compose import NetworkSpec, compose_bnn
from blueprints.segments import gen_function_mapper
from blueprints.tables import TERNARY, table_sign
from net.model import NetBuilder


@pytest.fixture(scope="session")
def xor_spec():
    return NetworkSpec()


@pytest.fixture(scope="session")
def xor_net(xor_spec):
    return compose_bnn(xor_spec, instrument=True, budget=False)


@pytest.fixture
def sign_segment():
    return gen_function_mapper("sign", table_sign(TERNARY))


@pytest.fixture
def pipeline_net():
    """p0 -> t0 -> p1 -> t1 -> p2, with t1 also reading r."""
    builder = NetBuilder()
    builder.add_place("p0", marked=True)
    builder.add_place("p1")
    builder.add_place("p2")
    builder.add_place("r", marked=True)
    builder.add_transition("t0", consume=["p0"], produce=["p1"])
    builder.add_transition("t1", consume=["p1"], produce=["p2"], read=["r"])
    return builder.build()


@pytest.fixture
def unsafe_net():
    """Two producers feeding one place."""
    builder = NetBuilder()
    builder.add_place("a", marked=True)
    builder.add_place("b", marked=True)
    builder.add_place("c")
    builder.add_transition("ta", consume=["a"], produce=["c"])
    builder.add_transition("tb", consume=["b"], produce=["c"])
    return builder.build()
