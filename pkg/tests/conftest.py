import numpy as np
import pytest

from safsim.datapath import SaConfig
from safsim.fixtures import gen_fixture
from safsim.modelio import LayerSpec, ModelSpec
from safsim.quant import make_identity_lut, make_relu_lut

IDENT_TABLE = np.asarray(make_identity_lut().table, dtype=np.int8)
RELU_TABLE = np.asarray(make_relu_lut().table, dtype=np.int8)


def make_fc_model(k, n, weights, bias, shift, table=None, name="tiny"):
    """Single fc-layer model wrapping explicit weight/bias arrays."""
    layer = LayerSpec(kind="fc", in_shape=(k,), out_shape=(n,),
                      weights=np.asarray(weights, dtype=np.int8).reshape(k, n),
                      bias=np.asarray(bias, dtype=np.int32).reshape(n),
                      shift=shift,
                      nlf_table=IDENT_TABLE if table is None else table)
    return ModelSpec(name=name, layers=[layer])


@pytest.fixture(scope="session")
def fc3_fixture():
    return gen_fixture("fc3", 1)


@pytest.fixture(scope="session")
def lenet_fixture():
    return gen_fixture("lenet-like", 1)


@pytest.fixture(scope="session")
def sa22():
    return SaConfig(2, 2)
