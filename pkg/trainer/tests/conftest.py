import os
import shutil

import pytest

DATA_ROOT = os.environ.get("SAFTRAIN_DATA", "data")


def simulator_cli() -> str | None:
    return shutil.which("safsim")


def dataset_ready(name: str) -> bool:
    from saftrain.data import dataset_available

    return dataset_available(name, DATA_ROOT)


needs_simulator = pytest.mark.skipif(
    simulator_cli() is None, reason="safsim CLI not installed")
