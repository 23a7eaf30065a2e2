import numpy as np
import pytest

from trishare import FixedCodec, run_simulated, share_tensor


@pytest.fixture(scope="session")
def codec():
    return FixedCodec()


def sim(prog, args, seed=0):
    """Run a three-party program in the simulator; returns RunResult."""
    return run_simulated(prog, args, seed=seed)


def sim_open(prog, args, seed=0):
    """Run and require all parties to open identical values."""
    res = run_simulated(prog, args, seed=seed)
    for o in res.outputs[1:]:
        assert np.array_equal(o, res.outputs[0]), "parties opened different values"
    return res.outputs[0], res


def share3(values, rng):
    return share_tensor(values, rng)
