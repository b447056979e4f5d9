import numpy as np
import pytest

from voltsizer import CircuitParams, DeviceSizes

# experiment parameter regime: 1 kW per-unit base
P_LO = 2150.0
P_HI = 3650.0


@pytest.fixture(scope="session")
def params():
    return CircuitParams(r=1.1e-5, x=1.1e-5, f0=1.0, v0=1.0, phi=0.2,
                         epsilon=0.02)


@pytest.fixture(scope="session")
def regime_rng():
    return np.random.default_rng(20260810)


def draw_regime_instance(rng, sizes=None):
    """One random (p, c_total draw pieces, qf) inside the experiment regime."""
    p = rng.uniform(P_LO, P_HI)
    if sizes is None:
        c0 = rng.uniform(0.0, 4000.0)
        cs_max = rng.uniform(0.0, 2000.0)
        k_levels = int(rng.integers(1, 5))
        qf_max = rng.uniform(0.0, 2000.0)
        sizes = DeviceSizes(c0=c0, cs_max=cs_max, qf_max=qf_max,
                            k_levels=k_levels)
    k = int(rng.integers(0, sizes.k_levels + 1))
    cs = (k / sizes.k_levels) * sizes.cs_max
    qf = rng.uniform(-sizes.qf_max, sizes.qf_max) if sizes.qf_max > 0 else 0.0
    return p, sizes, cs, qf
