import os
import subprocess
import sys

import numpy as np
import pytest

from swvp import _kernels
from swvp.features import FeatureIndex, delta_phi

PROBE = "from swvp import _kernels; print(_kernels.backend_name())"


@pytest.mark.parametrize("value, expected", [("1", "numpy"), ("true", "numpy"), ("0", "numba"), ("", "numba")])
def test_env_flag_selects_backend(value, expected):
    if expected == "numba" and not _kernels.NUMBA_AVAILABLE:
        expected = "numpy"
    env = dict(os.environ, **{_kernels.ENV_FLAG: value})
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_set_backend_roundtrip():
    prev = _kernels.set_backend("numpy")
    try:
        assert not _kernels.using_numba()
        with pytest.raises(ValueError):
            _kernels.set_backend("cuda")
    finally:
        _kernels.set_backend(prev)
    assert _kernels.backend_name() == prev


def test_delta_phi_kernels_agree():
    rng = np.random.default_rng(0)
    index = FeatureIndex(4, 3)
    for _ in range(200):
        L = int(rng.integers(1, 7))
        x = rng.integers(1, 5, size=L)
        y, z = rng.integers(1, 4, size=(2, L))
        ref = delta_phi(x, y, z, index)
        for fn in (_kernels.delta_phi_np, _kernels.delta_phi_nb):
            ids, vals = fn(x, y, z, index.offsets, index.n_labels)
            assert ids.tolist() == ref.indices.tolist() and vals.tolist() == ref.values.tolist()
