import os
import subprocess
import sys

import numpy as np
import pytest

from dichotomy import kernels
from dichotomy.tridiag import random_dominant

HAVE_CYTHON = "cython" in kernels.available_backends()


def _bands(n, rng):
    A = random_dominant(n, rng)
    return A.lower.copy(), A.diag.copy(), A.upper.copy()


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernels not built")
@pytest.mark.parametrize("kernel", ["thomas", "pivot_solve"])
@pytest.mark.parametrize("n", [1, 2, 3, 17, 1000])
def test_backends_agree(kernel, n, rng):
    lower, diag, upper = _bands(n, rng)
    f = rng.standard_normal(n)
    backends = kernels.available_backends()
    x_c = getattr(backends["cython"], kernel)(lower, diag, upper, f, 1e-300)
    x_p = getattr(backends["python"], kernel)(lower, diag, upper, f, 1e-300)
    np.testing.assert_allclose(x_c, x_p, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("kernel", ["thomas", "pivot_solve"])
def test_kernels_do_not_mutate_inputs(backend, kernel, rng):
    lower, diag, upper = _bands(50, rng)
    f = rng.standard_normal(50)
    before = [a.copy() for a in (lower, diag, upper, f)]
    getattr(kernels, kernel)(lower, diag, upper, f)
    for a, b in zip((lower, diag, upper, f), before):
        np.testing.assert_array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError, match="unavailable"):
        kernels.use_backend("fortran")


def test_use_backend_switches(backend):
    assert kernels.backend_name() == backend


def test_pure_env_forces_python():
    env = dict(os.environ, DICHOTOMY_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from dichotomy import kernels; print(kernels.backend_name(), sorted(kernels.available_backends()))"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split()[0] == "python"
    assert "cython" not in out.stdout
