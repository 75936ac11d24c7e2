import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp

from xpmchannel import _kernels_py, kernels

try:
    from xpmchannel import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def direct_loglik(y, x, u, log_w, var):
    """Unvectorised reference: log sum_m w_m CN(y; x e^{-i u_m}, var)."""
    out = np.empty((len(y), len(x)))
    for a, ya in enumerate(y):
        for b, xb in enumerate(x):
            terms = log_w - np.abs(ya - xb * np.exp(-1j * u)) ** 2 / var
            out[a, b] = logsumexp(terms) - np.log(np.pi * var)
    return out


def random_case(seed, ny=17, nx=5, nu=33):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(ny) + 1j * rng.standard_normal(ny)
    x = rng.standard_normal(nx) + 1j * rng.standard_normal(nx)
    u = np.sort(rng.uniform(-3, 3, nu))
    w = rng.random(nu)
    return y, x, u, np.log(w / w.sum())


@pytest.mark.parametrize("impl", [_kernels_py, pytest.param(compiled, marks=needs_ext)],
                         ids=["python", "cython"])
def test_loglik_against_direct_sum(impl):
    y, x, u, lw = random_case(1)
    np.testing.assert_allclose(impl.mixture_loglik(y, x, u, lw, 0.3), direct_loglik(y, x, u, lw, 0.3),
                               rtol=1e-12, atol=1e-12)


@needs_ext
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), var=st.floats(1e-4, 10))
def test_backends_agree_on_loglik(seed, var):
    y, x, u, lw = random_case(seed)
    np.testing.assert_allclose(compiled.mixture_loglik(y, x, u, lw, var),
                               _kernels_py.mixture_loglik(y, x, u, lw, var), rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize("impl", [_kernels_py, pytest.param(compiled, marks=needs_ext)],
                         ids=["python", "cython"])
@pytest.mark.parametrize("spm", [True, False])
def test_phase_rotate_against_definition(impl, spm):
    rng = np.random.default_rng(2)
    f = np.ascontiguousarray(rng.standard_normal((5, 64)) + 1j * rng.standard_normal((5, 64)))
    p = np.abs(f) ** 2
    own = 1.0 if spm else 0.0
    # channel k sees 2 * (power of every other channel) + own SPM
    phase = 0.7 * (2 * (p.sum(axis=0)[None, :] - p) + own * p)
    expected = f * np.exp(1j * phase)
    impl.xpm_phase_rotate(f, 0.7, spm)
    np.testing.assert_allclose(f, expected, rtol=1e-13, atol=1e-13)


def test_backend_switch_by_environment():
    code = "from xpmchannel import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"XPMCHANNEL_BACKEND": "python", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("cython", "python")
