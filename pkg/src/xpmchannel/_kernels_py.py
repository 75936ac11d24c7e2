"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.special import logsumexp

_CHUNK = 1 << 21  # complex elements per temporary block


def mixture_loglik(y, x, u, log_w, sigma_n_sq):
    y = np.asarray(y, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    rot = np.exp(-1j * np.asarray(u))
    shifted = x[:, None] * rot[None, :]  # (nx, nu)
    out = np.empty((y.size, x.size))
    step = max(1, _CHUNK // max(1, shifted.size))
    norm = -np.log(np.pi * sigma_n_sq)
    for start in range(0, y.size, step):
        yb = y[start:start + step, None, None]
        d2 = np.abs(yb - shifted[None]) ** 2
        out[start:start + step] = logsumexp(log_w - d2 / sigma_n_sq, axis=-1) + norm
    return out


def xpm_phase_rotate(fields, coeff, include_spm):
    power = np.abs(fields) ** 2
    total = power.sum(axis=0)
    self_w = -1.0 if include_spm else -2.0
    fields *= np.exp(1j * coeff * (2.0 * total[None, :] + self_w * power))
