"""Backend selection for the RK4 master-equation stepper.

The compiled extension is used when it imported cleanly; otherwise, or when
``USCQED_KERNEL=python`` is set, the numpy implementation runs instead.
"""
from __future__ import annotations

import os

import numpy as np

from . import _rk4_py

try:
    from . import _rk4 as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _rk4_py.propagate}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.propagate

_requested = os.environ.get("USCQED_KERNEL", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"USCQED_KERNEL={_requested!r} unavailable; have {sorted(BACKENDS)}")
BACKEND = _requested or ("compiled" if "compiled" in BACKENDS else "python")


def propagate(rho, energies, rates, ops, amps, freqs, t0, dt, n_steps, obs=None, lock_freq=0.0, backend=None):
    """Run ``n_steps`` RK4 steps on a batch ``rho`` of shape (B, d, d) in place.

    See ``uscqed._rk4_py.propagate`` for the argument contract.
    """
    fn = BACKENDS[backend or BACKEND]
    d = len(energies)
    if rho.dtype != complex or not rho.flags.c_contiguous or rho.ndim != 3 or rho.shape[1:] != (d, d):
        raise ValueError("rho must be a C-contiguous complex array of shape (B, d, d)")
    if obs is None:
        obs = np.zeros((0, d, d), dtype=complex)
    return fn(
        rho,
        np.ascontiguousarray(energies, dtype=float),
        np.ascontiguousarray(rates, dtype=float),
        np.ascontiguousarray(ops, dtype=complex).reshape(-1, d, d),
        np.ascontiguousarray(amps, dtype=float).reshape(-1),
        np.ascontiguousarray(freqs, dtype=float).reshape(-1),
        float(t0),
        float(dt),
        int(n_steps),
        np.ascontiguousarray(obs, dtype=complex).reshape(-1, d, d),
        float(lock_freq),
    )
