"""Pure numpy RK4 stepper for the dressed-basis master equation.

Reference implementation of ``uscqed._rk4``; both expose ``propagate`` with
identical arguments and semantics.
"""
import numpy as np


def _rhs(rho, factor, rates_t, idx, v):
    out = factor * rho
    if v is not None:
        out += -1j * (v @ rho - rho @ v)
    # diagonal stays complex: batch members need not be Hermitian
    out[..., idx, idx] += rho[..., idx, idx] @ rates_t
    return out


def propagate(rho, energies, rates, ops, amps, freqs, t0, dt, n_steps, obs, lock_freq):
    """Advance a batch of density matrices by ``n_steps`` fixed RK4 steps.

    Parameters
    ----------
    rho : complex array (B, d, d), C-contiguous
        Updated in place.
    energies : float array (d,)
    rates : float array (d, d)
        ``rates[j, k]`` is the jump rate from level k down to level j (k > j).
    ops, amps, freqs : (C, d, d), (C,), (C,)
        H(t) = diag(energies) + sum_c amps[c] sin(freqs[c] t) ops[c].
    obs : complex array (K, d, d)
        Observables summed at the start of every step.
    lock_freq : float
        Reference frequency of the lock-in sums.

    Returns
    -------
    sums, lock_sums : complex arrays (B, K)
        sum_i tr(rho(t_i) O_k) and sum_i tr(rho(t_i) O_k) exp(i lock_freq t_i)
        over t_i = t0 + i dt, i < n_steps.
    """
    d = len(energies)
    decay = rates.sum(axis=0)
    factor = -1j * (energies[:, None] - energies[None, :]) - 0.5 * (decay[:, None] + decay[None, :])
    rates_t = np.ascontiguousarray(rates.T)
    idx = np.arange(d)
    has_v = len(amps) > 0
    obs_t = np.ascontiguousarray(np.transpose(obs, (0, 2, 1)))
    sums = np.zeros((rho.shape[0], obs.shape[0]), dtype=complex)
    lock = np.zeros_like(sums)

    def v_at(t):
        if not has_v:
            return None
        return np.tensordot(amps * np.sin(freqs * t), ops, axes=1)

    y = rho
    for i in range(n_steps):
        t = t0 + i * dt
        if obs.shape[0]:
            tr = np.einsum("bij,kij->bk", y, obs_t)
            sums += tr
            lock += tr * np.exp(1j * lock_freq * t)
        v0, vh, v1 = v_at(t), v_at(t + 0.5 * dt), v_at(t + dt)
        k1 = _rhs(y, factor, rates_t, idx, v0)
        k2 = _rhs(y + 0.5 * dt * k1, factor, rates_t, idx, vh)
        k3 = _rhs(y + 0.5 * dt * k2, factor, rates_t, idx, vh)
        k4 = _rhs(y + dt * k3, factor, rates_t, idx, v1)
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return sums, lock
