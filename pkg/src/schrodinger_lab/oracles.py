"""Independent reference computations used to cross-check the solvers."""

from __future__ import annotations

import numpy as np

from .entropy import PreconditionError

_INVPHI = (np.sqrt(np.longdouble(5)) - 1) / 2


def _h_two_state(s, a0, b0, logR):
    # coupling [[s, a0 - s], [b0 - s, 1 - a0 - b0 + s]]
    pi = np.array([s, a0 - s, b0 - s, 1 - a0 - b0 + s], dtype=np.longdouble)
    pos = pi > 0
    return np.sum(pi[pos] * (np.log(pi[pos]) - logR[pos]))


def golden_section_two_state(R01, mu0, mu1, xtol: float = 1e-13, max_iter: int = 400) -> np.ndarray:
    """Minimise ``H(pi | R01)`` over 2x2 couplings of ``(mu0, mu1)`` by
    golden-section search on ``s = pi[0, 0]``.

    Arithmetic is in extended precision so the flat minimum is resolved
    well below ``1e-8``.
    """
    R = np.asarray(R01, dtype=np.longdouble)
    if R.shape != (2, 2):
        raise PreconditionError("golden-section oracle needs a 2x2 kernel")
    if np.any(R <= 0):
        raise PreconditionError("golden-section oracle needs a positive kernel")
    a0 = np.longdouble(mu0[0])
    b0 = np.longdouble(mu1[0])
    logR = np.log(R.ravel())
    lo = max(np.longdouble(0), a0 + b0 - 1)
    hi = min(a0, b0)
    if hi - lo <= 0:
        s = lo
    else:
        c = hi - _INVPHI * (hi - lo)
        d = lo + _INVPHI * (hi - lo)
        fc = _h_two_state(c, a0, b0, logR)
        fd = _h_two_state(d, a0, b0, logR)
        for _ in range(max_iter):
            if hi - lo <= xtol:
                break
            if fc < fd:
                hi, d, fd = d, c, fc
                c = hi - _INVPHI * (hi - lo)
                fc = _h_two_state(c, a0, b0, logR)
            else:
                lo, c, fc = c, d, fd
                d = lo + _INVPHI * (hi - lo)
                fd = _h_two_state(d, a0, b0, logR)
        s = (lo + hi) / 2
    pi = np.array([[s, a0 - s], [b0 - s, 1 - a0 - b0 + s]], dtype=np.longdouble)
    return pi.astype(float)


def w2_squared_half_1d(x, mu0, mu1) -> float:
    """``W_2^2 / 2`` between two measures on the same 1-D grid via the
    quantile (monotone) coupling."""
    from .transport import monotone_coupling_1d

    x = np.asarray(x, dtype=float)
    pi = monotone_coupling_1d(x, mu0, x, mu1)
    return float(np.sum(pi * 0.5 * (x[:, None] - x[None, :]) ** 2))
