"""Trajectory-stepping kernel with compiled core and numpy fallback.

The compiled extension (``etrsolve._simcore``) is used when it built
successfully and the environment variable ``ETRSOLVE_PURE_PYTHON`` is unset;
otherwise a vectorized numpy twin takes over.  Both consume the same uniform
arrays in the same order, so results are bit-identical either way.
"""

import os

import numpy as np

__all__ = ["step_batch", "step_batch_compiled", "step_batch_fallback", "COMPILED"]


def step_batch_fallback(states, acc, u_action, u_next, policy_cum, trans_cum, values):
    """Numpy twin of the compiled kernel; same in-place contract.

    The per-row CDF search is done with one flat ``searchsorted`` by offsetting
    each row's keys into its own unit interval (row r occupies (r, r+1]).
    """
    S, A = policy_cum.shape
    S_next = trans_cum.shape[2]
    pol_keys = (np.arange(S)[:, None] + policy_cum).ravel()
    a = np.searchsorted(pol_keys, states + u_action, side="right") - states * A
    np.minimum(a, A - 1, out=a)
    acc += values[:, states, a]
    pair = states * A + a
    trans_keys = (np.arange(S * A)[:, None] + trans_cum.reshape(S * A, S_next)).ravel()
    y = np.searchsorted(trans_keys, pair + u_next, side="right") - pair * S_next
    np.minimum(y, S_next - 1, out=y)
    states[:] = y


try:
    from etrsolve._simcore import step_batch as step_batch_compiled
except ImportError:  # pragma: no cover - depends on build environment
    step_batch_compiled = None

COMPILED = step_batch_compiled is not None and not os.environ.get("ETRSOLVE_PURE_PYTHON")

step_batch = step_batch_compiled if COMPILED else step_batch_fallback
