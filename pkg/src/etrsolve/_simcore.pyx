# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory-stepping kernel.

One call advances every trajectory in a batch by a single epoch: sample an
action from the per-state CDF, accumulate the one-step values, sample the next
state from the per-pair CDF.  The caller supplies the uniforms, so the numpy
fallback consuming the same arrays produces bit-identical trajectories.
"""

import numpy as np

cimport numpy as cnp


def step_batch(cnp.int64_t[::1] states,
               double[:, ::1] acc,
               const double[::1] u_action,
               const double[::1] u_next,
               const double[:, ::1] policy_cum,
               const double[:, :, ::1] trans_cum,
               const double[:, :, ::1] values):
    """Advance all trajectories one step in place.

    states   : (n,) current state indices, overwritten with the next states
    acc      : (K, n) running per-trajectory sums, one row per value function
    u_action : (n,) uniforms driving the action draw
    u_next   : (n,) uniforms driving the transition draw
    policy_cum : (S, A) action CDF per state, last admissible entry exactly 1.0
    trans_cum  : (S, A, S) next-state CDF per pair, final entry exactly 1.0
    values     : (K, S, A) one-step values accumulated on each visit
    """
    cdef Py_ssize_t n = states.shape[0]
    cdef Py_ssize_t K = acc.shape[0]
    cdef Py_ssize_t A = policy_cum.shape[1]
    cdef Py_ssize_t S = trans_cum.shape[2]
    cdef Py_ssize_t j, k, lo, hi, mid
    cdef cnp.int64_t x, a
    cdef double u

    for j in range(n):
        x = states[j]
        u = u_action[j]
        a = 0
        while u >= policy_cum[x, a] and a < A - 1:
            a += 1
        for k in range(K):
            acc[k, j] += values[k, x, a]
        # Next state: first index with cdf > u (matches searchsorted 'right').
        u = u_next[j]
        lo = 0
        hi = S - 1
        while lo < hi:
            mid = (lo + hi) >> 1
            if u >= trans_cum[x, a, mid]:
                lo = mid + 1
            else:
                hi = mid
        states[j] = lo
