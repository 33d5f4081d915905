"""Pure-numpy versions of the compiled power-flow kernels (same signatures)."""

from __future__ import annotations

import numpy as np


def injections(G, B, vm, va, P, Q):
    dt = va[:, None] - va[None, :]
    c = np.cos(dt)
    s = np.sin(dt)
    P[:] = vm * ((G * c + B * s) @ vm)
    Q[:] = vm * ((G * s - B * c) @ vm)


def newton_system(G, B, vm, va, p_spec, q_spec, pq, F, J):
    n = vm.shape[0]
    m = pq.shape[0]
    dt = va[:, None] - va[None, :]
    c = np.cos(dt)
    s = np.sin(dt)
    gc = G * c + B * s
    gs = G * s - B * c
    P = vm * (gc @ vm)
    Q = vm * (gs @ vm)
    F[:m] = P[pq] - p_spec[pq]
    F[m:] = Q[pq] - q_spec[pq]

    vv = np.outer(vm, vm)
    dp_dth = vv * gs
    dp_dv = vm[:, None] * gc
    dq_dth = -vv * gc
    dq_dv = vm[:, None] * gs
    d = np.arange(n)
    gd = np.diag(G)
    bd = np.diag(B)
    dp_dth[d, d] = -Q - bd * vm**2
    dp_dv[d, d] = P / vm + gd * vm
    dq_dth[d, d] = P - gd * vm**2
    dq_dv[d, d] = Q / vm - bd * vm
    ix = np.ix_(pq, pq)
    J[:m, :m] = dp_dth[ix]
    J[:m, m:] = dp_dv[ix]
    J[m:, :m] = dq_dth[ix]
    J[m:, m:] = dq_dv[ix]
    return float(np.max(np.abs(F))) if F.size else 0.0
