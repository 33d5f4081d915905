"""Newton-Raphson AC power flow in polar coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .case import NetworkCase, branch_admittances, build_admittance


class PowerFlowError(RuntimeError):
    """Newton-Raphson failed to reach the mismatch tolerance.

    The last iterate is kept on ``solution`` (with ``converged=False``).
    """

    def __init__(self, message: str, solution: "PowerFlowSolution"):
        super().__init__(message)
        self.solution = solution
        self.residual = solution.residual
        self.iterations = solution.iterations


@dataclass(frozen=True)
class PowerFlowSolution:
    V: np.ndarray  # p.u.
    theta: np.ndarray  # rad
    S_brch: np.ndarray  # MVA, max of both branch ends
    P_brch: np.ndarray  # MW, sending (from) end
    Q_brch: np.ndarray  # MVAr, sending (from) end
    P_0: float  # MW drawn from the upper grid at the slack bus
    Q_0: float
    losses_mw: float
    converged: bool
    residual: float  # max |dP|, |dQ| in p.u.
    iterations: int


class PowerFlowModel:
    """Caches the admittance matrix and branch data of one case.

    Instances are read-only after construction; each :meth:`solve` allocates
    its own work arrays, so a model may be shared between threads.
    """

    def __init__(self, case: NetworkCase):
        self.case = case
        self.Y = build_admittance(case)
        self.G = np.ascontiguousarray(self.Y.real)
        self.B = np.ascontiguousarray(self.Y.imag)
        self.slack = case.slack
        self.pq = np.array([i for i in range(case.n_bus) if i != self.slack], dtype=np.intp)
        self.f, self.t = case.branch_ends
        self.y_series = branch_admittances(case.branches)

    def solve(
        self,
        p_inj_mw: np.ndarray,
        q_inj_mvar: np.ndarray,
        tol: float = 1e-8,
        max_iter: int = 50,
        raise_on_failure: bool = True,
    ) -> PowerFlowSolution:
        case = self.case
        n = case.n_bus
        p_spec = np.ascontiguousarray(p_inj_mw, dtype=float) / case.base_mva
        q_spec = np.ascontiguousarray(q_inj_mvar, dtype=float) / case.base_mva
        if p_spec.shape != (n,) or q_spec.shape != (n,):
            raise ValueError(f"injections must have shape ({n},)")
        vm = np.ones(n)
        va = np.zeros(n)
        m = self.pq.size
        F = np.empty(2 * m)
        J = np.empty((2 * m, 2 * m))

        converged = False
        iterations = 0
        residual = np.inf
        while True:
            residual = kernels.newton_system(self.G, self.B, vm, va, p_spec, q_spec, self.pq, F, J)
            if not np.isfinite(residual):
                break
            if residual < tol:
                converged = True
                break
            if iterations >= max_iter:
                break
            try:
                dx = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                break
            va[self.pq] += dx[:m]
            vm[self.pq] += dx[m:]
            iterations += 1
            if not (np.all(np.isfinite(vm)) and np.all(vm > 0)):
                residual = np.inf
                break

        sol = self._solution(vm, va, converged, float(residual), iterations)
        if not converged and raise_on_failure:
            raise PowerFlowError(
                f"power flow did not converge after {iterations} iterations "
                f"(residual {residual:.3e} p.u.)",
                sol,
            )
        return sol

    def _solution(self, vm, va, converged, residual, iterations) -> PowerFlowSolution:
        base = self.case.base_mva
        V = vm * np.exp(1j * va)
        vf = V[self.f]
        vt = V[self.t]
        i_ft = (vf - vt) * self.y_series
        s_from = vf * np.conj(i_ft)
        s_to = vt * np.conj(-i_ft)
        s_slack = V[self.slack] * np.conj(self.Y[self.slack] @ V)
        with np.errstate(invalid="ignore"):
            s_brch = np.maximum(np.abs(s_from), np.abs(s_to)) * base
        return PowerFlowSolution(
            V=vm.copy(),
            theta=va.copy(),
            S_brch=s_brch,
            P_brch=s_from.real * base,
            Q_brch=s_from.imag * base,
            P_0=float(s_slack.real * base),
            Q_0=float(s_slack.imag * base),
            losses_mw=float(np.sum((s_from + s_to).real) * base),
            converged=converged,
            residual=residual,
            iterations=iterations,
        )


def solve_power_flow(
    case: NetworkCase,
    p_inj_mw: np.ndarray,
    q_inj_mvar: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 50,
    raise_on_failure: bool = True,
) -> PowerFlowSolution:
    """Solve the AC power flow from a flat start.

    ``p_inj_mw``/``q_inj_mvar`` are net bus injections (generation minus load)
    for every bus; the slack entry is ignored and the slack absorbs the
    balance. Raises :class:`PowerFlowError` when the mismatch does not drop
    below ``tol`` within ``max_iter`` Newton steps.
    """
    return PowerFlowModel(case).solve(p_inj_mw, q_inj_mvar, tol, max_iter, raise_on_failure)


def mismatch(case: NetworkCase, sol: PowerFlowSolution, p_inj_mw, q_inj_mvar) -> np.ndarray:
    """Per-bus |ΔP|, |ΔQ| (p.u.) of a solution, recomputed from V and theta.

    Entry order is ``[dP_0..dP_n-1, dQ_0..dQ_n-1]`` with the slack rows zeroed.
    """
    Y = build_admittance(case)
    V = sol.V * np.exp(1j * sol.theta)
    s = V * np.conj(Y @ V)
    dp = s.real - np.asarray(p_inj_mw) / case.base_mva
    dq = s.imag - np.asarray(q_inj_mvar) / case.base_mva
    dp[case.slack] = 0.0
    dq[case.slack] = 0.0
    return np.abs(np.concatenate([dp, dq]))
