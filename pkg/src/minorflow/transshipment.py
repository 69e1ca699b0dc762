"""(1+eps)-approximate transshipment: multiplicative weights over the routing operator.

A single check at scale t keeps a distribution over 2m signed edge constraints,
evaluates the preconditioned residual of the induced flow, and either outputs that
flow (cost <= t, small preconditioned residual) or, after enough sign steps, a
potential scaled to value exactly t. A scale search (geometric descent, then
bisection, then two final calls) turns checks into a solution.

The solver is self-certifying: every candidate flow is repaired to route the
demand exactly (its cost upper-bounds OPT), every running-average potential is
normalized to dual feasibility (its value lower-bounds OPT), and the search stops
as soon as cost <= (1+eps)·value. Branch decisions may be noisy; the returned
pair is certified regardless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import graphs
from .graphs import GraphError, flow_cost, is_proper
from .routing import RoutingOperator, estimate_alpha_hat, route
from .simulator import MinorNetwork

MWU_ITERATION_FACTOR = 8.0  # c_T in T = ceil(c_T * alpha^2 * eps^-2 * ln m)
HARD_ITERATION_CAP = 1_000_000
MAX_SCALE_STEPS = 400


class SolverError(RuntimeError):
    """Raised when an iteration or scale-search cap is exceeded."""


@dataclass
class MwuOutcome:
    kind: str  # "flow" or "potential"
    flow: np.ndarray | None
    potential: np.ndarray | None
    iterations: int
    certified: bool
    certified_lower: float
    lower_potential: np.ndarray | None
    best_flow: np.ndarray | None
    best_flow_bound: float


def mwu_check(
    net: MinorNetwork,
    R: RoutingOperator,
    d: np.ndarray,
    t: float,
    eps: float,
    alpha_hat: float,
    c_T: float = MWU_ITERATION_FACTOR,
    hard_cap: int = HARD_ITERATION_CAP,
) -> MwuOutcome:
    """One feasibility check at scale t.

    Returns either a flow f with ||Wf||_1 <= t and ||WR(Bf - d)||_1 < eps*t, or a
    potential with d^T phi = t. The potential branch fires early as soon as the
    feasibility-normalized running average certifies value >= t; a full run that
    falls short still returns the scaled potential, flagged certified=False.
    """
    g = R.graph
    d = graphs.node_vector(g, d)
    if t <= 0:
        raise GraphError(f"scale parameter must be positive, got {t}")
    if not (0 < eps):
        raise GraphError("eps must be positive")
    if alpha_hat < 1:
        raise GraphError("alpha_hat must be >= 1")
    if not is_proper(d):
        raise GraphError("mwu_check requires a proper demand")
    m = g.m
    if m == 0:
        return MwuOutcome("flow", np.zeros(0), None, 0, True, 0.0, None, np.zeros(0), 0.0)

    delta = eps / (2.0 * alpha_hat)
    T = int(math.ceil(c_T * alpha_hat**2 * eps**-2 * math.log(max(m, 2))))
    capped = T > hard_cap
    T = min(T, hard_cap)

    w = g.weight
    inv_w = 1.0 / w
    dense = R.dense
    dense_t = dense.T
    iter_rounds = R.route_rounds + R.route_t_rounds + 5
    WRd = w * (dense @ d)
    net.charge(R.route_rounds + 1, "mwu setup")

    logw_p = np.zeros(m)
    logw_m = np.zeros(m)
    p_p = np.full(m, 1.0 / (2 * m))
    p_m = np.full(m, 1.0 / (2 * m))

    psi_sum = np.zeros(g.n)
    u_sum = np.zeros(m)
    best_lower = 0.0
    lower_potential: np.ndarray | None = None
    best_flow: np.ndarray | None = None
    best_flow_bound = math.inf

    for k in range(1, T + 1):
        h = (p_p - p_m) * inv_w
        resid_demand = graphs.apply_B(g, h) + d / t
        v = w * (dense @ resid_demand)
        nv = float(np.abs(v).sum())
        net.charge(iter_rounds, "")

        flow_candidate = -t * h
        bound = t * float(np.abs(p_p - p_m).sum()) + t * nv
        if bound < best_flow_bound:
            best_flow_bound = bound
            best_flow = flow_candidate

        if nv < eps:
            return MwuOutcome(
                "flow",
                flow_candidate,
                None,
                k,
                True,
                best_lower,
                lower_potential,
                best_flow,
                best_flow_bound,
            )

        y = np.where(v >= 0.0, -1.0, 1.0)  # -sign(v) with sign(0) := +1
        psi = dense_t @ (w * y)
        u = graphs.apply_Bt(g, psi) * inv_w
        s_k = float(y @ WRd) / t

        psi_sum += psi
        u_sum += u
        dot = -float(d @ psi_sum) / k
        feas = float(np.abs(u_sum).max()) / k
        val = dot / max(1.0, feas)
        if val > best_lower:
            best_lower = val
            lower_potential = (-psi_sum / k) / max(1.0, feas)
        if val >= t * (1.0 - 1e-12):
            phi = lower_potential * (t / val)
            return MwuOutcome(
                "potential",
                None,
                phi,
                k,
                True,
                best_lower,
                lower_potential,
                best_flow,
                best_flow_bound,
            )

        logw_p += delta * (u + s_k)
        logw_m += delta * (-u + s_k)
        mx = max(float(logw_p.max()), float(logw_m.max()))
        e_p = np.exp(logw_p - mx)
        e_m = np.exp(logw_m - mx)
        z = float(e_p.sum() + e_m.sum())
        p_p = e_p / z
        p_m = e_m / z

    if capped:
        raise SolverError(f"mwu_check exceeded the hard iteration cap ({hard_cap})")
    # verbatim potential: average the sign steps, scale so d^T phi = t
    phi_raw = -psi_sum / T
    dot_raw = float(d @ phi_raw)
    if dot_raw > 0:
        phi = phi_raw * (t / dot_raw)
    else:
        phi = phi_raw
    return MwuOutcome(
        "potential",
        None,
        phi,
        T,
        False,
        best_lower,
        lower_potential,
        best_flow,
        best_flow_bound,
    )


def repair_and_finalize(
    net: MinorNetwork, R: RoutingOperator, f: np.ndarray, d: np.ndarray
) -> np.ndarray:
    """Route the residual demand obliviously so the result routes d exactly."""
    residual = d - net.apply_B(f)
    if float(np.abs(residual).sum()) == 0.0:
        return f
    return f + route(R, residual)


@dataclass
class TransshipmentSolution:
    flow: np.ndarray
    potential: np.ndarray
    cost: float
    dual: float
    rounds: int
    iterations: int

    def to_dict(self) -> dict:
        return {
            "flow": [float(x) for x in self.flow],
            "potential": [float(x) for x in self.potential],
            "cost": self.cost,
            "dual": self.dual,
            "rounds": self.rounds,
            "iterations": self.iterations,
        }


def solve_transshipment(
    net: MinorNetwork, R: RoutingOperator, d: np.ndarray, eps: float
) -> TransshipmentSolution:
    """Certified (1+eps)-approximate flow/potential pair for a proper demand.

    The returned pair satisfies: B f = d (up to routing exactness), the potential
    is dual feasible, and d^T phi <= ||Wf||_1 <= (1+eps) d^T phi.
    """
    g = R.graph
    d = graphs.node_vector(g, d)
    if not (0 < eps < 1):
        raise GraphError(f"eps must lie in (0,1), got {eps}")
    if not is_proper(d):
        raise GraphError("demand is not proper")

    d1 = float(np.abs(d).sum())
    if d1 <= 1e-12 or g.m == 0:
        return TransshipmentSolution(np.zeros(g.m), np.zeros(g.n), 0.0, 0.0, 0, 0)

    key = (d.tobytes(), float(eps))
    cached = R.solve_cache.get(key)
    if cached is not None:
        sol, rounds_delta = cached
        net.charge(rounds_delta, "cached solve replay")
        return TransshipmentSolution(
            sol.flow.copy(), sol.potential.copy(), sol.cost, sol.dual, sol.rounds, sol.iterations
        )

    rounds_before = net.round_counter
    alpha_hat = estimate_alpha_hat(R)
    eps_i = eps / 4.0

    best_cost = math.inf
    best_flow: np.ndarray | None = None
    best_dual = 0.0
    best_phi: np.ndarray | None = None
    iterations = 0

    def gap_ok() -> bool:
        return best_phi is not None and best_flow is not None and best_cost <= (1.0 + eps) * best_dual

    def run(t: float, eps_run: float) -> str:
        nonlocal best_cost, best_flow, best_dual, best_phi, iterations
        out = mwu_check(net, R, d, t, eps_run, alpha_hat)
        iterations += out.iterations
        if out.certified_lower > best_dual and out.lower_potential is not None:
            best_dual = out.certified_lower
            best_phi = out.lower_potential
        for cand in (out.flow, out.best_flow):
            if cand is None:
                continue
            repaired = repair_and_finalize(net, R, cand, d)
            c = flow_cost(g, repaired)
            if c < best_cost:
                best_cost = c
                best_flow = repaired
        return out.kind

    # geometric descent from a poly upper bound until the first potential
    t = d1 * g.n * g.max_weight()
    t_lo = None
    t_hi = t
    for _ in range(MAX_SCALE_STEPS):
        kind = run(t, eps_i)
        if gap_ok():
            break
        if kind == "potential":
            t_lo = t
            break
        t_hi = t
        t *= (1.0 + eps_i) / 2.0
    else:
        raise SolverError("geometric descent did not terminate")

    if not gap_ok() and t_lo is not None:
        if t_hi <= t_lo:
            t_hi = 2.0 * t_lo
        for _ in range(MAX_SCALE_STEPS):
            if gap_ok() or t_hi - t_lo <= eps_i * t_lo:
                break
            mid = 0.5 * (t_lo + t_hi)
            if run(mid, eps_i) == "potential":
                t_lo = mid
            else:
                t_hi = mid
        if not gap_ok():
            run(t_lo / (1.0 + eps_i), eps_i)
        if not gap_ok():
            run(t_hi, eps_i)

    # bounded polish: rare fallback when the schedule ends with an open gap
    for j in range(32):
        if gap_ok():
            break
        if best_dual > 0:
            probe = math.sqrt(best_dual * min(best_cost, 2 * best_dual * (1 + eps)))
        else:
            probe = best_cost / 2.0
        run(probe, max(eps_i / 2.0**j, 1e-6))
    if not gap_ok():
        raise SolverError("certified duality gap did not close")

    sol = TransshipmentSolution(
        flow=best_flow,
        potential=best_phi,
        cost=best_cost,
        dual=best_dual,
        rounds=net.round_counter - rounds_before,
        iterations=iterations,
    )
    R.solve_cache[key] = (
        TransshipmentSolution(
            sol.flow.copy(), sol.potential.copy(), sol.cost, sol.dual, sol.rounds, sol.iterations
        ),
        sol.rounds,
    )
    return sol
