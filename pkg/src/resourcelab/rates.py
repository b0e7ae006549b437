"""Finite-``n`` conversion-rate estimates on the coherence testbed.

A rate ``r`` means ``floor(r n)`` target copies from ``n`` inputs.  Rates
live on the grid ``0.01 * i``; feasibility of a grid point is judged on the
upper half of ``1..n_max`` so that small-``n`` transients do not dominate.
"""

import logging
import math
from dataclasses import dataclass, field

from . import arng
from .errors import DimensionOverflow, InfeasibleStep, NoFeasibleRate

log = logging.getLogger(__name__)

GRID = 100


@dataclass
class RateEstimate:
    kind: str
    achieved_rate: float
    n_max: int
    eps_trace: list
    p_trace: list
    theory_ratio: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def deviation(self):
        return self.achieved_rate - self.theory_ratio

    def to_dict(self):
        return {"kind": self.kind, "achieved_rate": self.achieved_rate, "n_max": self.n_max,
                "theory_ratio": self.theory_ratio, "deviation": self.deviation,
                "eps_trace": list(self.eps_trace), "p_trace": list(self.p_trace),
                "diagnostics": dict(self.diagnostics)}


def _window(n_max):
    return range(max(1, (n_max + 1) // 2), n_max + 1)


def _check_point(pipe, idx, n, eps_ceiling, p_floor, overflow=None):
    """``(ok, p, eps)`` for grid index ``idx`` at ``n`` copies.

    Targets beyond the dimension cap count as infeasible; their grid indices
    are collected in ``overflow``.
    """
    k = idx * n // GRID
    if k == 0:
        return True, 1.0, 0.0
    try:
        rec = pipe.run_k(n, k)
    except InfeasibleStep:
        return False, 0.0, 1.0
    except DimensionOverflow:
        if overflow is not None:
            overflow.add(idx)
        return False, 0.0, 1.0
    return rec.eps_n <= eps_ceiling and rec.p_n >= p_floor, rec.p_n, rec.eps_n


def grid_feasible(pipe, idx, n_max, eps_ceiling, p_floor, overflow=None):
    return all(_check_point(pipe, idx, n, eps_ceiling, p_floor, overflow)[0] for n in _window(n_max))


def estimate_probabilistic_rate(rho, omega, F=None, n_max=10, eps_ceiling=0.05, p_floor=0.3, chi=0.1,
                                r_max=None, pipeline=None, tol=None):
    """Largest grid rate whose pipeline keeps ``eps_n <= eps_ceiling`` and ``p_n >= p_floor``.

    Bisection over the grid assumes feasibility is monotone in the rate.  The
    reported rate is the delivered ratio ``floor(r n_max) / n_max`` at the best
    grid point ``r`` (kept in ``diagnostics["grid_rate"]``): every grid rate in
    ``[1, 1 + 1/n_max)`` delivers the same copies on ``1..n_max``.  If
    no grid point delivering at least one copy is feasible a zero-rate
    estimate is returned with ``diagnostics["no_feasible_rate"]`` set.
    """
    pipe = pipeline or arng.ArngPipeline(rho, omega, F_in=F, chi=chi, tol=tol)
    theory = pipe.theory_ratio
    if r_max is None:
        r_max = max(1.0, math.ceil(2.0 * theory * GRID) / GRID)
    hi_idx = int(round(r_max * GRID))
    cap = pipe.tol.dimension_cap
    if pipe.rho.shape[0] ** n_max > cap:
        raise DimensionOverflow(f"{n_max} copies of a {pipe.rho.shape[0]}-level source exceed the cap {cap}")
    evaluated = {}
    overflow = set()

    def feasible(idx):
        if idx not in evaluated:
            evaluated[idx] = grid_feasible(pipe, idx, n_max, eps_ceiling, p_floor, overflow)
        return evaluated[idx]

    if feasible(hi_idx):
        best = hi_idx
    else:
        lo, hi = 0, hi_idx
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        best = lo
    eps_trace, p_trace = [], []
    for n in range(1, n_max + 1):
        _, p, e = _check_point(pipe, best, n, eps_ceiling, p_floor)
        p_trace.append(p)
        eps_trace.append(e)
    delivered = (best * n_max // GRID) / n_max
    diag = {
        "grid_rate": best / GRID,
        "grid_points": {f"{i / GRID:.2f}": evaluated[i] for i in sorted(evaluated)},
        "window": [min(_window(n_max)), n_max],
        "trivial_below": 1.0 / n_max,
        "capped": best == hi_idx,
        "dimension_capped": [i / GRID for i in sorted(overflow)],
        "no_feasible_rate": delivered == 0.0,
        "eps_ceiling": eps_ceiling,
        "p_floor": p_floor,
        "chi": pipe.chi,
    }
    if delivered == 0.0:
        log.warning("%s", NoFeasibleRate("no positive grid rate is feasible"))
    return RateEstimate("probabilistic", delivered, n_max, eps_trace, p_trace, theory, diag)


@dataclass
class HierarchyResult:
    ok: bool
    assembled: list
    slacks: list
    violations: list

    @property
    def min_slack(self):
        return min(self.slacks) if self.slacks else math.inf


def hierarchy_check(records, slack=1e-9):
    """Check ``assembled fidelity >= p_n (1 - eps_n)`` on every record."""
    assembled = [r.assembled_fidelity for r in records]
    slacks = [r.assembled_slack for r in records]
    bad = [r.n for r, s in zip(records, slacks) if s < -slack]
    return HierarchyResult(not bad, assembled, slacks, bad)


@dataclass
class ReversibilityReport:
    forward: RateEstimate
    backward: RateEstimate

    @property
    def product(self):
        return self.forward.achieved_rate * self.backward.achieved_rate

    @property
    def theory_ratio(self):
        return self.forward.theory_ratio

    @property
    def forward_deviation(self):
        return self.forward.deviation

    @property
    def backward_deviation(self):
        return self.backward.deviation

    def to_dict(self):
        return {"forward": self.forward.to_dict(), "backward": self.backward.to_dict(), "product": self.product,
                "theory_ratio": self.theory_ratio, "theory_ratio_backward": self.backward.theory_ratio,
                "forward_deviation": self.forward_deviation, "backward_deviation": self.backward_deviation}


def reversibility_experiment(rho, omega, F=None, n_max=10, **kwargs):
    fwd = estimate_probabilistic_rate(rho, omega, F=F, n_max=n_max, **kwargs)
    bwd = estimate_probabilistic_rate(omega, rho, n_max=n_max, **kwargs)
    return ReversibilityReport(fwd, bwd)
