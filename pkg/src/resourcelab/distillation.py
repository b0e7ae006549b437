"""Two LOCC moves on flagged isotropic states.

``Type1`` (flag repair): Alice checks her flag; on the error flag the pair is
re-prepared, with probability ``lam``, in the separable isotropic state of
fidelity ``2^-m``.  ``Type2`` (basis comparison): both parties measure
the ``k`` most significant qubits of their halves in the computational basis,
compare outcomes over a classical channel and raise the error flag on any
mismatch.

Each move has an exact parameter map (:func:`distill_closed_form`) and an
explicit Kraus realisation (:func:`distill_instrument`) that reproduces it.
"""

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg, quantum
from .errors import DimensionOverflow, InvalidParams
from .quantum import FlaggedIsotropicParams

MAX_SIMULATED_M = 5


@dataclass(frozen=True)
class DistillStep:
    kind: str
    lam: float = None
    k: int = None

    def __post_init__(self):
        if self.kind == "type1":
            if self.lam is None or not 0.0 <= self.lam <= 1.0:
                raise InvalidParams(f"type1 step needs lam in [0, 1], got {self.lam!r}")
        elif self.kind == "type2":
            if not isinstance(self.k, (int, np.integer)) or self.k < 1:
                raise InvalidParams(f"type2 step needs an integer k >= 1, got {self.k!r}")
        else:
            raise InvalidParams(f"unknown step kind {self.kind!r}")

    @classmethod
    def type1(cls, lam):
        return cls("type1", lam=float(lam))

    @classmethod
    def type2(cls, k):
        return cls("type2", k=int(k))

    def to_dict(self):
        return {"kind": "type1", "lambda": self.lam} if self.kind == "type1" else {"kind": "type2", "k": self.k}

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict) or "kind" not in obj:
            raise InvalidParams(f"step must be an object with a 'kind', got {obj!r}")
        kind = obj["kind"]
        allowed = {"type1": {"kind", "lambda"}, "type2": {"kind", "k"}}.get(kind)
        if allowed is None:
            raise InvalidParams(f"unknown step kind {kind!r}")
        extra = set(obj) - allowed
        if extra:
            raise InvalidParams(f"unknown keys {sorted(extra)} in {kind} step")
        try:
            return cls.type1(obj["lambda"]) if kind == "type1" else cls.type2(obj["k"])
        except KeyError as exc:
            raise InvalidParams(f"{kind} step is missing {exc}") from exc


def load_chain(text):
    """Parse a JSON list of step objects."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParams(f"chain is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise InvalidParams("chain must be a JSON list of steps")
    return [DistillStep.from_dict(s) for s in raw]


def _check_step(p, step):
    if step.kind == "type2" and step.k >= p.m:
        raise InvalidParams(f"type2 step with k={step.k} needs k < m={p.m}")


def distill_closed_form(p, step):
    """Exact output parameters of ``step`` applied to ``omega(p)``."""
    _check_step(p, step)
    m, eps, delta = p.m, p.eps, p.delta
    if step.kind == "type1":
        new = (m, eps + step.lam * delta * (1.0 - 2.0**-m), delta * (1.0 - step.lam))
    else:
        k = step.k
        norm = 1.0 - 4.0**-m
        new = (m - k, (1.0 - 4.0 ** (k - m)) / norm * eps / 2**k, delta + (1.0 - 2.0**-k) / norm * eps)
    if new[1] + new[2] > 1.0 + 1e-12:
        raise InvalidParams(f"step {step.to_dict()} leaves the parameter domain: eps + delta = {new[1] + new[2]!r}")
    return FlaggedIsotropicParams(new[0], min(new[1], 1.0), min(new[2], 1.0 - min(new[1], 1.0)))


def apply_chain(p, chain):
    for step in chain:
        p = distill_closed_form(p, step)
    return p


# -- Kraus level ---------------------------------------------------------------


def _local_flag(L):
    f = np.zeros((L, L))
    f[L - 1, L - 1] = 1.0
    return f


def _type1_instrument(m, lam):
    L = 2**m + 1
    PeA = np.kron(_local_flag(L), np.eye(L))
    PnA = np.eye(L * L) - PeA
    D = 2**m
    sep = quantum.embed_pair_block(quantum.isotropic(D, 1.0 / D), m)
    branches = [
        quantum.QuantumOperation([PnA]),
        quantum.QuantumOperation([math.sqrt(1.0 - lam) * PeA]),
        quantum.MeasurePrepare(lam * PeA, sep),
    ]
    return quantum.Instrument(branches)


def _type2_instrument(m, k):
    D = 2**m
    Dp = 2 ** (m - k)
    L, Lp = D + 1, Dp + 1
    local = []
    for x in range(2**k):
        M = np.zeros((Lp, L))
        for y in range(Dp):
            M[y, x * Dp + y] = 1.0
        local.append(M)
    flag = np.zeros((Lp, L))
    flag[Lp - 1, L - 1] = 1.0
    agree = [np.kron(M, M) for M in local]
    keep_flag = np.kron(flag, flag)
    passed = sum(K.T @ K for K in agree) + keep_flag.T @ keep_flag
    reject = np.eye(L * L) - passed
    err = quantum.flag_projector(m - k)
    branches = [quantum.QuantumOperation(agree), quantum.QuantumOperation([keep_flag]),
                quantum.MeasurePrepare(reject, err)]
    return quantum.Instrument(branches)


def distill_instrument(m, step):
    """Explicit instrument realising ``step`` on ``m`` flagged pairs."""
    if m > MAX_SIMULATED_M:
        raise DimensionOverflow(f"Kraus simulation is limited to m <= {MAX_SIMULATED_M}, got m={m}")
    if step.kind == "type2" and step.k >= m:
        raise InvalidParams(f"type2 step with k={step.k} needs k < m={m}")
    return _type1_instrument(m, step.lam) if step.kind == "type1" else _type2_instrument(m, step.k)


def distill_kraus(p, step):
    """Simulate ``step`` on ``omega(p)`` and return the output state."""
    inst = distill_instrument(p.m, step)
    return inst.channel().apply(quantum.flagged_isotropic(p)).mat


def kraus_residual(p, step):
    """Trace distance between simulation and closed form."""
    return linalg.trace_distance(distill_kraus(p, step), quantum.flagged_isotropic(distill_closed_form(p, step)))


# -- invariants ----------------------------------------------------------------


class TrackRow(NamedTuple):
    index: int
    params: FlaggedIsotropicParams
    eps_plus_delta: float
    invariant: float
    change: float
    change_bound: float

    def row(self):
        return {"step": self.index, "m": self.params.m, "eps": self.params.eps, "delta": self.params.delta,
                "eps_plus_delta": self.eps_plus_delta, "invariant": self.invariant, "change": self.change,
                "change_bound": self.change_bound}


def probabilistic_invariant(p):
    """``(1 - delta) (1 - eps / (1 - delta))``: success probability times fidelity
    of the flag-conditioned state."""
    if p.delta >= 1.0:
        return 0.0
    return (1.0 - p.delta) * (1.0 - p.eps / (1.0 - p.delta))


def step_change(p, step):
    """Exact change of ``eps + delta`` under ``step``."""
    if step.kind == "type1":
        return -step.lam * p.delta * 2.0**-p.m
    return -p.eps * (2**step.k - 1) * 4.0**-p.m / (1.0 - 4.0**-p.m)


def step_change_bound(p, step):
    if step.kind == "type1":
        return step.lam * p.delta * 2.0**-p.m
    return p.eps * 4.0 ** (step.k - p.m) * 4.0


def invariant_track(chain, p0):
    rows = [TrackRow(0, p0, p0.eps + p0.delta, probabilistic_invariant(p0), 0.0, 0.0)]
    p = p0
    for i, step in enumerate(chain, start=1):
        q = distill_closed_form(p, step)
        change = (q.eps + q.delta) - (p.eps + p.delta)
        rows.append(TrackRow(i, q, q.eps + q.delta, probabilistic_invariant(q), change, step_change_bound(p, step)))
        p = q
    return rows


def plan_chain(p0, eps_target, max_steps=64):
    """Steps moving ``p0`` towards the split ``(eps_target, eps0 + delta0 - eps_target)``.

    Type2 (``k=1``) halves the noise weight while ``eps > eps_target`` and
    ``m > 1``; a final Type1 converts flag weight into noise to hit the
    target.  The sum ``eps + delta`` drifts only by the finite-``m``
    corrections of each step.
    """
    chain = []
    p = p0
    while p.eps > eps_target and p.m > 1 and len(chain) < max_steps:
        step = DistillStep.type2(1)
        chain.append(step)
        p = distill_closed_form(p, step)
    if p.eps < eps_target and p.delta > 0.0:
        lam = min((eps_target - p.eps) / (p.delta * (1.0 - 2.0**-p.m)), 1.0)
        chain.append(DistillStep.type1(lam))
        p = distill_closed_form(p, chain[-1])
    return chain, p
