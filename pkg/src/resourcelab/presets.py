"""Named input states for the CLI and experiments.

Accepted names::

    plus                       |+><+| on a qubit
    zero                       |0><0| (free)
    max-coherent-<d>           uniform superposition on d levels
    amp-<a>                    sqrt(a)|0> + sqrt(1-a)|1>
    noisy-plus-<p>             (1-p)|+><+| + p I/2
    flagged-isotropic:m,eps,delta
    path/to/state.json         {"dim", "re", "im"} (optional "dims")
"""

import json
import math
import os
import re

import numpy as np

from . import freesets, linalg, quantum
from .errors import InvalidParams, InvalidState

PRESET_NAMES = ("plus", "zero", "max-coherent-<d>", "amp-<a>", "noisy-plus-<p>",
                "flagged-isotropic:<m>,<eps>,<delta>")


def _number(text, what):
    try:
        return float(text)
    except ValueError:
        raise InvalidParams(f"bad {what} {text!r}") from None


def load_state(name, tol=None):
    """Return ``(rho, free_family)`` for a preset name or JSON file path."""
    name = name.strip()
    if name == "plus":
        return quantum.plus_state(), freesets.IncoherentFreeSet(2)
    if name == "zero":
        return quantum.ket_to_dm(quantum.basis(2, 0)), freesets.IncoherentFreeSet(2)
    m = re.fullmatch(r"max-coherent-(\d+)", name)
    if m:
        d = int(m.group(1))
        if d < 2:
            raise InvalidParams("max-coherent needs d >= 2")
        return quantum.max_coherent(d), freesets.IncoherentFreeSet(d)
    m = re.fullmatch(r"amp-(.+)", name)
    if m:
        a = _number(m.group(1), "amplitude weight")
        if not 0.0 <= a <= 1.0:
            raise InvalidParams("amp weight must lie in [0, 1]")
        return quantum.ket_to_dm([math.sqrt(a), math.sqrt(1.0 - a)]), freesets.IncoherentFreeSet(2)
    m = re.fullmatch(r"noisy-plus-(.+)", name)
    if m:
        p = _number(m.group(1), "noise weight")
        if not 0.0 <= p <= 1.0:
            raise InvalidParams("noise weight must lie in [0, 1]")
        return (1.0 - p) * quantum.plus_state() + p * quantum.maximally_mixed(2), freesets.IncoherentFreeSet(2)
    m = re.fullmatch(r"flagged-isotropic:(.+)", name)
    if m:
        parts = m.group(1).split(",")
        if len(parts) != 3:
            raise InvalidParams("flagged-isotropic needs m,eps,delta")
        try:
            mm = int(parts[0])
        except ValueError:
            raise InvalidParams(f"bad m {parts[0]!r}") from None
        p = quantum.FlaggedIsotropicParams(mm, _number(parts[1], "eps"), _number(parts[2], "delta"))
        return quantum.flagged_isotropic(p), freesets.FlaggedIsotropicFreeSet(mm)
    if name.endswith(".json") or os.path.sep in name:
        return _load_file(name, tol)
    raise InvalidParams(f"unknown state {name!r}; presets: {', '.join(PRESET_NAMES)} or a JSON file")


def _load_file(path, tol):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise InvalidState(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidState(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidState(f"{path} must hold a JSON object")
    unknown = set(obj) - {"dim", "re", "im", "dims"}
    if unknown:
        raise InvalidState(f"unknown keys {sorted(unknown)} in {path}")
    try:
        rho = linalg.from_json(obj)
    except ValueError as exc:
        raise InvalidState(str(exc)) from exc
    rho = quantum.validate_state(rho, tol)
    dims = obj.get("dims")
    if dims is not None:
        if not isinstance(dims, list) or len(set(dims)) != 1 or int(np.prod(dims)) != rho.shape[0]:
            raise InvalidState("'dims' must list equal local dimensions multiplying to 'dim'")
        return rho, freesets.IncoherentFreeSet(int(dims[0]))
    return rho, freesets.IncoherentFreeSet(rho.shape[0])
