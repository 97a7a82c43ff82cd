"""Input-state families and the text mini-language describing them.

Families cover the standard benchmarks for two-party distillation: isotropic
states, Bell-diagonal states, the rank-two R/S states (a Bell state mixed
with a single computational-basis ket), and the phase-averaged two-copy state
produced by single-photon path entanglement swapping (the EPL state).

A state is requested either programmatically via :class:`StateSpec` or with
the compact text form ``family:param,param[;copies=n]``, e.g.
``bell3:0.7,0.2,0.1;copies=2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .qmath import (
    DensityMatrix,
    SubsystemLayout,
    from_json_dict,
    kron,
    max_entangled,
)

__all__ = [
    "StateSpec",
    "parse_state_spec",
    "make_state",
    "isotropic",
    "bell_diag",
    "r_state",
    "rotated_r",
    "s_state",
    "epl_integrated",
    "bell_vectors",
    "bell_projectors",
    "bell_coefficients",
    "copy_layout",
]

# Bell basis order used throughout: Phi+, Psi+, Phi-, Psi-.
BELL_ORDER = ("phi+", "psi+", "phi-", "psi-")


def bell_vectors() -> list[np.ndarray]:
    """The four Bell vectors on qubit (x) qubit, ordered Phi+, Psi+, Phi-, Psi-."""
    s = 1 / np.sqrt(2)
    return [
        s * np.array([1.0, 0.0, 0.0, 1.0]),
        s * np.array([0.0, 1.0, 1.0, 0.0]),
        s * np.array([1.0, 0.0, 0.0, -1.0]),
        s * np.array([0.0, 1.0, -1.0, 0.0]),
    ]


def bell_projectors() -> list[np.ndarray]:
    return [np.outer(v, v) for v in bell_vectors()]


def bell_coefficients(matrix: np.ndarray) -> np.ndarray:
    """Diagonal weights of a two-qubit matrix in the Bell basis."""
    return np.array([np.real(v @ matrix @ v) for v in bell_vectors()])


def copy_layout(copies: int, local_dim: int = 2) -> SubsystemLayout:
    """Layout (A1, B1, A2, B2, ...) with the given per-party local dimension."""
    subs = []
    for i in range(1, copies + 1):
        subs.append((f"A{i}", "Alice", local_dim))
        subs.append((f"B{i}", "Bob", local_dim))
    return SubsystemLayout.of(*subs)


@dataclass(frozen=True)
class StateSpec:
    """A state family, its parameters, and a copy count."""

    family: str
    params: tuple[float, ...] = ()
    copies: int = 1
    path: str | None = None

    def text(self) -> str:
        """The compact text form of this spec."""
        if self.family == "custom":
            body = f"custom:{self.path}"
        elif self.family == "r_state":
            sign = "+" if self.params[1] > 0 else "-"
            body = f"r_state:{self.params[0]:g},{sign}"
        else:
            body = f"{self.family}:" + ",".join(f"{p:g}" for p in self.params)
        if self.copies != 1:
            body += f";copies={self.copies}"
        return body


_FAMILY_ALIASES = {
    "isotropic": "isotropic",
    "iso": "isotropic",
    "bell_diag": "bell_diag",
    "bell3": "bell_diag",
    "r_state": "r_state",
    "r": "r_state",
    "rotated_r": "rotated_r",
    "s_state": "s_state",
    "s": "s_state",
    "epl": "epl",
    "custom": "custom",
}


def parse_state_spec(text: str) -> StateSpec:
    """Parse ``family:param,param[;copies=n]`` into a StateSpec."""
    body = text.strip()
    copies = 1
    if ";" in body:
        body, *opts = body.split(";")
        for opt in opts:
            key, _, val = opt.partition("=")
            if key.strip() != "copies":
                raise ValueError(f"unknown state option {key.strip()!r}")
            copies = int(val)
            if copies < 1:
                raise ValueError(f"copies must be positive, got {copies}")
    name, _, arg_text = body.partition(":")
    family = _FAMILY_ALIASES.get(name.strip().lower())
    if family is None:
        raise ValueError(f"unknown state family {name.strip()!r}")
    if family == "custom":
        return StateSpec("custom", (), copies, path=arg_text.strip())
    args = [a.strip() for a in arg_text.split(",")] if arg_text.strip() else []
    if family == "r_state":
        if len(args) != 2 or args[1] not in ("+", "-"):
            raise ValueError("r_state takes (p, sign) with sign '+' or '-'")
        params = (float(args[0]), 1.0 if args[1] == "+" else -1.0)
    else:
        params = tuple(float(a) for a in args)
    return StateSpec(family, params, copies)


def _check_prob(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} = {value} is outside [0, 1]")
    return value


def isotropic(p: float, d: int = 2, copy: int = 1) -> DensityMatrix:
    """p Phi_d + (1-p) I/d^2 on one Alice/Bob register pair."""
    _check_prob("p", p)
    if d < 2:
        raise ValueError(f"local dimension must be at least 2, got {d}")
    m = p * max_entangled(d) + (1 - p) * np.eye(d * d) / (d * d)
    layout = SubsystemLayout.of((f"A{copy}", "Alice", d), (f"B{copy}", "Bob", d))
    return DensityMatrix(m, layout)


def bell_diag(p1: float, p2: float, p3: float, copy: int = 1) -> DensityMatrix:
    """Bell-diagonal state with weights (p1, p2, p3, 1-p1-p2-p3) on Phi+, Psi+, Phi-, Psi-.

    Coefficients are taken as given; no sorting happens here (the DEJMPS
    operation owns the sort).
    """
    for name, v in (("p1", p1), ("p2", p2), ("p3", p3)):
        _check_prob(name, v)
    p4 = 1.0 - p1 - p2 - p3
    if p4 < -1e-12:
        raise ValueError(f"p1+p2+p3 = {p1 + p2 + p3} exceeds 1")
    p4 = max(p4, 0.0)
    m = sum(w * proj for w, proj in zip((p1, p2, p3, p4), bell_projectors()))
    return DensityMatrix(m, _single_copy_layout(copy))


def _single_copy_layout(copy: int) -> SubsystemLayout:
    return SubsystemLayout.of((f"A{copy}", "Alice", 2), (f"B{copy}", "Bob", 2))


def r_state(p: float, sign: int = 1, copy: int = 1) -> DensityMatrix:
    """p |Psi+-><Psi+-| + (1-p)|11><11|."""
    _check_prob("p", p)
    psi = bell_vectors()[1] if sign > 0 else bell_vectors()[3]
    m = p * np.outer(psi, psi) + (1 - p) * np.diag([0.0, 0.0, 0.0, 1.0])
    return DensityMatrix(m, _single_copy_layout(copy))


def rotated_r(p: float, copy: int = 1) -> DensityMatrix:
    """p |Phi+><Phi+| + (1-p)|01><01|: the R state after a local X on Alice."""
    _check_prob("p", p)
    m = p * max_entangled(2) + (1 - p) * np.diag([0.0, 1.0, 0.0, 0.0])
    return DensityMatrix(m, _single_copy_layout(copy))


def s_state(p: float, copy: int = 1) -> DensityMatrix:
    """p |Phi+><Phi+| + (1-p)|11><11|."""
    _check_prob("p", p)
    m = p * max_entangled(2) + (1 - p) * np.diag([0.0, 0.0, 0.0, 1.0])
    return DensityMatrix(m, _single_copy_layout(copy))


def epl_integrated(p: float, p_d: float) -> DensityMatrix:
    """Phase-averaged two-copy state of the single-photon swapping source.

    Each copy is |psi_phi> = (|01> + e^{i phi}|10>)/sqrt(2) with weight p and
    |11> with weight 1-p; the copies share the random phase up to a flip
    (aligned with probability p_d, offset by pi otherwise), and the average
    over the uniform phase is carried out in closed form.  Registers are
    ordered (A1, B1, A2, B2).
    """
    _check_prob("p", p)
    _check_prob("p_d", p_d)
    a = p * p / 4
    b = (1 - p) * p / 2
    c = (1 - p) * (1 - p)
    d = 2 * p_d - 1
    p_odd = np.diag([0.0, 1.0, 1.0, 0.0])
    e11 = np.diag([0.0, 0.0, 0.0, 1.0])
    cross = np.zeros((4, 4))
    cross[1, 2] = 1.0  # |01><10| on one copy
    m = a * (np.kron(p_odd, p_odd) + d * (np.kron(cross, cross.T) + np.kron(cross.T, cross)))
    m += b * (np.kron(e11, p_odd) + np.kron(p_odd, e11))
    m += c * np.kron(e11, e11)
    return DensityMatrix(m, copy_layout(2))


def _relabel_copy(state: DensityMatrix, copy: int) -> DensityMatrix:
    subs = []
    for s in state.layout.subsystems:
        label = f"A{copy}" if s.party == "Alice" else f"B{copy}"
        subs.append((label, s.party, s.dim))
    return DensityMatrix(state.matrix, SubsystemLayout.of(*subs))


def make_state(spec: StateSpec | str) -> DensityMatrix:
    """Build the density matrix a spec describes, tensored over its copies.

    Copies are laid out copy-major: (A1, B1, A2, B2, ...).
    """
    if isinstance(spec, str):
        spec = parse_state_spec(spec)
    family, params = spec.family, spec.params

    if family == "custom":
        if not spec.path:
            raise ValueError("custom family needs a file path")
        data = json.loads(Path(spec.path).read_text())
        base = from_json_dict(data)
        single = DensityMatrix(base.matrix, base.layout)
        if spec.copies != 1:
            raise ValueError("custom states do not support the copies option")
        return single

    if family == "epl":
        if len(params) != 2:
            raise ValueError("epl takes (p, p_d)")
        if spec.copies != 1:
            raise ValueError(
                "the epl family is already a joint two-copy state; copies must be 1"
            )
        return epl_integrated(*params)

    def build(copy: int) -> DensityMatrix:
        if family == "isotropic":
            if len(params) not in (1, 2):
                raise ValueError("isotropic takes (p[, D])")
            d = int(params[1]) if len(params) == 2 else 2
            if len(params) == 2 and params[1] != d:
                raise ValueError(f"local dimension {params[1]} is not an integer")
            return isotropic(params[0], d, copy)
        if family == "bell_diag":
            if len(params) != 3:
                raise ValueError("bell_diag takes (p1, p2, p3)")
            return bell_diag(*params, copy=copy)
        if family == "r_state":
            return r_state(params[0], 1 if params[1] > 0 else -1, copy)
        if family == "rotated_r":
            if len(params) != 1:
                raise ValueError("rotated_r takes (p,)")
            return rotated_r(params[0], copy)
        if family == "s_state":
            if len(params) != 1:
                raise ValueError("s_state takes (p,)")
            return s_state(params[0], copy)
        raise ValueError(f"unknown family {family!r}")

    state = build(1)
    for i in range(2, spec.copies + 1):
        state = kron(state, build(i))
    return state
