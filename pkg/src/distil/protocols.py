"""Fixed distillation protocols, their Choi forms, and achievable-curve tools.

Each protocol here consumes one or two copies of a two-qubit state and
returns the success probability together with the conditional output state.
Closed forms are the primary implementations; exact matrix simulations of the
underlying circuits live alongside them both as test oracles and for the
sequential compositions the closed forms do not cover.

Curve builders turn a handful of protocol outcomes into a full
fidelity-versus-success-probability tradeoff: mixtures of two schemes are
affine in the coordinates (p_succ, p_succ * F), so the achievable frontier is
the upper concave envelope in that plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qmath import (
    ChoiBranch,
    DensityMatrix,
    StructuredOperator,
    SubsystemLayout,
    choi_of_kraus,
    fidelity_to_target,
    kron,
    max_entangled,
    partial_trace,
    pauli_twirl,
    permute_subsystems,
)
from .states import bell_coefficients, bell_projectors

__all__ = [
    "ProtocolOutcome",
    "FlagRule",
    "KrausProtocol",
    "filtering",
    "bbpssw",
    "dejmps",
    "epl_d",
    "dejmps_circuit",
    "mix",
    "extrapolate_up",
    "extrapolate_to_delta",
    "epl_extrapolate",
    "modified_filtering_optimal",
    "achievable_curve",
    "to_choi",
    "filtering_protocol",
    "dejmps_protocol",
    "epl_d_protocol",
    "identity_protocol",
]

OUTCOME_TOL = 1e-10


@dataclass(frozen=True)
class ProtocolOutcome:
    """Success probability, conditional output state, and its fidelity."""

    p_succ: float
    output: DensityMatrix
    fidelity: float

    def __post_init__(self) -> None:
        if not -1e-12 <= self.p_succ <= 1 + 1e-12:
            raise ValueError(f"p_succ = {self.p_succ} outside [0, 1]")
        d = self.output.layout.party_dim("Alice")
        f = fidelity_to_target(self.output, d)
        if abs(f - self.fidelity) > OUTCOME_TOL:
            raise ValueError(
                f"stated fidelity {self.fidelity} disagrees with output state ({f})"
            )


@dataclass(frozen=True)
class FlagRule:
    """How the two local flags combine into overall success."""

    kind: str  # "local": success iff f_A = f_B = 1; "nonlocal": success iff f_A = f_B

    def __post_init__(self) -> None:
        if self.kind not in ("local", "nonlocal"):
            raise ValueError(f"unknown flag rule {self.kind!r}")

    def success(self, f_a: int, f_b: int) -> bool:
        if self.kind == "local":
            return f_a == 1 and f_b == 1
        return f_a == f_b


@dataclass(frozen=True)
class KrausProtocol:
    """Per-side flagged Kraus families plus the success rule."""

    alice: tuple[tuple[int, np.ndarray], ...]
    bob: tuple[tuple[int, np.ndarray], ...]
    rule: FlagRule

    def __post_init__(self) -> None:
        for name, side in (("alice", self.alice), ("bob", self.bob)):
            total = sum(k.conj().T @ k for _, k in side)
            if np.abs(total - np.eye(total.shape[0])).max() > 1e-10:
                raise ValueError(f"{name} Kraus family is not trace preserving")


def _pair_layout(a_label: str = "A1", b_label: str = "B1") -> SubsystemLayout:
    return SubsystemLayout.of((a_label, "Alice", 2), (b_label, "Bob", 2))


def _outcome(p_succ: float, matrix: np.ndarray, layout: SubsystemLayout) -> ProtocolOutcome:
    """Wrap an unnormalised success block into an outcome.

    At zero success probability the conditional state is undefined; the
    outcome then carries the maximally mixed state as a placeholder.
    """
    p_succ = float(np.real(p_succ))
    if p_succ < 1e-15:
        d = layout.dim
        mixed = DensityMatrix(np.eye(d) / d, layout)
        return ProtocolOutcome(0.0, mixed, fidelity_to_target(mixed, layout.party_dim("Alice")))
    out = DensityMatrix(matrix / p_succ, layout)
    return ProtocolOutcome(min(p_succ, 1.0), out, fidelity_to_target(out, layout.party_dim("Alice")))


# ---------------------------------------------------------------------------
# single-copy filtering


def filtering_kraus(eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Success operators: Alice damps |0>, Bob damps |1>."""
    a = np.diag([np.sqrt(eps), 1.0])
    b = np.diag([1.0, np.sqrt(eps)])
    return a, b


def filtering(rho: DensityMatrix, eps: float) -> ProtocolOutcome:
    """Local filtering on a single copy, success flag (1, 1).

    On p|Phi+><Phi+| + (1-p)|01><01| this gives p_succ = p eps + (1-p) eps^2
    and fidelity p eps / p_succ.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps = {eps} outside [0, 1]")
    if rho.layout.dims != (2, 2):
        raise ValueError("filtering expects a single two-qubit copy")
    a, b = filtering_kraus(eps)
    k = np.kron(a, b)
    out = k @ rho.matrix @ k.conj().T
    return _outcome(np.trace(out).real, out, rho.layout)


# ---------------------------------------------------------------------------
# two-copy recurrence protocols


def _split_copies(rho: DensityMatrix) -> tuple[np.ndarray, SubsystemLayout, SubsystemLayout]:
    """Permute a two-copy state to (a1, a2, b1, b2) qubit order."""
    alice = rho.layout.party_labels("Alice")
    bob = rho.layout.party_labels("Bob")
    if len(alice) != 2 or len(bob) != 2 or rho.dim != 16:
        raise ValueError("expected two copies of a two-qubit state (four qubits)")
    perm = permute_subsystems(rho, [alice[0], alice[1], bob[0], bob[1]])
    src = _pair_layout(alice[0], bob[0])
    tgt = _pair_layout(alice[1], bob[1])
    return perm.matrix, src, tgt


def _copy_marginals(rho: DensityMatrix) -> tuple[DensityMatrix, DensityMatrix]:
    alice = rho.layout.party_labels("Alice")
    bob = rho.layout.party_labels("Bob")
    first = partial_trace(rho, [alice[0], bob[0]])
    second = partial_trace(rho, [alice[1], bob[1]])
    return first, second


def _require_identical_product(rho: DensityMatrix) -> DensityMatrix:
    """Closed forms assume rho = tau (x) tau; verify and return tau."""
    first, second = _copy_marginals(rho)
    if np.abs(first.matrix - second.matrix).max() > 1e-9:
        raise ValueError("closed form needs two identical copies; marginals differ")
    alice = rho.layout.party_labels("Alice")
    bob = rho.layout.party_labels("Bob")
    ordered = permute_subsystems(rho, [alice[0], bob[0], alice[1], bob[1]])
    if np.abs(ordered.matrix - np.kron(first.matrix, second.matrix)).max() > 1e-9:
        raise ValueError("closed form needs a product of independent copies")
    return first


def _sorted_bell_weights(tau: DensityMatrix) -> np.ndarray:
    """Bell weights of the twirled copy, sorted descending (stable on ties)."""
    twirled = pauli_twirl(DensityMatrix(tau.matrix, _pair_layout()))
    q = bell_coefficients(twirled.matrix)
    order = sorted(range(4), key=lambda i: (-q[i], i))
    return q[order]


def _recurrence(p: np.ndarray) -> tuple[float, np.ndarray]:
    """Bilateral-CNOT recurrence on sorted weights.

    Returns (p_succ, output weights in Bell order Phi+, Psi+, Phi-, Psi-): the
    source copy ends up as p'1 Phi+ + p'2 Psi+ + (2 p1 p4/N) Phi- +
    (2 p2 p3/N) Psi-.
    """
    n = (p[0] + p[3]) ** 2 + (p[1] + p[2]) ** 2
    out = np.array(
        [
            p[0] ** 2 + p[3] ** 2,
            p[1] ** 2 + p[2] ** 2,
            2 * p[0] * p[3],
            2 * p[1] * p[2],
        ]
    ) / n
    return float(n), out


def _bell_mixture(weights: np.ndarray, layout: SubsystemLayout) -> np.ndarray:
    return sum(w * proj for w, proj in zip(weights, bell_projectors()))


def dejmps(rho: DensityMatrix) -> ProtocolOutcome:
    """DEJMPS on two identical copies: twirl, sort Bell weights, distill.

    The sort places the largest weight on Phi+ and the smallest on Psi-,
    which maximises the output fidelity of the recurrence.  Fails when the
    sorted fidelity is not above one half.
    """
    tau = _require_identical_product(rho)
    p = _sorted_bell_weights(tau)
    if p[0] <= 0.5:
        raise ValueError(f"input fidelity {p[0]} is not above 1/2")
    p_succ, out = _recurrence(p)
    layout = _pair_layout(*_source_labels(rho))
    return _outcome(p_succ, p_succ * _bell_mixture(out, layout), layout)


def bbpssw(rho: DensityMatrix) -> ProtocolOutcome:
    """BBPSSW on two identical copies: depolarise, then distill.

    p_succ = F^2 + 2F(1-F)/3 + 5((1-F)/3)^2 and
    F' = (F^2 + ((1-F)/3)^2)/p_succ for input fidelity F > 1/2.
    """
    tau = _require_identical_product(rho)
    f = fidelity_to_target(DensityMatrix(tau.matrix, _pair_layout()), 2)
    if f <= 0.5:
        raise ValueError(f"input fidelity {f} is not above 1/2")
    p = np.array([f, (1 - f) / 3, (1 - f) / 3, (1 - f) / 3])
    p_succ, out = _recurrence(p)
    layout = _pair_layout(*_source_labels(rho))
    return _outcome(p_succ, p_succ * _bell_mixture(out, layout), layout)


def _source_labels(rho: DensityMatrix) -> tuple[str, str]:
    return rho.layout.party_labels("Alice")[0], rho.layout.party_labels("Bob")[0]


# ---------------------------------------------------------------------------
# circuit simulations


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


_CNOT = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)

_PAULI_FRAME = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Z": np.diag([1.0, -1.0]),
    "XZ": np.array([[0.0, -1.0], [1.0, 0.0]]),
}


def _bilateral_circuit(
    rho: DensityMatrix,
    alice_rot: np.ndarray,
    bob_rot: np.ndarray,
    success_pairs: list[tuple[int, int]],
    alice_correction: np.ndarray | None = None,
) -> ProtocolOutcome:
    """Exact 16-dim simulation: local rotations, bilateral CNOT, target measurement."""
    m, src, _ = _split_copies(rho)
    u_a = _CNOT @ np.kron(alice_rot, alice_rot)
    u_b = _CNOT @ np.kron(bob_rot, bob_rot)
    u = np.kron(u_a, u_b)
    m = u @ m @ u.conj().T
    acc = np.zeros((4, 4), dtype=complex)
    eye = np.eye(2)
    for f_a, f_b in success_pairs:
        bra_a = np.kron(eye, eye[f_a : f_a + 1, :])  # (a1, a2) -> a1
        bra_b = np.kron(eye, eye[f_b : f_b + 1, :])
        k = np.kron(bra_a, bra_b)
        acc += k @ m @ k.conj().T
    if alice_correction is not None:
        corr = np.kron(alice_correction, eye)
        acc = corr @ acc @ corr.conj().T
    return _outcome(np.trace(acc).real, acc, src)


def dejmps_circuit(rho: DensityMatrix) -> ProtocolOutcome:
    """The DEJMPS circuit applied as-is (no twirl, no coefficient sort).

    Useful both as an oracle for the closed form and for sequential
    compositions on pairs of non-identical Bell-diagonal states.
    """
    return _bilateral_circuit(rho, _rx(np.pi / 2), _rx(-np.pi / 2), [(0, 0), (1, 1)])


def _bbpssw_circuit(rho: DensityMatrix) -> ProtocolOutcome:
    return _bilateral_circuit(rho, np.eye(2), np.eye(2), [(0, 0), (1, 1)])


def epl_d(rho: DensityMatrix, rotate: bool = True) -> ProtocolOutcome:
    """EPL-D: bilateral CNOT, keep only the (1, 1) target outcome.

    With ``rotate`` the returned source copy includes the scheme's final
    Pauli-frame correction on Alice's side, chosen to maximise fidelity; on R
    states (plus sign) that correction is the usual X and the output is
    exactly maximally entangled.
    """
    raw = _bilateral_circuit(rho, np.eye(2), np.eye(2), [(1, 1)])
    if not rotate or raw.p_succ == 0.0:
        return raw
    best = raw
    for name, pauli in _PAULI_FRAME.items():
        if name == "I":
            continue
        corr = np.kron(pauli, np.eye(2))
        rotated = DensityMatrix(corr @ raw.output.matrix @ corr.conj().T, raw.output.layout)
        cand = ProtocolOutcome(raw.p_succ, rotated, fidelity_to_target(rotated, 2))
        if cand.fidelity > best.fidelity + 1e-15:
            best = cand
    return best


# ---------------------------------------------------------------------------
# mixtures and extrapolation


def mix(r: float, a: ProtocolOutcome, b: ProtocolOutcome) -> ProtocolOutcome:
    """Shared-coin mixture: run protocol a with probability r, else b."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r = {r} outside [0, 1]")
    p_succ = r * a.p_succ + (1 - r) * b.p_succ
    if p_succ < 1e-15:
        raise ValueError("mixture never succeeds; fidelity undefined")
    b_out = permute_subsystems(b.output, list(a.output.layout.labels))
    m = (r * a.p_succ * a.output.matrix + (1 - r) * b.p_succ * b_out.matrix) / p_succ
    out = DensityMatrix(m, a.output.layout)
    return ProtocolOutcome(p_succ, out, fidelity_to_target(out, out.layout.party_dim("Alice")))


def _isotropic_of_fidelity(f: float, layout: SubsystemLayout) -> DensityMatrix:
    d = layout.party_dim("Alice")
    p = (f * d * d - 1) / (d * d - 1)
    m = p * max_entangled(d) + (1 - p) * np.eye(d * d) / (d * d)
    return DensityMatrix(m, layout)


def extrapolate_up(
    base: ProtocolOutcome,
    input_copy_fidelity: float,
    r: float,
    input_state: DensityMatrix | None = None,
) -> ProtocolOutcome:
    """Mix a protocol with simply outputting one raw input copy.

    p_succ = r p + (1 - r) and F = (r p F_out + (1-r) F_in)/p_succ.  When the
    raw copy's matrix is not supplied, a representative state of the stated
    fidelity stands in for it (the tradeoff only depends on the fidelity).
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r = {r} outside [0, 1]")
    if input_state is None:
        input_state = _isotropic_of_fidelity(input_copy_fidelity, base.output.layout)
    else:
        f_state = fidelity_to_target(input_state, input_state.layout.party_dim("Alice"))
        if abs(f_state - input_copy_fidelity) > 1e-9:
            raise ValueError("input_state fidelity disagrees with input_copy_fidelity")
        input_state = DensityMatrix(
            permute_subsystems(input_state, list(base.output.layout.labels)).matrix,
            base.output.layout,
        )
    passthrough = ProtocolOutcome(1.0, input_state, input_copy_fidelity)
    return mix(r, base, passthrough)


def extrapolate_to_delta(
    base: ProtocolOutcome, input_copy_fidelity: float, delta: float
) -> ProtocolOutcome:
    """Extrapolate_up with the coin weight solved for a target success probability."""
    if not base.p_succ <= delta <= 1.0:
        raise ValueError(
            f"target delta {delta} outside [{base.p_succ}, 1]; extrapolation only raises p_succ"
        )
    r = 1.0 if base.p_succ == 1.0 else (1.0 - delta) / (1.0 - base.p_succ)
    return extrapolate_up(base, input_copy_fidelity, r)


def epl_extrapolate(p: float, p_d: float, r: float) -> ProtocolOutcome:
    """EPL-D on the phase-averaged source, padded with a fidelity-1/2 output.

    On failure the parties output a classically correlated separable state
    with probability r: p_succ = p^2/2 + (1 - p^2/2) r and
    F = (p^2/2 p_d + (1 - p^2/2) r/2)/p_succ.
    """
    for name, v in (("p", p), ("p_d", p_d), ("r", r)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} = {v} outside [0, 1]")
    succ = p * p / 2
    p_succ = succ + (1 - succ) * r
    layout = _pair_layout()
    if p_succ < 1e-15:
        return _outcome(0.0, np.zeros((4, 4)), layout)
    phi_p, _, phi_m, _ = bell_projectors()
    sep = np.diag([0.5, 0.0, 0.0, 0.5])
    m = (succ * (p_d * phi_p + (1 - p_d) * phi_m) + (1 - succ) * r * sep) / p_succ
    out = DensityMatrix(m, layout)
    return ProtocolOutcome(p_succ, out, fidelity_to_target(out, 2))


def modified_filtering_optimal(p: float, p_succ: float) -> float:
    """Best fidelity of filtering plus a coin-tossed separable fallback.

    Alice and Bob filter; on failure they output a fidelity-1/2 state with
    some probability.  Optimising the filter strength and the coin for a
    fixed overall success probability gives a two-branch closed form: an
    interior optimum when the filter is weak enough to matter, otherwise the
    plain-filtering boundary.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p = {p} outside (0, 1]")
    if not 0.0 < p_succ <= 1.0:
        raise ValueError(f"p_succ = {p_succ} outside (0, 1]")
    if p <= 2 / 3 and p_succ >= 3 * p * p / (4 * (1 - p)):
        return 0.5 * (1 + p * p / (4 * p_succ * (1 - p)))
    return 2 * p / (p + np.sqrt(p * p + 4 * p_succ * (1 - p)))


# ---------------------------------------------------------------------------
# achievable curves


def achievable_curve(
    points: list[tuple[float, float]], deltas: np.ndarray
) -> np.ndarray:
    """Fidelity frontier through achievable (p_succ, F) points.

    Mixtures of schemes are affine in (p_succ, p_succ * F) and success can
    always be discarded (scaling both coordinates toward the origin), so the
    frontier is the upper concave envelope of the given points plus the
    origin, read off at the requested success probabilities.
    """
    pts = sorted({(0.0, 0.0)} | {(float(d), float(d) * float(f)) for d, f in points})
    hull: list[tuple[float, float]] = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (pt[1] - y1) >= (pt[0] - x1) * (y2 - y1):
                hull.pop()
            else:
                break
        hull.append(pt)
    xs = np.array([h[0] for h in hull])
    ys = np.array([h[1] for h in hull])
    deltas = np.asarray(deltas, dtype=float)
    if deltas.max() > xs.max() + 1e-12:
        raise ValueError(
            f"no achievable point at or above p_succ = {deltas.max():g}; add one"
        )
    return np.interp(deltas, xs, ys) / deltas


# ---------------------------------------------------------------------------
# Choi representations for the search modules


def to_choi(proto: KrausProtocol) -> tuple[list[ChoiBranch], list[ChoiBranch]]:
    """Per-side Choi branch lists (Alice's, Bob's) of a flagged protocol."""
    sides = []
    for party, family in (("Alice", proto.alice), ("Bob", proto.bob)):
        d_out, d_in = family[0][1].shape
        prefix = "A" if party == "Alice" else "B"
        out_layout = SubsystemLayout.of((f"{prefix}hat", party, d_out))
        in_layout = SubsystemLayout.of((f"{prefix}in", party, d_in))
        sides.append(list(choi_of_kraus(list(family), d_in, in_layout, out_layout)))
    return sides[0], sides[1]


def filtering_protocol(eps: float) -> KrausProtocol:
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps = {eps} outside [0, 1]")
    a1, b1 = filtering_kraus(eps)
    a0 = np.diag([np.sqrt(1 - eps), 0.0])
    b0 = np.diag([0.0, np.sqrt(1 - eps)])
    return KrausProtocol(((1, a1), (0, a0)), ((1, b1), (0, b0)), FlagRule("local"))


def identity_protocol() -> KrausProtocol:
    return KrausProtocol(((1, np.eye(2)),), ((1, np.eye(2)),), FlagRule("local"))


def _measured_side_kraus(rot: np.ndarray, correction_on_1: np.ndarray | None = None) -> tuple:
    """Two-qubit side circuit: rotations, CNOT, measure the target qubit."""
    u = _CNOT @ np.kron(rot, rot)
    eye = np.eye(2)
    out = []
    for f in (0, 1):
        k = np.kron(eye, eye[f : f + 1, :]) @ u
        if f == 1 and correction_on_1 is not None:
            k = correction_on_1 @ k
        out.append((f, k))
    return tuple(out)


def dejmps_protocol() -> KrausProtocol:
    """The DEJMPS local circuits; success when the measured flags agree."""
    return KrausProtocol(
        _measured_side_kraus(_rx(np.pi / 2)),
        _measured_side_kraus(_rx(-np.pi / 2)),
        FlagRule("nonlocal"),
    )


def epl_d_protocol() -> KrausProtocol:
    """EPL-D local circuits with Alice's X correction; success on flags (1, 1)."""
    return KrausProtocol(
        _measured_side_kraus(np.eye(2), correction_on_1=_PAULI_FRAME["X"]),
        _measured_side_kraus(np.eye(2)),
        FlagRule("local"),
    )
