"""Closed-form dual certificates and the block decompositions behind them.

Two families are covered.  For two copies of a rank-up-to-three Bell-diagonal
state the recurrence protocol's output fidelity and success probability are
certified optimal by explicit dual multipliers, assembled here from their
Bell-basis coefficients and re-checked through the generic dual evaluators
before being handed out.  For the phase-averaged photon-swapping states the
optimality argument is a three-block decomposition plus a relative-entropy
identity, both of which are exposed as small numeric utilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import DualCertificate, eval_fidelity_dual, eval_success_dual
from .qmath import DensityMatrix, StructuredOperator, SubsystemLayout, kron
from .states import bell_diag, bell_projectors, copy_layout

__all__ = [
    "BellParams",
    "BellDualV",
    "EplBlockDecomposition",
    "dejmps_fidelity_certificate",
    "dejmps_success_certificate",
    "epl_block_decomposition",
    "epl_coherent_qubit_form",
    "relative_entropy",
    "sep_guess_state",
    "binary_entropy",
]

# the success-probability certificate has a 1/(2 p1 - 1) pole at p1 = 1/2;
# below this margin the multipliers blow up faster than float error allows
SUCCESS_CERT_P1_FLOOR = 0.505

_EIG_FLOOR = 1e-14
_SUPPORT_TOL = 1e-9


@dataclass(frozen=True)
class BellParams:
    """Bell-basis weights of a two-qubit Bell-diagonal state.

    Carries the probability vector (p1, p2, p3, implied p4) together with the
    equivalent correlation coordinates (r1, r2, r3), in which the partial
    transpose acts as the reflection r2 -> -r2.
    """

    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        probs = (self.p1, self.p2, self.p3, self.p4)
        if min(probs) < -1e-12 or abs(sum(probs[:3]) + probs[3] - 1.0) > 1e-12:
            raise ValueError(f"(p1..p4) = {probs} is not a probability vector")

    @property
    def p4(self) -> float:
        return 1.0 - self.p1 - self.p2 - self.p3

    @property
    def r(self) -> tuple[float, float, float]:
        p1, p2, p3, p4 = self.p1, self.p2, self.p3, self.p4
        return (p1 + p2 - p3 - p4, -p1 + p2 + p3 - p4, p1 - p2 + p3 - p4)

    @classmethod
    def from_r(cls, r1: float, r2: float, r3: float) -> BellParams:
        return cls(
            p1=(1 + r1 - r2 + r3) / 4,
            p2=(1 + r1 + r2 - r3) / 4,
            p3=(1 - r1 + r2 + r3) / 4,
        )

    def state(self, copy: int = 1) -> DensityMatrix:
        return bell_diag(self.p1, self.p2, self.p3, copy=copy)


# index pairs (i, j) of Bell-pair projectors P_i (x) P_j, in the order the
# ten w-coefficients are conventionally listed; two-entry rows are the
# symmetrized i < j combinations
_W_SUPPORT: tuple[tuple[tuple[int, int], ...], ...] = (
    ((0, 0),),
    ((0, 1), (1, 0)),
    ((1, 1),),
    ((2, 2),),
    ((0, 2), (2, 0)),
    ((1, 2), (2, 1)),
    ((3, 3),),
    ((0, 3), (3, 0)),
    ((1, 3), (3, 1)),
    ((2, 3), (3, 2)),
)

_PAULI = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}

# correlation-type Pauli strings on registers (A1, B1, A2, B2) whose traces
# against V give the v-coordinates; the paired ones share their coefficient
_V_STRINGS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("v0", ("IIII",)),
    ("v1", ("IIXX",)),
    ("v2", ("IIYY",)),
    ("v3", ("IIZZ",)),
    ("v11", ("XXXX",)),
    ("v12", ("XXYY",)),
    ("v13", ("XXZZ",)),
    ("v22", ("YYYY",)),
    ("v23", ("YYZZ",)),
)


def _pauli_string(word: str) -> np.ndarray:
    acc = np.array([[1.0]])
    for ch in word:
        acc = np.kron(acc, _PAULI[ch])
    return acc


@dataclass(frozen=True)
class BellDualV:
    """A PT-symmetric dual multiplier on two Bell pairs.

    The ten weights multiply products of Bell projectors (first factor on
    copy one, second on copy two), so the operator is positive exactly when
    every weight is non-negative.  The correlation coordinates derived from
    it witness invariance under the partial transpose: v2 = v12 = v23 = 0.
    """

    w: tuple[float, ...]

    def __post_init__(self):
        if len(self.w) != 10:
            raise ValueError(f"expected 10 weights, got {len(self.w)}")
        if min(self.w) < 0.0:
            raise ValueError("weights must be non-negative")

    def matrix(self) -> np.ndarray:
        bells = bell_projectors()
        acc = np.zeros((16, 16))
        for weight, pairs in zip(self.w, _W_SUPPORT):
            for i, j in pairs:
                acc += weight * np.kron(bells[i], bells[j])
        return acc

    def operator(self) -> StructuredOperator:
        return StructuredOperator(self.matrix(), copy_layout(2))

    def v_coords(self) -> dict[str, float]:
        m = self.matrix()
        return {
            name: float(np.trace(_pauli_string(words[0]) @ m).real)
            for name, words in _V_STRINGS
        }

    def is_pt_invariant(self, tol: float = 1e-12) -> bool:
        v = self.v_coords()
        return max(abs(v["v2"]), abs(v["v12"]), abs(v["v23"])) <= tol


def _recurrence_params(p1: float, p2: float) -> tuple[float, float]:
    """Success probability N and output fidelity of the two-to-one recurrence."""
    n = p1 * p1 + (1 - p1) * (1 - p1)
    return n, p1 * p1 / n


def _check_bell_regime(p1: float, p2: float) -> None:
    p3 = 1.0 - p1 - p2
    if not (p1 > 0.5 and p1 > p2 >= p3 >= 0.0):
        raise ValueError(
            f"(p1, p2) = ({p1}, {p2}) is outside the sorted rank-three regime "
            "p1 > 1/2, p1 > p2 >= 1 - p1 - p2 >= 0"
        )


def _zero_op() -> StructuredOperator:
    return StructuredOperator(np.zeros((16, 16)), copy_layout(2))


def _two_copy_state(p1: float, p2: float) -> DensityMatrix:
    p3 = 1.0 - p1 - p2
    return kron(bell_diag(p1, p2, p3, copy=1), bell_diag(p1, p2, p3, copy=2))


def dejmps_fidelity_certificate(p1: float, p2: float, delta: float) -> DualCertificate:
    """Dual multipliers certifying the recurrence output fidelity as optimal.

    Valid for two copies of p1 Phi+ + p2 Psi+ + (1-p1-p2) Phi- anywhere in
    the sorted regime; the certificate value p1^2 / (p1^2 + (1-p1)^2) does
    not depend on delta, so one construction covers the whole (0, 1] range.
    The assembled certificate is re-checked numerically before being
    returned.
    """
    _check_bell_regime(p1, p2)
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    _, fid = _recurrence_params(p1, p2)
    p3 = 1.0 - p1 - p2
    v = BellDualV(
        w=(
            fid * (1 - p1) ** 2,
            fid * (1 - p1) * p2,
            fid * p2 * p2,
            fid * p3 * p3,
            fid * (1 - p1) * p3,
            fid * p2 * p3,
            0.0,
            0.0,
            0.0,
            0.0,
        )
    )
    scale = 16.0 / delta
    cert = DualCertificate(
        y=fid / delta,
        J=_zero_op(),
        G=_zero_op(),
        H=StructuredOperator(scale * v.matrix(), copy_layout(2)),
        K=_zero_op(),
    )
    feasible, _ = eval_fidelity_dual(_two_copy_state(p1, p2), 2, delta, cert)
    if not feasible:
        raise RuntimeError(
            f"fidelity certificate for (p1, p2) = ({p1}, {p2}) failed its "
            "feasibility re-check"
        )
    return cert


def dejmps_success_certificate(p1: float, p2: float) -> DualCertificate:
    """Dual multipliers certifying the recurrence success probability.

    Certifies that no operation reaches the recurrence output fidelity with
    success probability above N = p1^2 + (1-p1)^2.  The scalar multiplier
    diverges as p1 -> 1/2, so construction is refused below p1 = 0.505
    where rounding noise overtakes the certificate's slack.
    """
    _check_bell_regime(p1, p2)
    if p1 < SUCCESS_CERT_P1_FLOOR:
        raise ValueError(
            f"p1 = {p1} is too close to the 1/(2 p1 - 1) singularity; "
            f"need p1 >= {SUCCESS_CERT_P1_FLOOR}"
        )
    n, fid = _recurrence_params(p1, p2)
    p3 = 1.0 - p1 - p2
    q = 1.0 - p1
    pole = 2.0 * p1 - 1.0
    v = BellDualV(
        w=(
            q * p1 * p1 / pole,
            p1 * p1 * p2 / pole,
            p1 * p1 * p2 * p2 / (q * pole),
            p1 * p1 * p3 * p3 / (q * pole),
            p1 * p1 * p3 / pole,
            p1 * p1 * p2 * p3 / (q * pole),
            0.0,
            0.0,
            0.0,
            0.0,
        )
    )
    bells = bell_projectors()
    r = (
        p1 * p1 * np.kron(bells[0], bells[0])
        + p2 * p2 * np.kron(bells[1], bells[1])
        + p3 * p3 * np.kron(bells[2], bells[2])
        + p2 * p3 * (np.kron(bells[1], bells[2]) + np.kron(bells[2], bells[1]))
    )
    cert = DualCertificate(
        y=16.0 * (-n / (q * pole)),
        J=StructuredOperator(16.0 * r, copy_layout(2)),
        G=_zero_op(),
        H=StructuredOperator(16.0 * v.matrix(), copy_layout(2)),
        K=_zero_op(),
    )
    feasible, _ = eval_success_dual(_two_copy_state(p1, p2), 2, fid, cert)
    if not feasible:
        raise RuntimeError(
            f"success certificate for (p1, p2) = ({p1}, {p2}) failed its "
            "feasibility re-check"
        )
    return cert


# ---------------------------------------------------------------------------
# phase-averaged photon-swapping states


@dataclass(frozen=True)
class EplBlockDecomposition:
    """Three-block split of the phase-averaged state.

    Two blocks are diagonal in the standard basis (their output fidelity is
    capped at 1/2), and one two-level block carries all the coherence.
    Weights are the traces of the unnormalized blocks; a block with zero
    weight has no normalized state and is stored as None.
    """

    weights: tuple[float, float, float]
    blocks: tuple[DensityMatrix | None, ...]

    @property
    def coherent_weight(self) -> float:
        return self.weights[2]

    @property
    def coherent(self) -> DensityMatrix | None:
        return self.blocks[2]


def _normalize(matrix: np.ndarray) -> tuple[float, DensityMatrix | None]:
    weight = float(np.trace(matrix).real)
    if weight < 1e-15:
        return 0.0, None
    return weight, DensityMatrix(matrix / weight, copy_layout(2))


def epl_block_decomposition(p: float, p_d: float) -> EplBlockDecomposition:
    """Split the phase-averaged state into its two diagonal blocks plus
    the coherent two-level block, on registers (A1, B1, A2, B2).

    The weighted sum of the blocks reconstructs the input state exactly,
    and the coherent block compresses to a qubit-pair dephased Bell mixture
    (see `epl_coherent_qubit_form`).
    """
    if not 0.0 <= p <= 1.0 or not 0.0 <= p_d <= 1.0:
        raise ValueError(f"(p, p_d) = ({p}, {p_d}) must lie in the unit square")
    a = p * p / 4
    b = (1 - p) * p / 2
    c = (1 - p) * (1 - p)
    d = 2 * p_d - 1
    p01 = np.diag([0.0, 1.0, 0.0, 0.0])
    p10 = np.diag([0.0, 0.0, 1.0, 0.0])
    e11 = np.diag([0.0, 0.0, 0.0, 1.0])
    cross = np.zeros((4, 4))
    cross[1, 2] = 1.0
    bulk = (
        a * (np.kron(p01, p01) + np.kron(p10, p10))
        + b * (np.kron(e11, p01) + np.kron(e11, p10) + np.kron(p10, e11))
        + c * np.kron(e11, e11)
    )
    stray = b * np.kron(p01, e11)
    coherent = a * (
        np.kron(p01, p10)
        + np.kron(p10, p01)
        + d * (np.kron(cross, cross.T) + np.kron(cross.T, cross))
    )
    pieces = [_normalize(m) for m in (bulk, stray, coherent)]
    return EplBlockDecomposition(
        weights=tuple(w for w, _ in pieces),
        blocks=tuple(s for _, s in pieces),
    )


def epl_coherent_qubit_form(block: DensityMatrix) -> DensityMatrix:
    """Compress the coherent block onto one qubit pair by local relabeling.

    Alice keeps her odd-parity pair as |01> -> |0>, |10> -> |1>; Bob flips
    his, |01> -> |1>, |10> -> |0>.  On the coherent block this is a local
    change of basis and yields the dephased Bell mixture directly.
    """
    if block.layout.dim != 16:
        raise ValueError("expected a two-copy qubit-pair block")
    iso = np.zeros((16, 4))
    # rows are (A1, B1, A2, B2) bits; columns the relabeled (A, B) pair
    iso[0b0110, 0] = 1.0
    iso[0b0011, 1] = 1.0
    iso[0b1100, 2] = 1.0
    iso[0b1001, 3] = 1.0
    target = SubsystemLayout.of(("A", "Alice", 2), ("B", "Bob", 2))
    return DensityMatrix(iso.T @ block.matrix @ iso, target)


def binary_entropy(x: float) -> float:
    """Shannon entropy of a coin with bias x, in bits; h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"argument must lie in [0, 1], got {x}")
    total = 0.0
    for t in (x, 1.0 - x):
        if t > 0.0:
            total -= t * np.log2(t)
    return float(total)


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """tr[rho log rho] - tr[rho log sigma] in bits, or +inf outside support.

    Both spectra are resolved by eigendecomposition; eigenvalues below the
    floor count as exact zeros (0 log 0 = 0), and rho mass of more than
    1e-9 outside sigma's support signals divergence.
    """
    if rho.layout != sigma.layout:
        raise ValueError("states must share a layout")
    rho_eigs, rho_vecs = np.linalg.eigh(rho.matrix)
    sig_eigs, sig_vecs = np.linalg.eigh(sigma.matrix)
    rho_eigs = np.where(rho_eigs > _EIG_FLOOR, rho_eigs, 0.0)
    sig_eigs = np.where(sig_eigs > _EIG_FLOOR, sig_eigs, 0.0)
    overlap = np.abs(rho_vecs.conj().T @ sig_vecs) ** 2
    mass_outside = float(rho_eigs @ overlap @ (sig_eigs == 0.0))
    if mass_outside > _SUPPORT_TOL:
        return float("inf")
    plogp = float(np.sum(rho_eigs[rho_eigs > 0] * np.log2(rho_eigs[rho_eigs > 0])))
    inside = sig_eigs > 0
    cross = float(
        (rho_eigs @ overlap[:, inside]) @ np.log2(sig_eigs[inside])
    )
    return plogp - cross


def sep_guess_state(p: float) -> DensityMatrix:
    """The separable reference state matched to the phase-averaged family.

    Identical to the phase-averaged state with its coherent block fully
    dephased, which is what makes the relative entropy to it collapse to
    the closed form (p^2 / 2)(1 - h(p_d)).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    a = p * p / 4
    b = (1 - p) * p / 2
    c = (1 - p) * (1 - p)
    p_odd = np.diag([0.0, 1.0, 1.0, 0.0])
    e11 = np.diag([0.0, 0.0, 0.0, 1.0])
    m = (
        a * np.kron(p_odd, p_odd)
        + b * (np.kron(e11, p_odd) + np.kron(p_odd, e11))
        + c * np.kron(e11, e11)
    )
    return DensityMatrix(m, copy_layout(2))
