"""Linear algebra for multipartite operators with named subsystems.

Operators carry a layout: an ordered list of subsystems, each with a label
(``"A1"``, ``"Bhat"``, ...), a party (``Alice``, ``Bob`` or ``Flag``) and a
dimension.  Partial traces, partial transposes and permutations are requested
by label, so callers never juggle flat tensor indices.

The partial transpose is always taken over every Bob subsystem, matching the
usual convention for PPT tests on a bipartite cut.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-10
DENSITY_EIG_TOL = 1e-9
DENSITY_TRACE_TOL = 1e-10
CHOI_MARGINAL_TOL = 1e-8

PARTIES = ("Alice", "Bob", "Flag")


@dataclass(frozen=True)
class Subsystem:
    """One named tensor factor."""

    label: str
    party: str
    dim: int

    def __post_init__(self) -> None:
        if self.party not in PARTIES:
            raise ValueError(f"unknown party {self.party!r}, expected one of {PARTIES}")
        if self.dim < 1:
            raise ValueError(f"subsystem {self.label!r} has dimension {self.dim}")


class SubsystemLayout:
    """Ordered collection of subsystems; the shape of an operator."""

    def __init__(self, subsystems: Iterable[Subsystem]):
        subs = tuple(subsystems)
        labels = [s.label for s in subs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        self.subsystems = subs

    @classmethod
    def of(cls, *spec: tuple[str, str, int]) -> "SubsystemLayout":
        """Build a layout from ``(label, party, dim)`` tuples."""
        return cls(Subsystem(*s) for s in spec)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def index(self, label: str) -> int:
        for i, s in enumerate(self.subsystems):
            if s.label == label:
                return i
        raise KeyError(f"no subsystem labelled {label!r} in {self.labels}")

    def party_dim(self, party: str) -> int:
        d = 1
        for s in self.subsystems:
            if s.party == party:
                d *= s.dim
        return d

    def party_labels(self, party: str) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems if s.party == party)

    def subset(self, labels: Iterable[str]) -> "SubsystemLayout":
        wanted = list(labels)
        return SubsystemLayout(self.subsystems[self.index(lb)] for lb in wanted)

    def __len__(self) -> int:
        return len(self.subsystems)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SubsystemLayout) and self.subsystems == other.subsystems

    def __repr__(self) -> str:
        inner = ", ".join(f"{s.label}[{s.party[0]}]:{s.dim}" for s in self.subsystems)
        return f"SubsystemLayout({inner})"


class StructuredOperator:
    """A Hermitian matrix together with its subsystem layout.

    Inputs that are Hermitian up to ``HERMITICITY_TOL`` (entrywise) are
    symmetrised; anything worse is rejected rather than silently averaged.
    """

    def __init__(self, matrix: np.ndarray, layout: SubsystemLayout):
        m = np.asarray(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if m.shape[0] != layout.dim:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match layout dimension {layout.dim}"
            )
        gap = np.abs(m - m.conj().T).max() if m.size else 0.0
        if gap > HERMITICITY_TOL:
            raise ValueError(f"operator is not Hermitian (asymmetry {gap:.3e})")
        m = (m + m.conj().T) / 2
        m.setflags(write=False)
        self.matrix = m
        self.layout = layout

    @property
    def dim(self) -> int:
        return self.layout.dim

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.matrix.imag).max() <= tol)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, layout={self.layout!r})"


class DensityMatrix(StructuredOperator):
    """A state: unit trace, eigenvalues above ``-DENSITY_EIG_TOL``."""

    def __init__(self, matrix: np.ndarray, layout: SubsystemLayout):
        super().__init__(matrix, layout)
        tr = np.trace(self.matrix).real
        if abs(tr - 1.0) > DENSITY_TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} is not 1")
        lo = np.linalg.eigvalsh(self.matrix)[0]
        if lo < -DENSITY_EIG_TOL:
            raise ValueError(f"density matrix has eigenvalue {lo:.3e}")


@dataclass(frozen=True)
class ChoiBranch:
    """One flagged branch of a channel in Choi form.

    ``matrix`` lives on output registers followed by a copy of the input
    registers (listed in ``in_labels``).  Summed over the flags of a valid
    instrument, the marginal on the input copy is ``I / in_dim``.
    """

    flag: int
    matrix: StructuredOperator
    in_labels: tuple[str, ...]

    @property
    def in_dim(self) -> int:
        return self.matrix.layout.subset(self.in_labels).dim

    @property
    def out_labels(self) -> tuple[str, ...]:
        return tuple(lb for lb in self.matrix.layout.labels if lb not in self.in_labels)


# ---------------------------------------------------------------------------
# raw-array helpers (no layout bookkeeping)


def permute_axes(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of a square matrix on ``prod(dims)``."""
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    t = t.transpose(list(perm) + [n + p for p in perm])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def ptrace_axes(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep`` (order follows ``keep``)."""
    n = len(dims)
    rest = [i for i in range(n) if i not in keep]
    perm = list(keep) + rest
    mk = permute_axes(m, dims, perm)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    dr = int(np.prod([dims[i] for i in rest])) if rest else 1
    return np.einsum("irjr->ij", mk.reshape(dk, dr, dk, dr))


def ptranspose_axes(m: np.ndarray, dims: Sequence[int], which: Sequence[int]) -> np.ndarray:
    """Transpose the factors listed in ``which``."""
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    axes = list(range(2 * n))
    for i in which:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    d = int(np.prod(dims))
    return t.transpose(axes).reshape(d, d)


def max_entangled_vec(d: int) -> np.ndarray:
    """The unit vector (1/sqrt(d)) * sum_j |jj>."""
    v = np.zeros(d * d)
    v[:: d + 1] = 1.0
    return v / np.sqrt(d)


def max_entangled(d: int) -> np.ndarray:
    """Projector onto the maximally entangled state on d x d."""
    v = max_entangled_vec(d)
    return np.outer(v, v)


# ---------------------------------------------------------------------------
# layout-aware operations


def _rewrap(matrix: np.ndarray, layout: SubsystemLayout, like: StructuredOperator) -> StructuredOperator:
    cls = DensityMatrix if isinstance(like, DensityMatrix) else StructuredOperator
    return cls(matrix, layout)


def kron(a: StructuredOperator, b: StructuredOperator) -> StructuredOperator:
    """Tensor product; layouts are concatenated and labels must not clash."""
    overlap = set(a.layout.labels) & set(b.layout.labels)
    if overlap:
        raise ValueError(f"label collision in kron: {sorted(overlap)}")
    layout = SubsystemLayout(a.layout.subsystems + b.layout.subsystems)
    m = np.kron(a.matrix, b.matrix)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(m, layout)
    return StructuredOperator(m, layout)


def permute_subsystems(m: StructuredOperator, order: Sequence[str]) -> StructuredOperator:
    """Reorder subsystems to the given label order (a permutation of all labels)."""
    if sorted(order) != sorted(m.layout.labels):
        raise ValueError(f"{list(order)} is not a permutation of {list(m.layout.labels)}")
    perm = [m.layout.index(lb) for lb in order]
    layout = SubsystemLayout(m.layout.subsystems[i] for i in perm)
    return _rewrap(permute_axes(m.matrix, m.layout.dims, perm), layout, m)


def partial_trace(m: StructuredOperator, keep: Iterable[str]) -> StructuredOperator:
    """Trace out everything except the ``keep`` labels (kept in layout order)."""
    keep_set = set(keep)
    unknown = keep_set - set(m.layout.labels)
    if unknown:
        raise KeyError(f"labels {sorted(unknown)} not in layout {m.layout.labels}")
    idx = [i for i, s in enumerate(m.layout.subsystems) if s.label in keep_set]
    layout = SubsystemLayout(m.layout.subsystems[i] for i in idx)
    return _rewrap(ptrace_axes(m.matrix, m.layout.dims, idx), layout, m)


def partial_transpose(m: StructuredOperator) -> StructuredOperator:
    """Transpose all Bob subsystems (the bipartite partial transpose)."""
    which = [i for i, s in enumerate(m.layout.subsystems) if s.party == "Bob"]
    return StructuredOperator(ptranspose_axes(m.matrix, m.layout.dims, which), m.layout)


def is_ppt(m: StructuredOperator, tol: float = 1e-9) -> bool:
    """Whether the partial transpose across the Alice/Bob cut is positive."""
    return partial_transpose(m).min_eig() >= -tol


def _party_major_order(layout: SubsystemLayout) -> list[str]:
    rank = {"Alice": 0, "Flag": 1, "Bob": 2}
    order = sorted(range(len(layout)), key=lambda i: rank[layout.subsystems[i].party])
    return [layout.subsystems[i].label for i in order]


def party_major(m: StructuredOperator) -> StructuredOperator:
    """Permute to (Alice..., Flag..., Bob...), stable within each party."""
    return permute_subsystems(m, _party_major_order(m.layout))


def fidelity_to_target(rho: StructuredOperator, d_target: int) -> float:
    """Overlap with the maximally entangled state of local dimension ``d_target``.

    The Alice factors (in layout order) form one side, the Bob factors the
    other; each side must multiply out to ``d_target``.
    """
    pm = party_major(rho)
    da = pm.layout.party_dim("Alice")
    db = pm.layout.party_dim("Bob")
    if pm.layout.party_dim("Flag") != 1:
        raise ValueError("fidelity target is defined on flag-free states")
    if da != d_target or db != d_target:
        raise ValueError(
            f"local dimensions ({da}, {db}) do not match target dimension {d_target}"
        )
    t = pm.matrix.reshape(da, db, da, db)
    return float(np.einsum("jjkk->", t).real) / d_target


def twirl(
    m: StructuredOperator,
    d: int,
    pair: tuple[str, str] | None = None,
) -> StructuredOperator:
    """Isotropic twirl on one Alice/Bob register pair, identity elsewhere.

    Projects the designated pair onto span{Phi, I - Phi}: the output is
    ``Phi (x) N + (I - Phi)/(d^2 - 1) (x) Ntilde`` with N and Ntilde the
    partial overlaps of ``m`` with Phi and its complement.  By default the
    pair is the first Alice and first Bob subsystem of dimension ``d``.
    """
    if pair is None:
        try:
            a_lb = next(s.label for s in m.layout.subsystems if s.party == "Alice" and s.dim == d)
            b_lb = next(s.label for s in m.layout.subsystems if s.party == "Bob" and s.dim == d)
        except StopIteration:
            raise ValueError(f"no Alice/Bob subsystem pair of dimension {d} to twirl") from None
    else:
        a_lb, b_lb = pair
    for lb in (a_lb, b_lb):
        if m.layout.subsystems[m.layout.index(lb)].dim != d:
            raise ValueError(f"subsystem {lb!r} does not have dimension {d}")
    rest = [lb for lb in m.layout.labels if lb not in (a_lb, b_lb)]
    front = permute_subsystems(m, [a_lb, b_lb] + rest)
    r_dim = front.dim // (d * d)
    x = front.matrix.reshape(d * d, r_dim, d * d, r_dim)
    phi = max_entangled(d)
    n_phi = np.einsum("ab,bras->rs", phi, x)
    n_rest = np.einsum("ab,bras->rs", np.eye(d * d) - phi, x)
    out = np.kron(phi, n_phi) + np.kron((np.eye(d * d) - phi) / (d * d - 1), n_rest)
    twirled = _rewrap(out, front.layout, m)
    return permute_subsystems(twirled, list(m.layout.labels))


_PAULIS = (
    np.eye(2),
    np.array([[0.0, 1.0], [1.0, 0.0]]),
    np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    np.array([[1.0, 0.0], [0.0, -1.0]]),
)


def pauli_twirl(m: StructuredOperator) -> StructuredOperator:
    """Average over conjugation by sigma (x) sigma on a two-qubit state.

    Kills every off-diagonal element in the Bell basis while preserving the
    Bell-diagonal weights, so the output is Bell diagonal.
    """
    if m.layout.dims != (2, 2):
        raise ValueError("pauli_twirl expects a two-qubit operator")
    acc = np.zeros_like(m.matrix)
    for sigma in _PAULIS:
        u = np.kron(sigma, sigma)
        acc += u @ m.matrix @ u.conj().T
    return _rewrap(acc / 4, m.layout, m)


def sym_antisym_projectors(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the symmetric and antisymmetric subspaces of d (x) d."""
    swap = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            swap[i * d + j, j * d + i] = 1.0
    eye = np.eye(d * d)
    return (eye + swap) / 2, (eye - swap) / 2


# ---------------------------------------------------------------------------
# Choi representations


def choi_of_kraus(
    kraus: Sequence[tuple[int, np.ndarray]],
    in_dim: int,
    in_layout: SubsystemLayout | None = None,
    out_layout: SubsystemLayout | None = None,
) -> list[ChoiBranch]:
    """Choi operators of a flagged Kraus family.

    ``kraus`` lists ``(flag, K)`` pairs; operators sharing a flag are summed
    into one branch ``C_f = sum_K (K (x) I) |Phi><Phi| (K (x) I)^dag`` with
    Phi maximally entangled between the input and a retained input copy.
    Branch matrices live on the output registers followed by the input copy;
    pass layouts to override the single-register defaults.
    """
    mats = [np.asarray(k, dtype=np.complex128) for _, k in kraus]
    if not mats:
        raise ValueError("empty Kraus family")
    d_out = mats[0].shape[0]
    if out_layout is None:
        out_layout = SubsystemLayout.of(("out", "Alice", d_out))
    if in_layout is None:
        in_layout = SubsystemLayout.of(("in", "Alice", in_dim))
    if in_layout.dim != in_dim or out_layout.dim != d_out:
        raise ValueError("layout dimensions do not match the Kraus operators")
    phi = max_entangled(in_dim)
    branches: dict[int, np.ndarray] = {}
    total = np.zeros((in_dim, in_dim), dtype=np.complex128)
    for (flag, _), k in zip(kraus, mats):
        if k.shape != (d_out, in_dim):
            raise ValueError(f"Kraus operator has shape {k.shape}, expected {(d_out, in_dim)}")
        lift = np.kron(k, np.eye(in_dim))
        c = lift @ phi @ lift.conj().T
        branches[flag] = branches.get(flag, 0) + c
        total += k.conj().T @ k
    if np.abs(total - np.eye(in_dim)).max() > 1e-10:
        raise ValueError("Kraus family is not trace preserving")
    layout = SubsystemLayout(out_layout.subsystems + in_layout.subsystems)
    return [
        ChoiBranch(flag, StructuredOperator(c, layout), in_layout.labels)
        for flag, c in sorted(branches.items())
    ]


def validate_choi_family(branches: Sequence[ChoiBranch], tol: float = CHOI_MARGINAL_TOL) -> None:
    """Check the instrument condition: input-copy marginals sum to I / in_dim."""
    if not branches:
        raise ValueError("empty branch family")
    d_in = branches[0].in_dim
    acc = np.zeros((d_in, d_in), dtype=np.complex128)
    for br in branches:
        acc += partial_trace(br.matrix, br.in_labels).matrix
    gap = np.abs(acc - np.eye(d_in) / d_in).max()
    if gap > tol:
        raise ValueError(f"branch marginals sum to I/d only up to {gap:.3e}")


def apply_via_choi(branch: ChoiBranch, rho: StructuredOperator) -> StructuredOperator:
    """Unnormalised branch output ``in_dim * tr_in[(I (x) rho^T) C]``.

    The trace of the result is the branch probability on ``rho``; dividing by
    it recovers the conditional output state.
    """
    d_in = branch.in_dim
    if rho.dim != d_in:
        raise ValueError(f"state dimension {rho.dim} does not match branch input {d_in}")
    c = permute_subsystems(branch.matrix, list(branch.out_labels) + list(branch.in_labels))
    d_out = c.dim // d_in
    x = c.matrix.reshape(d_out, d_in, d_out, d_in)
    out = d_in * np.einsum("iajb,ab->ij", x, rho.matrix)
    return StructuredOperator(out, c.layout.subset(branch.out_labels))


# ---------------------------------------------------------------------------
# serialization


def to_json_dict(m: StructuredOperator) -> dict:
    """JSON-friendly form: layout plus real and imaginary parts, row major."""
    return {
        "layout": [
            {"label": s.label, "party": s.party, "dim": s.dim} for s in m.layout.subsystems
        ],
        "re": m.matrix.real.tolist(),
        "im": m.matrix.imag.tolist(),
    }


def from_json_dict(data: dict) -> StructuredOperator:
    layout = SubsystemLayout(
        Subsystem(s["label"], s["party"], int(s["dim"])) for s in data["layout"]
    )
    m = np.array(data["re"], dtype=np.float64) + 1j * np.array(data["im"], dtype=np.float64)
    return StructuredOperator(m, layout)


def to_json(m: StructuredOperator) -> str:
    return json.dumps(to_json_dict(m), sort_keys=True)


def from_json(text: str) -> StructuredOperator:
    return from_json_dict(json.loads(text))
