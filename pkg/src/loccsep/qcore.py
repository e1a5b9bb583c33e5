"""Pure states, Kraus operators and instruments on small dense spaces.

Everything here is immutable: arrays held by :class:`PureState` and
:class:`KrausOperator` are copied on construction and marked read-only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, IncompleteInstrumentError, LoccSepError, NotNormalizedError

NORM_TOL = 1e-12
STRUCT_TOL = 1e-10
PHASE_TOL = 1e-9
ZERO_WEIGHT = 1e-14


def _frozen(array, ndim):
    a = np.array(array, dtype=np.complex128)
    if a.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector in C^dim."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes, 1)
        if amps.size < 1:
            raise DimensionError("a state needs at least one amplitude")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise NotNormalizedError(f"state norm is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vector) -> PureState:
        """Normalize ``vector`` and wrap it."""
        v = np.asarray(vector, dtype=np.complex128)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise NotNormalizedError("cannot normalize the zero vector")
        return cls(v / norm)

    @classmethod
    def basis(cls, dim: int, index: int = 0) -> PureState:
        v = np.zeros(dim, dtype=np.complex128)
        v[index] = 1.0
        return cls(v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def __repr__(self):
        return f"PureState({np.array2string(self.amplitudes, precision=4)})"


@dataclass(frozen=True, eq=False)
class KrausOperator:
    """One outcome of an instrument: a (dim_out x dim_in) contraction."""

    matrix: np.ndarray
    label: str

    def __post_init__(self):
        m = _frozen(self.matrix, 2)
        if 0 in m.shape:
            raise DimensionError(f"Kraus operator {self.label!r} has empty shape {m.shape}")
        opnorm = np.linalg.norm(m, 2)
        if opnorm > 1.0 + STRUCT_TOL:
            raise LoccSepError(
                f"Kraus operator {self.label!r} has operator norm {opnorm:.12g} > 1"
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "label", str(self.label))

    @property
    def dim_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def dim_out(self) -> int:
        return self.matrix.shape[0]


class Instrument:
    """Labelled Kraus operators with ``sum_i M_i^dag M_i = I`` on the input space."""

    def __init__(self, operators: Sequence[KrausOperator], tol: float = STRUCT_TOL):
        ops = tuple(operators)
        if not ops:
            raise LoccSepError("an instrument needs at least one Kraus operator")
        labels = [op.label for op in ops]
        if len(set(labels)) != len(labels):
            raise LoccSepError(f"duplicate outcome labels: {labels}")
        dims = {op.dim_in for op in ops}
        if len(dims) != 1:
            raise DimensionError(f"Kraus operators disagree on input dimension: {sorted(dims)}")
        self._ops = ops
        self._by_label = {op.label: op for op in ops}
        residual = self.completeness_residual()
        if residual > tol:
            raise IncompleteInstrumentError(
                f"sum of M^dag M deviates from identity by {residual:.3e} (tolerance {tol:g})"
            )

    @classmethod
    def from_matrices(cls, matrices: dict, tol: float = STRUCT_TOL) -> Instrument:
        return cls([KrausOperator(m, label) for label, m in matrices.items()], tol=tol)

    @property
    def operators(self) -> tuple[KrausOperator, ...]:
        return self._ops

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(op.label for op in self._ops)

    @property
    def dim_in(self) -> int:
        return self._ops[0].dim_in

    def completeness_residual(self) -> float:
        """Largest entrywise deviation of ``sum M^dag M`` from the identity."""
        total = sum(op.matrix.conj().T @ op.matrix for op in self._ops)
        return float(np.max(np.abs(total - np.eye(self.dim_in))))

    def __getitem__(self, label) -> KrausOperator:
        return self._by_label[label]

    def __iter__(self) -> Iterator[KrausOperator]:
        return iter(self._ops)

    def __len__(self):
        return len(self._ops)

    def __repr__(self):
        shapes = ", ".join(f"{op.label}:{op.dim_out}x{op.dim_in}" for op in self._ops)
        return f"Instrument({shapes})"


class Branch(NamedTuple):
    """Result of applying one Kraus operator; ``state`` is None for a pruned branch."""

    weight: float
    state: PureState | None


def _check_dims(u, v):
    if u.dim != v.dim:
        raise DimensionError(f"dimension mismatch: {u.dim} vs {v.dim}")


def inner(u: PureState, v: PureState) -> complex:
    """<u|v>, antilinear in the first argument."""
    _check_dims(u, v)
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def overlap(u: PureState, v: PureState) -> float:
    return abs(inner(u, v))


def fidelity(u: PureState, v: PureState) -> float:
    """|<u|v>|^2, or 0 when the dimensions differ."""
    if u.dim != v.dim:
        return 0.0
    return overlap(u, v) ** 2


def phase_distance(u: PureState, v: PureState) -> float:
    """1 - |<u|v>|: zero iff the states agree up to a global phase."""
    if u.dim != v.dim:
        return 1.0
    return max(0.0, 1.0 - overlap(u, v))


def same_up_to_phase(u: PureState, v: PureState, tol: float = PHASE_TOL) -> bool:
    return phase_distance(u, v) <= tol


def tensor(u: PureState, v: PureState) -> PureState:
    return PureState(np.kron(u.amplitudes, v.amplitudes))


def tensor_power(u: PureState, copies: int) -> PureState:
    if copies < 1:
        raise LoccSepError("need at least one copy")
    out = u
    for _ in range(copies - 1):
        out = tensor(out, u)
    return out


def apply(op: KrausOperator, u: PureState) -> Branch:
    """Born weight ``||K u||^2`` and the normalized post-measurement state."""
    if op.dim_in != u.dim:
        raise DimensionError(f"operator {op.label!r} expects dim {op.dim_in}, state has {u.dim}")
    out = op.matrix @ u.amplitudes
    weight = float(np.real(np.vdot(out, out)))
    if weight <= ZERO_WEIGHT:
        return Branch(weight, None)
    return Branch(weight, PureState(out / np.sqrt(weight)))


def gauge_align(a: PureState, b: PureState) -> tuple[PureState, PureState]:
    """Rephase ``b`` so that <a|b> is real and nonnegative."""
    ip = inner(a, b)
    mag = abs(ip)
    if mag == 0.0 or (ip.imag == 0.0 and ip.real >= 0.0):
        return a, b
    return a, PureState(b.amplitudes * (ip.conjugate() / mag))


def canonical_pair(overlap_value: float, dim: int = 2) -> tuple[PureState, PureState]:
    """Two real states with prescribed overlap: |0> and cos|0> + sin|1>."""
    if not 0.0 <= overlap_value <= 1.0:
        raise LoccSepError(f"overlap must lie in [0, 1], got {overlap_value}")
    if dim < 2:
        raise DimensionError("need dim >= 2 for a pair of states")
    a = np.zeros(dim, dtype=np.complex128)
    b = np.zeros(dim, dtype=np.complex128)
    a[0] = 1.0
    b[0] = overlap_value
    b[1] = np.sqrt(max(0.0, 1.0 - overlap_value**2))
    return PureState(a), PureState(b)


def _rng(seed):
    return np.random.default_rng(seed)


def random_state(dim: int, seed) -> PureState:
    """Normalized complex Gaussian vector (Haar distributed)."""
    rng = _rng(seed)
    return PureState.from_vector(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


def random_state_with_overlap(dim: int, anchor: PureState, overlap_value: float, seed) -> PureState:
    """Random state whose overlap with ``anchor`` is exactly ``overlap_value`` (random phase)."""
    rng = _rng(seed)
    if dim != anchor.dim:
        raise DimensionError("anchor dimension mismatch")
    g = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    perp = g - np.vdot(anchor.amplitudes, g) * anchor.amplitudes
    perp /= np.linalg.norm(perp)
    phase = np.exp(2j * np.pi * rng.random())
    vec = phase * (overlap_value * anchor.amplitudes + np.sqrt(max(0.0, 1 - overlap_value**2)) * perp)
    return PureState.from_vector(vec)


def random_unitary(dim: int, seed) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix with the phase correction."""
    rng = _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_instrument(dim: int, outcomes: int, seed, dim_out: int | None = None) -> Instrument:
    """Instrument cut from the first ``dim`` columns of a random unitary.

    The unitary acts on ``outcomes * dim_out`` dimensions; its isometric block is
    split row-wise into ``outcomes`` Kraus operators, so completeness holds
    by construction.
    """
    if dim < 1 or outcomes < 1:
        raise LoccSepError("dim and outcomes must be positive")
    dim_out = dim if dim_out is None else dim_out
    if outcomes * dim_out < dim:
        raise DimensionError("not enough output room for an isometry")
    iso = random_unitary(outcomes * dim_out, seed)[:, :dim]
    return Instrument(
        [KrausOperator(iso[k * dim_out:(k + 1) * dim_out], str(k)) for k in range(outcomes)]
    )
