"""Closed-form efficiencies for global and LOCC state separation, plus explicit
optimal channels.

Conventions: ``mu`` is the source overlap |<phi|psi>|, ``mu_prime`` the target
overlap; for two-party product tasks ``nu``/``nu_prime`` are the second
party's overlaps.  Priors are ``s`` (for phi) and ``t`` (for psi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, InfeasibleSeparationError, PreconditionError, UndefinedTaskError
from .qcore import Instrument, KrausOperator, PureState, gauge_align, inner, overlap

PRIOR_TOL = 1e-12
ORDER_TOL = 1e-12


# -- argument checks ---------------------------------------------------------

def check_overlaps(mu: float, mu_prime: float, names=("mu", "mu_prime")) -> tuple[float, float]:
    """Validate ``0 <= mu_prime <= mu < 1``.

    ``mu_prime`` exceeding ``mu`` by at most ``ORDER_TOL`` is snapped down to
    ``mu``; that much is rounding noise from computing overlaps of vectors.
    """
    a, b = names
    if not (math.isfinite(mu) and math.isfinite(mu_prime)):
        raise PreconditionError(f"{a} and {b} must be finite")
    if mu < 0 or mu_prime < 0:
        raise PreconditionError(f"overlaps must be nonnegative ({a}={mu}, {b}={mu_prime})")
    if mu >= 1:
        raise UndefinedTaskError(f"{a}={mu}: the two hypotheses are identical")
    if mu_prime > mu + ORDER_TOL:
        raise InfeasibleSeparationError(
            f"infeasible separation: {b}={mu_prime} exceeds {a}={mu}"
        )
    return mu, min(mu_prime, mu)


def check_priors(s: float, t: float) -> None:
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise PreconditionError(f"priors must lie in [0, 1] (s={s}, t={t})")
    if abs(s + t - 1.0) > PRIOR_TOL:
        raise PreconditionError(f"priors must sum to 1 (s={s}, t={t})")


def _check_base(x: float, name: str) -> None:
    if not 0.0 <= x < 1.0:
        raise PreconditionError(f"{name} must lie in [0, 1), got {x}")


def _check_copies(m: int, n: int) -> None:
    if int(m) != m or int(n) != n:
        raise PreconditionError("copy numbers must be integers")
    if m < 1:
        raise PreconditionError(f"m must be at least 1, got {m}")
    if m >= n:
        raise PreconditionError(f"need m < n for cloning, got m={m}, n={n}")


# -- closed forms --------------------------------------------------------------

def eta_global_separation(mu: float, mu_prime: float) -> float:
    """Optimal equal-prior success probability of separating overlap ``mu`` to ``mu_prime``."""
    mu, mu_prime = check_overlaps(mu, mu_prime)
    return (1.0 - mu) / (1.0 - mu_prime)


def eta_separation_upper_bound(s: float, t: float, mu: float, mu_prime: float) -> float:
    """Upper bound on separation success for priors ``(s, t)``; tight at s = t = 1/2."""
    check_priors(s, t)
    mu, mu_prime = check_overlaps(mu, mu_prime)
    return 1.0 - 2.0 * math.sqrt(s * t) * (mu - mu_prime) / (1.0 - mu_prime)


def eta_global_cloning(mu: float, nu: float, m: int, n: int) -> float:
    """Optimal conclusive m -> n cloning of a product pair with overlaps ``mu``, ``nu``."""
    _check_base(mu, "mu")
    _check_base(nu, "nu")
    _check_copies(m, n)
    x = mu * nu
    return (1.0 - x**m) / (1.0 - x**n)


def eta_discrimination(mu: float, nu: float, m: int) -> float:
    """Unambiguous discrimination success with ``m`` copies of each party's state."""
    _check_base(mu, "mu")
    _check_base(nu, "nu")
    if int(m) != m or m < 1:
        raise PreconditionError(f"m must be a positive integer, got {m}")
    return 1.0 - (mu * nu) ** m


def eta_global_product_separation(mu: float, nu: float, mu_prime: float, nu_prime: float) -> float:
    """Global separation efficiency of the product task, overlaps multiply."""
    mu, mu_prime = check_overlaps(mu, mu_prime)
    nu, nu_prime = check_overlaps(nu, nu_prime, ("nu", "nu_prime"))
    return (1.0 - mu * nu) / (1.0 - mu_prime * nu_prime)


def _locc_ratio(mu, nu, mu_prime, nu_prime):
    return (1.0 - mu) * (1.0 - nu) / ((1.0 - mu_prime) * (1.0 - nu_prime))


def eta_locc_separation(mu: float, nu: float, mu_prime: float, nu_prime: float) -> float:
    """Best equal-prior LOCC separation of a product pair."""
    mu, mu_prime = check_overlaps(mu, mu_prime)
    nu, nu_prime = check_overlaps(nu, nu_prime, ("nu", "nu_prime"))
    return 1.0 - mu * nu + _locc_ratio(mu, nu, mu_prime, nu_prime) * mu_prime * nu_prime


def eta_locc_cloning(mu: float, nu: float, m: int, n: int) -> float:
    """LOCC m -> n cloning: LOCC separation with overlaps raised to the copy numbers."""
    _check_base(mu, "mu")
    _check_base(nu, "nu")
    _check_copies(m, n)
    return eta_locc_separation(mu**m, nu**m, mu**n, nu**n)


def eta_locc_upper_bound(
    s: float, t: float, mu: float, nu: float, mu_prime: float, nu_prime: float
) -> float:
    """Upper bound on any LOCC protocol's separation success under priors ``(s, t)``."""
    check_priors(s, t)
    mu, mu_prime = check_overlaps(mu, mu_prime)
    nu, nu_prime = check_overlaps(nu, nu_prime, ("nu", "nu_prime"))
    w = 2.0 * math.sqrt(s * t)
    return 1.0 - w * mu * nu + w * _locc_ratio(mu, nu, mu_prime, nu_prime) * mu_prime * nu_prime


# -- tasks and channels --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SeparationTask:
    """Turn ``source_phi``/``source_psi`` into ``target_phi``/``target_psi``."""

    source_phi: PureState
    source_psi: PureState
    target_phi: PureState
    target_psi: PureState
    prior_phi: float = 0.5
    prior_psi: float = 0.5
    mu: float = field(init=False)
    mu_prime: float = field(init=False)

    def __post_init__(self):
        check_priors(self.prior_phi, self.prior_psi)
        if self.source_phi.dim != self.source_psi.dim:
            raise DimensionError("source states live in different spaces")
        if self.target_phi.dim != self.target_psi.dim:
            raise DimensionError("target states live in different spaces")
        mu, mu_prime = check_overlaps(
            overlap(self.source_phi, self.source_psi), overlap(self.target_phi, self.target_psi)
        )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "mu_prime", mu_prime)


@dataclass(frozen=True, eq=False)
class SeparationChannel:
    success: KrausOperator
    failure: KrausOperator
    success_prob_phi: float
    success_prob_psi: float

    @property
    def instrument(self) -> Instrument:
        return Instrument([self.success, self.failure])


class _SpanFrame(NamedTuple):
    dual: np.ndarray  # 2 x d; dual @ phi = e0, dual @ psi_aligned = e1
    complement: np.ndarray  # d x (d - 2), orthonormal basis of span(phi, psi)^perp


def _span_frame(phi: PureState, psi: PureState) -> _SpanFrame:
    phi, psi = gauge_align(phi, psi)
    basis = np.column_stack([phi.amplitudes, psi.amplitudes])
    gram = basis.conj().T @ basis
    dual = np.linalg.solve(gram, basis.conj().T)
    u, _, _ = np.linalg.svd(basis, full_matrices=True)
    return _SpanFrame(dual, u[:, 2:])


def operator_from_images(frame: _SpanFrame, images: np.ndarray) -> np.ndarray:
    """Matrix sending phi, psi_aligned to the columns of ``images`` and killing the complement."""
    return images @ frame.dual


def _failure_matrix(frame: _SpanFrame, weight: float) -> np.ndarray:
    # both hypotheses land on the same unit vector; complement routed to fresh rows
    common = math.sqrt(max(weight, 0.0)) * np.ones((1, 2))
    return np.vstack([operator_from_images(frame, common), frame.complement.conj().T])


def separation_channel(
    phi: PureState, psi: PureState, phi_target: PureState, psi_target: PureState
) -> SeparationChannel:
    """Optimal equal-weight separation channel for an explicit state quadruple."""
    if phi.dim != psi.dim or phi_target.dim != psi_target.dim:
        raise DimensionError("each pair must share a dimension")
    mu, mu_prime = check_overlaps(overlap(phi, psi), overlap(phi_target, psi_target))
    p = min(1.0, (1.0 - mu) / (1.0 - mu_prime))
    frame = _span_frame(phi, psi)
    phi_t, psi_t = gauge_align(phi_target, psi_target)
    images = math.sqrt(p) * np.column_stack([phi_t.amplitudes, psi_t.amplitudes])
    success = KrausOperator(operator_from_images(frame, images), "success")
    failure = KrausOperator(_failure_matrix(frame, 1.0 - p), "failure")
    return SeparationChannel(success, failure, p, p)


def build_separation_channel(task: SeparationTask) -> SeparationChannel:
    """Two-outcome channel achieving ``eta_global_separation`` on ``task``.

    Success sends each source to sqrt(p) times its target (up to phase), failure
    sends both sources to one common vector with weight 1 - p.  Completeness on
    the source span is exactly the Gram identity ``mu = p * mu_prime + (1 - p)``.
    """
    return separation_channel(task.source_phi, task.source_psi, task.target_phi, task.target_psi)


def build_discrimination_channel(phi: PureState, psi: PureState) -> Instrument:
    """Symmetric unambiguous discrimination with outcomes ``phi``, ``psi``, ``fail``.

    Each conclusive outcome fires with weight ``1 - mu`` on its own hypothesis and
    never on the other one.
    """
    if phi.dim != psi.dim:
        raise DimensionError("states live in different spaces")
    mu = overlap(phi, psi)
    if mu >= 1.0 - 1e-15:
        raise UndefinedTaskError("cannot discriminate identical states")
    p = 1.0 - mu
    frame = _span_frame(phi, psi)
    root_p = math.sqrt(p)
    ops = [
        KrausOperator(operator_from_images(frame, np.array([[root_p, 0.0]])), "phi"),
        KrausOperator(operator_from_images(frame, np.array([[0.0, root_p]])), "psi"),
        KrausOperator(_failure_matrix(frame, mu), "fail"),
    ]
    return Instrument(ops)


def gram_matrix(states: Sequence[PureState]) -> np.ndarray:
    return np.array([[inner(a, b) for b in states] for a in states])


# -- inequality chain ----------------------------------------------------------

class ChainReport(NamedTuple):
    cauchy_sum: float  # sum_i sqrt(s_i t_i)
    cauchy_slack: float  # 1 - cauchy_sum
    aux_lhs: float
    aux_rhs: float
    aux_slack: float  # aux_rhs - aux_lhs
    rhs_floor_slack: float  # aux_rhs - 1 + sum_i (s s_i + t t_i), >= 0 by AM-GM
    passed: bool


def check_chain_inequalities(
    s: float,
    t: float,
    branch_weights: Sequence[tuple[float, float]],
    mu_prime: float,
    tol: float = 1e-12,
) -> ChainReport:
    """Evaluate the inequalities used to bound separation with unequal priors.

    ``branch_weights`` are the per-outcome probabilities ``(s_i, t_i)`` of one
    measurement under each hypothesis; outcome 0 plays the success role.
    Checks the Cauchy-Schwarz sum ``sum sqrt(s_i t_i) <= 1`` and the auxiliary
    inequality

        (2 sqrt(s s_1 t t_1) - 2 sqrt(st) + 1 - s s_1 - t t_1) mu'
            <= 1 - s s_1 - t t_1 - sum_{i>=2} 2 sqrt(s s_i t t_i).
    """
    w = np.asarray(branch_weights, dtype=float)
    if w.ndim != 2 or w.shape[1] != 2 or w.shape[0] < 1:
        raise PreconditionError("branch_weights must be a nonempty sequence of (s_i, t_i)")
    si, ti = w[:, 0], w[:, 1]
    roots = np.sqrt(si * ti)
    cauchy_sum = float(roots.sum())
    st = math.sqrt(s * t)
    head = s * si[0] + t * ti[0]
    aux_lhs = (2.0 * st * roots[0] - 2.0 * st + 1.0 - head) * mu_prime
    aux_rhs = 1.0 - head - 2.0 * st * float(roots[1:].sum())
    floor = 1.0 - float(np.sum(s * si + t * ti))
    cauchy_slack = 1.0 - cauchy_sum
    aux_slack = aux_rhs - aux_lhs
    rhs_floor_slack = aux_rhs - floor
    passed = min(cauchy_slack, aux_slack, rhs_floor_slack) >= -tol
    return ChainReport(cauchy_sum, cauchy_slack, aux_lhs, aux_rhs, aux_slack, rhs_floor_slack, passed)
