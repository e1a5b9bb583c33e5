"""Two-party LOCC protocols as measurement trees.

A protocol is a finite tree.  Internal nodes are :class:`Measurement` (one
party applies an instrument to its own subsystem and announces the outcome);
leaves are :class:`Leaf` (declare success or failure, optionally after each
party locally prepares a state).  Because sources are product states and
every operation is local, each hypothesis-conditioned branch stays a product
of pure states, so exact evaluation only ever propagates vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Sequence, Union

import numpy as np

from .errors import DimensionError, PreconditionError, ProtocolStructureError
from .qcore import (
    PHASE_TOL,
    ZERO_WEIGHT,
    Instrument,
    KrausOperator,
    PureState,
    apply,
    canonical_pair,
    fidelity,
    gauge_align,
    overlap,
    phase_distance,
    random_instrument,
    random_unitary,
)
from .separation import (
    SeparationTask,
    _span_frame,
    build_discrimination_channel,
    check_overlaps,
    check_priors,
    eta_locc_upper_bound,
    eta_separation_upper_bound,
    operator_from_images,
    separation_channel,
)

HYPOTHESES = ("phi", "psi")
PARTIES = ("A", "B")
BOUND_TOL = 1e-9


# -- task ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LoccTask:
    """Separate ``phi_alice (x) phi_bob`` / ``psi_alice (x) psi_bob`` into the target products."""

    phi_alice: PureState
    phi_bob: PureState
    psi_alice: PureState
    psi_bob: PureState
    target_phi_alice: PureState
    target_phi_bob: PureState
    target_psi_alice: PureState
    target_psi_bob: PureState
    prior_phi: float = 0.5
    prior_psi: float = 0.5
    mu: float = field(init=False)
    nu: float = field(init=False)
    mu_prime: float = field(init=False)
    nu_prime: float = field(init=False)

    def __post_init__(self):
        check_priors(self.prior_phi, self.prior_psi)
        pairs = [
            (self.phi_alice, self.psi_alice, "Alice sources"),
            (self.phi_bob, self.psi_bob, "Bob sources"),
            (self.target_phi_alice, self.target_psi_alice, "Alice targets"),
            (self.target_phi_bob, self.target_psi_bob, "Bob targets"),
        ]
        for a, b, what in pairs:
            if a.dim != b.dim:
                raise DimensionError(f"{what} live in different spaces")
        mu, mu_prime = check_overlaps(
            overlap(self.phi_alice, self.psi_alice),
            overlap(self.target_phi_alice, self.target_psi_alice),
        )
        nu, nu_prime = check_overlaps(
            overlap(self.phi_bob, self.psi_bob),
            overlap(self.target_phi_bob, self.target_psi_bob),
            ("nu", "nu_prime"),
        )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "mu_prime", mu_prime)
        object.__setattr__(self, "nu_prime", nu_prime)

    @classmethod
    def from_overlaps(
        cls, mu: float, nu: float, mu_prime: float, nu_prime: float, s: float = 0.5, t: float | None = None
    ) -> LoccTask:
        """Canonical qubit representatives (``cos|0> + sin|1>`` pairs) for given overlaps."""
        t = 1.0 - s if t is None else t
        check_overlaps(mu, mu_prime)
        check_overlaps(nu, nu_prime, ("nu", "nu_prime"))
        pa, qa = canonical_pair(mu)
        pb, qb = canonical_pair(nu)
        tpa, tqa = canonical_pair(mu_prime)
        tpb, tqb = canonical_pair(nu_prime)
        return cls(pa, pb, qa, qb, tpa, tpb, tqa, tqb, s, t)

    def prior(self, hyp: str) -> float:
        return self.prior_phi if hyp == "phi" else self.prior_psi

    def sources(self, hyp: str) -> tuple[PureState, PureState]:
        if hyp == "phi":
            return self.phi_alice, self.phi_bob
        return self.psi_alice, self.psi_bob

    def targets(self, hyp: str) -> tuple[PureState, PureState]:
        if hyp == "phi":
            return self.target_phi_alice, self.target_phi_bob
        return self.target_psi_alice, self.target_psi_bob

    def local_task(self, party: str) -> SeparationTask:
        """One party's share of the task, as a single-system separation."""
        i = PARTIES.index(party)
        return SeparationTask(
            self.sources("phi")[i], self.sources("psi")[i],
            self.targets("phi")[i], self.targets("psi")[i],
            self.prior_phi, self.prior_psi,
        )

    @property
    def dims(self) -> tuple[int, int]:
        return self.phi_alice.dim, self.phi_bob.dim


# -- protocol tree ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Leaf:
    """Terminal node.

    ``output_alice``/``output_bob`` are local preparations: when set, that party
    discards its system and prepares the given state (a classically controlled
    replacement).  When unset the party's conditional state is its output.
    """

    verdict: str = "failure"
    output_alice: PureState | None = None
    output_bob: PureState | None = None

    def __post_init__(self):
        if self.verdict not in ("success", "failure"):
            raise ProtocolStructureError((), f"unknown verdict {self.verdict!r}")


@dataclass(frozen=True, eq=False)
class Measurement:
    """``party`` applies ``instrument`` and broadcasts the outcome label."""

    party: str
    instrument: Instrument
    children: Mapping[str, "ProtocolNode"]

    def __post_init__(self):
        if self.party not in PARTIES:
            raise ProtocolStructureError((), f"party must be 'A' or 'B', got {self.party!r}")
        labels = set(self.instrument.labels)
        if set(self.children) != labels:
            raise ProtocolStructureError(
                (),
                f"children {sorted(self.children)} do not match outcomes {sorted(labels)}",
            )
        # keep children in instrument order
        object.__setattr__(self, "children", {k: self.children[k] for k in self.instrument.labels})


ProtocolNode = Union[Measurement, Leaf]

FAIL = Leaf("failure")


def validate_protocol(root: ProtocolNode, dim_alice: int, dim_bob: int) -> None:
    """Check that each instrument acts on its party's current local dimension."""

    def walk(node, path, dims):
        if isinstance(node, Leaf):
            return
        if not isinstance(node, Measurement):
            raise ProtocolStructureError(path, f"unexpected node type {type(node).__name__}")
        i = PARTIES.index(node.party)
        if node.instrument.dim_in != dims[i]:
            raise ProtocolStructureError(
                path,
                f"party {node.party} holds a {dims[i]}-dim system but the instrument "
                f"expects {node.instrument.dim_in}",
            )
        for op in node.instrument:
            child_dims = list(dims)
            child_dims[i] = op.dim_out
            walk(node.children[op.label], path + (op.label,), tuple(child_dims))

    walk(root, (), (dim_alice, dim_bob))


def count_rounds(root: ProtocolNode) -> int:
    """Longest path length, counting a run of consecutive same-party measurements once."""

    def walk(node, last):
        if isinstance(node, Leaf):
            return 0
        step = 0 if node.party == last else 1
        return step + max(walk(child, node.party) for child in node.children.values())

    return walk(root, None)


# -- exact evaluation ---------------------------------------------------------------

class _Cond(NamedTuple):
    weight: float
    alice: PureState
    bob: PureState


def _step(node: Measurement, op: KrausOperator, live: dict) -> dict:
    out = {}
    for hyp, cond in live.items():
        part = cond.alice if node.party == "A" else cond.bob
        branch = apply(op, part)
        w = cond.weight * branch.weight
        if branch.state is None or w <= ZERO_WEIGHT:
            continue
        if node.party == "A":
            out[hyp] = _Cond(w, branch.state, cond.bob)
        else:
            out[hyp] = _Cond(w, cond.alice, branch.state)
    return out


class LeafRecord(NamedTuple):
    path: tuple
    declared: str
    verdict: str  # as scored
    contribution: float
    fidelity_alice: float  # worst case over live hypotheses
    fidelity_bob: float
    flagged: bool  # declared success but output wrong under some hypothesis
    weight_phi: float  # P(reach leaf | phi)
    weight_psi: float
    probability: float  # P(reach leaf)
    posterior_phi: float
    posterior_psi: float


@dataclass(frozen=True)
class EvalReport:
    efficiency: float
    leaves: tuple[LeafRecord, ...]
    max_rounds: int
    total_weight_phi: float
    total_weight_psi: float
    bound_value: float | None = None
    bound_satisfied: bool | None = None

    @property
    def flagged(self) -> tuple[LeafRecord, ...]:
        return tuple(r for r in self.leaves if r.flagged)


def _score_leaf(leaf: Leaf, live: dict, task: LoccTask):
    """Return (scored_success, flagged, worst fidelity A, worst fidelity B)."""
    fa = fb = 1.0
    match = True
    for hyp, cond in live.items():
        out_a = leaf.output_alice if leaf.output_alice is not None else cond.alice
        out_b = leaf.output_bob if leaf.output_bob is not None else cond.bob
        ta, tb = task.targets(hyp)
        fa = min(fa, fidelity(out_a, ta))
        fb = min(fb, fidelity(out_b, tb))
        if phase_distance(out_a, ta) > PHASE_TOL or phase_distance(out_b, tb) > PHASE_TOL:
            match = False
    if leaf.verdict != "success":
        return False, False, fa, fb
    return match, not match, fa, fb


def _initial_live(task: LoccTask) -> dict:
    live = {}
    for hyp in HYPOTHESES:
        a, b = task.sources(hyp)
        live[hyp] = _Cond(1.0, a, b)
    return live


def evaluate_exact(root: ProtocolNode, task: LoccTask) -> EvalReport:
    """Exact success probability of ``root`` on ``task`` by branch propagation.

    A success leaf counts only if, under every hypothesis that reaches it with
    nonzero weight, both parties' outputs equal the targets up to phase.
    Otherwise it is scored as failure and flagged.
    """
    validate_protocol(root, *task.dims)
    records = []

    def walk(node, path, live):
        if isinstance(node, Leaf):
            ok, flagged, fa, fb = _score_leaf(node, live, task)
            w_phi = live["phi"].weight if "phi" in live else 0.0
            w_psi = live["psi"].weight if "psi" in live else 0.0
            p_phi, p_psi = task.prior_phi * w_phi, task.prior_psi * w_psi
            prob = p_phi + p_psi
            records.append(LeafRecord(
                path=path,
                declared=node.verdict,
                verdict="success" if ok else "failure",
                contribution=prob if ok else 0.0,
                fidelity_alice=fa,
                fidelity_bob=fb,
                flagged=flagged,
                weight_phi=w_phi,
                weight_psi=w_psi,
                probability=prob,
                posterior_phi=p_phi / prob if prob > 0 else math.nan,
                posterior_psi=p_psi / prob if prob > 0 else math.nan,
            ))
            return
        for op in node.instrument:
            child_live = _step(node, op, live)
            if child_live:
                walk(node.children[op.label], path + (op.label,), child_live)

    walk(root, (), _initial_live(task))
    leaves = tuple(records)
    return EvalReport(
        efficiency=math.fsum(r.contribution for r in leaves),
        leaves=leaves,
        max_rounds=count_rounds(root),
        total_weight_phi=math.fsum(r.weight_phi for r in leaves),
        total_weight_psi=math.fsum(r.weight_psi for r in leaves),
    )


def audit_bound(report: EvalReport, task: LoccTask) -> EvalReport:
    """Attach the general LOCC upper bound for ``task`` and whether it holds."""
    bound = eta_locc_upper_bound(
        task.prior_phi, task.prior_psi, task.mu, task.nu, task.mu_prime, task.nu_prime
    )
    return replace(report, bound_value=bound, bound_satisfied=report.efficiency <= bound + BOUND_TOL)


# -- Monte Carlo ------------------------------------------------------------------

class MCResult(NamedTuple):
    frequency: float
    stderr: float
    trials: int
    successes: int


def simulate_mc(
    root: ProtocolNode, task: LoccTask, trials: int, seed: int, block_size: int = 1_000_000
) -> MCResult:
    """Sample hypotheses by prior and outcomes by Born weight, trial by trial.

    Trials are processed in blocks; block ``b`` draws from a generator seeded
    with ``(seed, b)`` so the result does not depend on how blocks are scheduled.
    """
    if trials < 1:
        raise PreconditionError(f"trials must be at least 1, got {trials}")
    validate_protocol(root, *task.dims)
    successes = 0
    for block, start in enumerate(range(0, trials, block_size)):
        n = min(block_size, trials - start)
        rng = np.random.default_rng([seed, block])
        n_phi = int(np.count_nonzero(rng.random(n) < task.prior_phi))
        successes += _mc_walk(root, _initial_live(task), {"phi": n_phi, "psi": n - n_phi}, rng, task)
    freq = successes / trials
    return MCResult(freq, math.sqrt(freq * (1.0 - freq) / trials), trials, successes)


def _mc_walk(node, live, counts, rng, task) -> int:
    if isinstance(node, Leaf):
        ok, _, _, _ = _score_leaf(node, live, task)
        # a hypothesis sampled into a pruned branch cannot succeed
        return sum(c for hyp, c in counts.items() if ok and hyp in live)
    ops = node.instrument.operators
    child_lives = [_step(node, op, live) for op in ops]
    child_counts = [dict.fromkeys(counts, 0) for _ in ops]
    for hyp in HYPOTHESES:
        c = counts.get(hyp, 0)
        if c == 0:
            continue
        weights = np.array([cl[hyp].weight if hyp in cl else 0.0 for cl in child_lives])
        cdf = np.cumsum(weights / weights.sum())
        idx = np.minimum(np.searchsorted(cdf, rng.random(c), side="right"), len(ops) - 1)
        for k, cnt in enumerate(np.bincount(idx, minlength=len(ops))):
            child_counts[k][hyp] = int(cnt)
    total = 0
    for op, cl, cc in zip(ops, child_lives, child_counts):
        if any(cc.values()):
            total += _mc_walk(node.children[op.label], cl, cc, rng, task)
    return total


# -- protocol builders ------------------------------------------------------------------

def _separation_node(party, channel, on_success, on_failure) -> Measurement:
    return Measurement(party, channel.instrument, {"success": on_success, "failure": on_failure})


def _discrimination_node(party: str, task: LoccTask) -> Measurement:
    """``party`` discriminates its target pair; conclusive outcomes prepare both targets."""
    i = PARTIES.index(party)
    ta_phi, ta_psi = task.targets("phi")[i], task.targets("psi")[i]
    children = {
        "phi": Leaf("success", *task.targets("phi")),
        "psi": Leaf("success", *task.targets("psi")),
        "fail": FAIL,
    }
    return Measurement(party, build_discrimination_channel(ta_phi, ta_psi), children)


def _stage_pairs(task: LoccTask, party: str, intermediate: Sequence[float]):
    i = PARTIES.index(party)
    pairs = [(task.sources("phi")[i], task.sources("psi")[i])]
    pairs += [canonical_pair(x) for x in intermediate]
    pairs.append((task.targets("phi")[i], task.targets("psi")[i]))
    for (a, b), (c, d) in zip(pairs, pairs[1:]):
        check_overlaps(overlap(a, b), overlap(c, d))
    return pairs


def build_chain_protocol(
    task: LoccTask,
    alice_steps: Sequence[float] = (),
    bob_steps: Sequence[float] = (),
    schedule: str | None = None,
) -> ProtocolNode:
    """Each party separates its share through a chain of intermediate overlaps.

    ``alice_steps``/``bob_steps`` list intermediate overlaps (nonincreasing,
    between source and target).  ``schedule`` orders the stages, e.g. ``"ABA"``;
    by default stages alternate starting with Alice.  A party that fails stops
    acting; at the end, if exactly one party succeeded, it discriminates its
    separated pair and on a conclusive result both parties prepare the
    identified targets.
    """
    pairs = {"A": _stage_pairs(task, "A", alice_steps), "B": _stage_pairs(task, "B", bob_steps)}
    n_stages = {p: len(pairs[p]) - 1 for p in PARTIES}
    if schedule is None:
        a, b = n_stages["A"], n_stages["B"]
        schedule = "".join("A" * (k < a) + "B" * (k < b) for k in range(max(a, b)))
    if sorted(schedule) != sorted("A" * n_stages["A"] + "B" * n_stages["B"]):
        raise PreconditionError(
            f"schedule {schedule!r} must contain A {n_stages['A']} times and B {n_stages['B']} times"
        )
    channels = {
        p: [separation_channel(*pairs[p][k], *pairs[p][k + 1]) for k in range(n_stages[p])]
        for p in PARTIES
    }

    def build(pos, progress, failed):
        if pos == len(schedule):
            if not failed:
                return Leaf("success")
            if len(failed) == 2:
                return FAIL
            (winner,) = set(PARTIES) - failed
            return _discrimination_node(winner, task)
        party = schedule[pos]
        if party in failed:
            return build(pos + 1, progress, failed)
        k = progress[party]
        advanced = dict(progress, **{party: k + 1})
        return _separation_node(
            party,
            channels[party][k],
            build(pos + 1, advanced, failed),
            build(pos + 1, progress, failed | {party}),
        )

    return build(0, {"A": 0, "B": 0}, frozenset())


def build_protocol_pprime(task: LoccTask) -> ProtocolNode:
    """Both parties optimally separate their own share; a lone success falls back to discrimination."""
    return build_chain_protocol(task, schedule="AB")


def build_discrimination_protocol(task: LoccTask, prepare: bool = True) -> ProtocolNode:
    """Alice discriminates her sources; if inconclusive Bob discriminates his.

    With ``prepare`` the identifying party's outcome triggers local preparation
    of the targets.  Without it the leaves keep the post-measurement states,
    which cannot match nonorthogonal targets.
    """

    def node(party, fallback):
        i = PARTIES.index(party)
        phi, psi = task.sources("phi")[i], task.sources("psi")[i]
        children = {
            hyp: Leaf("success", *task.targets(hyp)) if prepare else Leaf("success")
            for hyp in HYPOTHESES
        }
        children["fail"] = fallback
        return Measurement(party, build_discrimination_channel(phi, psi), children)

    return node("A", node("B", FAIL))


# -- randomized audits -------------------------------------------------------------------

def random_separation_instrument(
    phi: PureState, psi: PureState, phi_target: PureState, psi_target: PureState, seed
) -> Instrument:
    """Random instrument with one outcome ``success`` that separates exactly.

    Success weights ``(a, b)`` on the two hypotheses and the relative phase of
    the target images are random, pushed toward the edge of the feasible region
    (the leftover Gram matrix must stay positive semidefinite).  The leftover
    is split at random over one to three failure outcomes.
    """
    rng = np.random.default_rng(seed)
    mu = overlap(phi, psi)
    phi_t, psi_t = gauge_align(phi_target, psi_target)
    mu_p = overlap(phi_t, psi_t)
    phase = np.exp(2j * np.pi * rng.random())
    s1, t1 = rng.random(2)

    def leftover(lam):
        a, b = lam * s1, lam * t1
        off = mu - math.sqrt(a * b) * mu_p * phase
        return a, b, np.array([[1 - a, off], [np.conj(off), 1 - b]])

    lams = np.linspace(0.0, 1.0 / max(s1, t1), 257)
    feasible = [lam for lam in lams if np.linalg.eigvalsh(leftover(lam)[2])[0] >= 0]
    lam = feasible[-1] * (1.0 if rng.random() < 0.5 else rng.uniform(0.9, 1.0))
    a, b, rem = leftover(lam)

    frame = _span_frame(phi, psi)
    images = np.column_stack([math.sqrt(a) * phi_t.amplitudes, math.sqrt(b) * phase * psi_t.amplitudes])
    ops = [KrausOperator(operator_from_images(frame, images), "success")]

    evals, evecs = np.linalg.eigh(rem)
    factor = np.sqrt(np.clip(evals, 0.0, None))[:, None] * evecs.conj().T
    k = int(rng.integers(1, 4))
    spread = random_unitary(2 * k, rng)[:, :2] @ factor
    for j in range(k):
        rows = operator_from_images(frame, spread[2 * j:2 * j + 2])
        if j == k - 1:
            rows = np.vstack([rows, frame.complement.conj().T])
        ops.append(KrausOperator(rows, f"fail{j}"))
    return Instrument(ops)


class OneRoundReport(NamedTuple):
    acting_party: str
    samples: int
    max_efficiency: float
    bound: float
    violations: int
    passed: bool


def _one_round_protocol(task, party, instrument, fixup) -> ProtocolNode:
    """``party`` measures once; on any outcome claimed as success the other party applies ``fixup``."""
    other = "B" if party == "A" else "A"

    def claim():
        return _separation_node(other, fixup, Leaf("success"), FAIL)

    root = Measurement(party, instrument, {label: claim() for label in instrument.labels})
    report = evaluate_exact(root, task)
    # best verdict per leaf: keep success only where it actually scores
    scoring = {r.path[0] for r in report.leaves if r.verdict == "success"}
    children = {label: claim() if label in scoring else FAIL for label in instrument.labels}
    return Measurement(party, instrument, children)


def one_round_audit(task: LoccTask, samples: int, seed: int, tol: float = 1e-10) -> OneRoundReport:
    """Random single-round protocols must respect the one-party separation bound.

    Requires that one party's overlap is already at its target (``nu == nu'``
    means Alice acts, ``mu == mu'`` means Bob acts).  The idle party only applies
    the isometry matching its sources to its targets, which never fails.
    Sample 0 is the acting party's optimal channel; the rest mix Haar-random
    instruments with random exact-separation instruments.
    """
    if abs(task.nu - task.nu_prime) <= tol:
        party = "A"
    elif abs(task.mu - task.mu_prime) <= tol:
        party = "B"
    else:
        raise PreconditionError("one-round audit needs nu == nu_prime or mu == mu_prime")
    if samples < 1:
        raise PreconditionError("samples must be positive")
    i = PARTIES.index(party)
    other = 1 - i
    src = (task.sources("phi")[i], task.sources("psi")[i])
    tgt = (task.targets("phi")[i], task.targets("psi")[i])
    fixup = separation_channel(
        task.sources("phi")[other], task.sources("psi")[other],
        task.targets("phi")[other], task.targets("psi")[other],
    )
    acting_mu, acting_mu_p = (task.mu, task.mu_prime) if party == "A" else (task.nu, task.nu_prime)
    bound = eta_separation_upper_bound(task.prior_phi, task.prior_psi, acting_mu, acting_mu_p)

    best = -math.inf
    violations = 0
    for k in range(samples):
        rng = np.random.default_rng([seed, k])
        if k == 0:
            inst = separation_channel(*src, *tgt).instrument
        elif rng.random() < 0.25:
            inst = random_instrument(src[0].dim, int(rng.integers(2, 5)), rng)
        else:
            inst = random_separation_instrument(*src, *tgt, rng)
        eff = evaluate_exact(_one_round_protocol(task, party, inst, fixup), task).efficiency
        best = max(best, eff)
        if eff > bound + BOUND_TOL:
            violations += 1
    return OneRoundReport(party, samples, best, bound, violations, violations == 0)
