"""Fading-adversary policies and the worst-case constructions.

A policy supplies, for each round, the subset of unreliable edges to
activate (materialized engines) or the designated receiver's effective
degree (the analytic fast path).  Policies may change the distribution
they draw from at most once every `tau` rounds; policies declared
`correlated` commit to a joint distribution over whole blocks instead of
independent per-round draws.  Every distribution-identity change is
appended to `change_log` so the engine can audit the stability contract.

Policies see only public information: the schedule, past transmission and
delivery outcomes (ObservableHistory).  Node coin flips are structurally
unreachable, and adversary randomness comes from its own rng substreams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .gadgets import Gadget
from .oracle import exact_success_logprob, log_phase_success_sum, success_peak_degree
from .schedules import Schedule


@dataclass
class ObservableHistory:
    """What an adaptive adversary may condition on: the public schedule and
    per-node transmit-activity/delivery facts.  Contains no private coins."""

    schedule: Schedule
    first_delivery: dict[int, int] = field(default_factory=dict)
    active_from: dict[int, int] = field(default_factory=dict)
    round: int = 0


# ---------------------------------------------------------------------------
# lower-bound constructions


@dataclass(frozen=True)
class GapPhasePlan:
    """Receiver degree placed in the largest gap of one phase's log-estimates.

    Built by the ball/bin procedure: for each phase probability p, balls
    floor(log2(1/p)) and ceil(log2(1/p)) occupy the matching bins among
    floor(log2(delta-1)) circular bins; a_k is the (y+1)-st bin of the
    longest empty run, and the phase degree is 2^a_k.
    """

    phase_probs: tuple[float, ...]
    delta: int
    bins: int
    x: int
    y: int
    a_k: int
    degree: int
    occupied: frozenset[int]
    run_start: int
    run_length: int
    hypothesis_ok: bool


def _uniform_subset(np_rng, m: int, size: int) -> np.ndarray:
    """Uniform size-subset of range(m) without replacement (Floyd's partial
    shuffle; one vectorized draw plus a small insertion loop)."""
    if size < 0 or size > m:
        raise ValueError(f"cannot pick {size} of {m}")
    if size == 0:
        return np.empty(0, dtype=np.int64)
    if size == m:
        return np.arange(m, dtype=np.int64)
    us = np_rng.random(size)
    chosen: set[int] = set()
    for j, u in zip(range(m - size, m), us):
        t = int(u * (j + 1))
        chosen.add(j if t in chosen else t)
    return np.fromiter(chosen, dtype=np.int64, count=size)


def _circular_runs(occupied: set[int], n_bins: int) -> list[tuple[int, int]]:
    """(start, length) of maximal empty runs in circular bins 1..n_bins."""
    if not occupied:
        return [(1, n_bins)]
    occ = sorted(occupied)
    runs = []
    for i, o in enumerate(occ):
        nxt = occ[(i + 1) % len(occ)]
        length = (nxt - o - 1) % n_bins
        if length > 0:
            start = o % n_bins + 1
            runs.append((start, length))
    return runs


def gap_plan(phase_probs: Sequence[float], delta: int, strict: bool = False) -> GapPhasePlan:
    """Build the empty-bin degree plan for one phase.

    With `strict=True` the theorem hypothesis tau <= log2(delta-1)/16 is
    enforced; by default any structurally feasible configuration is
    accepted (the plan records whether the hypothesis held).  Infeasible
    configurations (offsets x,y not positive, or no empty run long enough)
    are rejected.
    """
    tau = len(phase_probs)
    if tau < 1:
        raise ValueError("phase must contain at least one probability")
    if delta < 10:
        raise ValueError("gap construction needs delta >= 10")
    dot_delta = delta - 1
    n_bins = dot_delta.bit_length() - 1  # floor(log2(delta-1))
    log2_dd = math.log2(dot_delta)
    hypothesis_ok = tau <= log2_dd / 16.0
    if strict and not hypothesis_ok:
        raise ValueError(
            f"stability {tau} violates hypothesis tau <= log2(delta-1)/16 = {log2_dd / 16:.3f}")
    inner = math.floor(math.log(dot_delta) / tau)
    if inner < 1:
        raise ValueError(f"phase of {tau} rounds too long for delta-1 = {dot_delta}")
    y = math.floor(math.log2(inner)) + 1
    x = math.floor(log2_dd / tau) - 3 - math.floor(math.log2(inner))
    if x < 1:
        raise ValueError(
            f"gap construction infeasible: x = {x} < 1 for delta={delta}, tau={tau}")

    occupied: set[int] = set()
    estimates = []
    for p in phase_probs:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"phase probability out of (0,1]: {p}")
        est = -math.log2(p)
        estimates.append(est)
        for ball in (math.floor(est), math.ceil(est)):
            if 1 <= ball <= n_bins:
                occupied.add(ball)

    runs = _circular_runs(occupied, n_bins)
    run_start, run_length = min(runs, key=lambda r: (-r[1], r[0]))
    if run_length < x + y:
        raise ValueError(
            f"longest empty run has {run_length} bins, need x+y = {x + y} "
            f"(delta={delta}, tau={tau})")
    a_k = (run_start - 1 + y) % n_bins + 1

    slop = 1e-9
    for est in estimates:
        if not (est <= a_k - y + slop or est >= a_k + x - 1 - slop):
            raise ValueError(
                f"distance invariant violated: estimate {est:.6g} within "
                f"({a_k - y}, {a_k + x - 1}) around a_k={a_k}")

    return GapPhasePlan(
        phase_probs=tuple(phase_probs),
        delta=delta,
        bins=n_bins,
        x=x,
        y=y,
        a_k=a_k,
        degree=1 << a_k,
        occupied=frozenset(occupied),
        run_start=run_start,
        run_length=run_length,
        hypothesis_ok=hypothesis_ok,
    )


def argmin_degree(phase_probs: Sequence[float], delta: int) -> int:
    """Exponent l* in 0..floor(log2(delta-1)) minimizing the phase success sum.

    Brute force over all exponents; the candidate degree is 2^l* and the
    success sum is sum_i p_i * 2^l* * (1-p_i)^(2^l* - 1), compared in log
    space so that underflowing sums still order correctly.
    """
    if delta < 2:
        raise ValueError("delta must be >= 2")
    dot_delta = delta - 1
    top = dot_delta.bit_length() - 1 if dot_delta >= 1 else 0
    log_probs = [math.log(p) for p in phase_probs]
    best_l, best_val = 0, math.inf
    for l in range(top + 1):
        val = log_phase_success_sum(log_probs, 1 << l)
        if val < best_val:
            best_l, best_val = l, val
    return best_l


@dataclass(frozen=True)
class ShiftPlan:
    """Correlated double-star plan: a random cyclic shift pairs each cycle
    probability with a pre-computed extreme degree response (1 or delta)."""

    cycle_probs: tuple[float, ...]
    delta: int
    sqrt_delta: int
    perfect_square: bool
    estimates: tuple[float, ...]
    responses: tuple[int, ...]
    shift: int

    @property
    def cycle_length(self) -> int:
        return len(self.cycle_probs)

    def degree_at(self, t: int) -> int:
        """Receiver degree in (1-based) step t; s = cycle_length pairs p_i
        with its own response."""
        return self.responses[(t - 1 + self.shift) % self.cycle_length]


def shift_plan(cycle_probs: Sequence[float], delta: int, rng,
               forced_shift: int | None = None) -> ShiftPlan:
    """Build the correlated-shift plan for a probability cycle.

    Estimates are e_i = min(1/p_i, delta); the response is degree 1 when
    e_i >= sqrt(delta) (the guess is already small enough) and the full
    degree delta otherwise (drowning the guess in collisions).  The shift
    is drawn uniformly from 1..l once per execution unless forced.
    """
    l = len(cycle_probs)
    if l < 1:
        raise ValueError("cycle must be nonempty")
    sqrt_delta = math.isqrt(delta)
    perfect = sqrt_delta * sqrt_delta == delta
    estimates = []
    responses = []
    for p in cycle_probs:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"cycle probability out of (0,1]: {p}")
        inv = 1.0 / p
        e = min(inv, float(delta)) if math.isfinite(inv) else float(delta)
        estimates.append(e)
        responses.append(1 if e >= sqrt_delta else delta)
    if forced_shift is not None:
        if not 1 <= forced_shift <= l:
            raise ValueError(f"shift must be in 1..{l}")
        s = forced_shift
    else:
        s = int(rng.integers(1, l + 1))
    return ShiftPlan(
        cycle_probs=tuple(cycle_probs),
        delta=delta,
        sqrt_delta=sqrt_delta,
        perfect_square=perfect,
        estimates=tuple(estimates),
        responses=tuple(responses),
        shift=s,
    )


@dataclass(frozen=True)
class DegreeWalkState:
    """Receiver degree moved a bounded amount per round.

    deterministic variant: |change| <= step_budget every round;
    restricted variant: expected |change| <= step_budget (magnitude drawn
    uniformly from 0..2*step_budget).
    """

    degree: int
    step_budget: int
    max_degree: int
    mode: str = "dodging"  # or "random"
    restricted: bool = False
    receiver_has_message: bool = False

    def __post_init__(self):
        if not 1 <= self.degree <= self.max_degree:
            raise ValueError("degree out of [1, max_degree]")
        if self.step_budget < 0:
            raise ValueError("step budget must be >= 0")
        if self.mode not in ("dodging", "random"):
            raise ValueError(f"unknown walk mode {self.mode!r}")


def degree_walk_step(state: DegreeWalkState, next_prob: float, rng) -> DegreeWalkState:
    """Advance the walk one round against the probability the nodes use next.

    Dodging picks whichever reachable extreme has the lower exact success
    at next_prob (success is unimodal in the degree, so the interval
    minimum sits at an endpoint); random picks a direction by coin.
    """
    mag = state.step_budget
    if state.restricted:
        mag = int(rng.integers(0, 2 * state.step_budget + 1))
    if mag == 0:
        return state
    lo = max(1, state.degree - mag)
    hi = min(state.max_degree, state.degree + mag)
    if lo == hi:
        return replace(state, degree=lo)
    if state.mode == "random":
        nxt = hi if rng.random() < 0.5 else lo
        return replace(state, degree=nxt)
    peak = success_peak_degree(next_prob) if next_prob > 0.0 else math.inf
    if hi < peak:
        nxt = lo
    elif lo > peak:
        nxt = hi
    else:
        log_p = math.log(next_prob)
        s_lo = exact_success_logprob(lo, log_p, state.receiver_has_message)
        s_hi = exact_success_logprob(hi, log_p, state.receiver_has_message)
        nxt = lo if s_lo <= s_hi else hi
    return replace(state, degree=nxt)


# ---------------------------------------------------------------------------
# policies


class AdversaryPolicy:
    """Per-trial mutable policy instance.  Subclasses implement
    `_new_block` (draw the block's distribution) plus one or both of
    `_sample_block_edges` / `_block_degrees`."""

    kind = "abstract"
    correlated = False

    def __init__(self, tau: int | None):
        if tau is not None and tau < 1:
            raise ValueError("tau must be >= 1 (or None for infinity)")
        self.tau = tau
        self.change_log: list[tuple[int, object]] = []
        self._fingerprint: object = None
        self._block: int | None = None

    # -- stability bookkeeping

    def block_index(self, round_index: int) -> int:
        return 0 if self.tau is None else (round_index - 1) // self.tau

    def _record(self, round_index: int, fingerprint: object) -> None:
        if fingerprint != self._fingerprint:
            self.change_log.append((round_index, fingerprint))
            self._fingerprint = fingerprint

    def pre_round(self, round_index: int, history: ObservableHistory,
                  np_rng, py_rng) -> None:
        blk = self.block_index(round_index)
        if blk != self._block:
            self._block = blk
            fp = self._new_block(blk, round_index, history, np_rng, py_rng)
            self._record(round_index, fp)

    # -- hooks

    def _new_block(self, block, round_index, history, np_rng, py_rng) -> object:
        raise NotImplementedError

    def sample_edges(self, round_index: int, history: ObservableHistory,
                     np_rng, py_rng) -> np.ndarray:
        """Indices into graph.unreliable_edges active this round."""
        raise NotImplementedError(f"{self.kind} has no materialized mode")

    def degrees(self, start_round: int, count: int, history: ObservableHistory,
                np_rng, py_rng):
        """Receiver effective degrees for rounds start..start+count-1."""
        out = np.empty(count, dtype=np.float64)
        pos = 0
        r = start_round
        while pos < count:
            if self.tau is None:
                seg = count - pos
            else:
                block_end = self.block_index(r) * self.tau + self.tau  # last round of block
                seg = min(count - pos, block_end - r + 1)
            self.pre_round(r, history, np_rng, py_rng)
            out[pos:pos + seg] = self._block_degrees(r, seg, np_rng)
            pos += seg
            r += seg
        return out

    def _block_degrees(self, round_index, count, np_rng):
        raise NotImplementedError(f"{self.kind} has no analytic mode")


class StaticPolicy(AdversaryPolicy):
    """Point distribution on one fixed subset (empty by default)."""

    kind = "static"

    def __init__(self, tau=None, edge_indices: Sequence[int] = (), extra_degree: int = 0):
        super().__init__(tau)
        self.edge_indices = np.asarray(sorted(edge_indices), dtype=np.int64)
        self.extra_degree = extra_degree

    def _new_block(self, block, round_index, history, np_rng, py_rng):
        return ("static", tuple(self.edge_indices.tolist()), self.extra_degree)

    def sample_edges(self, round_index, history, np_rng, py_rng):
        return self.edge_indices

    def degrees(self, start_round, count, history, np_rng, py_rng):
        self.pre_round(start_round, history, np_rng, py_rng)
        return np.full(count, 1.0 + self.extra_degree)


class IidSubsetPolicy(AdversaryPolicy):
    """Each unreliable edge independently present with probability q.

    With `edge_prob=None` a fresh q ~ U(0,1) is drawn at every block
    boundary, which is the strongest re-randomizing member of the family.
    """

    kind = "iid_subset"

    def __init__(self, tau, edge_prob: float | None, n_unreliable: int,
                 receiver_unreliable: int | None = None):
        super().__init__(tau)
        if edge_prob is not None and not 0.0 <= edge_prob <= 1.0:
            raise ValueError("edge_prob must lie in [0,1]")
        self.edge_prob = edge_prob
        self.n_unreliable = n_unreliable
        self.receiver_unreliable = receiver_unreliable
        self._q = 0.0
        self._q_by_block: dict[int, float] = {}
        self._drawn_through = -1

    def _q_for_block(self, block: int, py_rng) -> float:
        """Block inclusion probabilities, drawn in block order exactly once.

        Drawn from the scalar adversary stream, separate from the numpy
        stream used for subset/binomial sampling, so the q sequence does
        not depend on how callers batch those draws."""
        if self.edge_prob is not None:
            return self.edge_prob
        while self._drawn_through < block:
            self._drawn_through += 1
            self._q_by_block[self._drawn_through] = py_rng.random()
        return self._q_by_block[block]

    def _new_block(self, block, round_index, history, np_rng, py_rng):
        self._q = self._q_for_block(block, py_rng)
        return ("iid", self._q)

    def sample_edges(self, round_index, history, np_rng, py_rng):
        mask = np_rng.random(self.n_unreliable) < self._q
        return np.flatnonzero(mask)

    def degrees(self, start_round, count, history, np_rng, py_rng):
        m = self.receiver_unreliable
        if m is None:
            raise ValueError("iid analytic mode needs the receiver's unreliable arm count")
        if self.tau is None:
            self.pre_round(start_round, history, np_rng, py_rng)
            return 1.0 + np_rng.binomial(m, self._q, size=count)
        tau = self.tau
        b0 = (start_round - 1) // tau
        b1 = (start_round + count - 2) // tau
        self._q_for_block(b1, py_rng)  # draw any missing blocks, in order
        if self.edge_prob is not None:
            qs = np.full(b1 - b0 + 1, self.edge_prob)
            self.pre_round(b0 * tau + 1, history, np_rng, py_rng)
            self._block = b1
        else:
            qs = np.array([self._q_by_block[b] for b in range(b0, b1 + 1)])
            start_b = b0 if self._block is None or self._block < b0 else self._block + 1
            self.change_log.extend(
                (b * tau + 1, ("iid", self._q_by_block[b])) for b in range(start_b, b1 + 1))
            self._block = b1
            self._q = self._q_by_block[b1]
            self._fingerprint = ("iid", self._q)
        blocks = (np.arange(start_round - 1, start_round - 1 + count) // tau) - b0
        return 1.0 + np_rng.binomial(m, qs[blocks])


class _PhasePlanPolicy(AdversaryPolicy):
    """Shared machinery for gap/argmin: a fixed degree per phase realized as
    a fresh uniform subset of the receiver's unreliable arms each round.

    The degree depends only on where the phase sits in the probability
    cycle, so plans are cached by that position tuple."""

    def __init__(self, tau: int, schedule: Schedule, delta: int,
                 receiver_edge_indices: Sequence[int]):
        if tau is None:
            raise ValueError("phase-plan policies need a finite tau")
        super().__init__(tau)
        self.schedule = schedule
        self.delta = delta
        self.receiver_edge_indices = np.asarray(receiver_edge_indices, dtype=np.int64)
        self.degree = 1
        self._degree_cache: dict[tuple[int, ...], int] = {}

    def _degree_for_block(self, block: int) -> int:
        k = self.schedule.cycle_length
        key = tuple((block * self.tau + j) % k for j in range(self.tau))
        deg = self._degree_cache.get(key)
        if deg is None:
            deg = self._pick_degree([math.exp(self.schedule.log_probs[i]) for i in key])
            self._degree_cache[key] = deg
        return deg

    def _pick_degree(self, probs: Sequence[float]) -> int:
        raise NotImplementedError

    def _new_block(self, block, round_index, history, np_rng, py_rng):
        self.degree = self._degree_for_block(block)
        return ("fixed-degree", self.degree)

    def sample_edges(self, round_index, history, np_rng, py_rng):
        extra = self.degree - 1
        if extra <= 0:
            return np.empty(0, dtype=np.int64)
        if extra > len(self.receiver_edge_indices):
            raise ValueError("degree exceeds the receiver's unreliable arms")
        pick = _uniform_subset(np_rng, len(self.receiver_edge_indices), extra)
        return self.receiver_edge_indices[pick]

    def degrees(self, start_round, count, history, np_rng, py_rng):
        b0 = (start_round - 1) // self.tau
        b1 = (start_round + count - 2) // self.tau
        degs = np.empty(b1 - b0 + 1)
        for b in range(b0, b1 + 1):
            self.pre_round(b * self.tau + 1, history, np_rng, py_rng)
            degs[b - b0] = self.degree
        blocks = (np.arange(start_round - 1, start_round - 1 + count) // self.tau) - b0
        return degs[blocks]


class GapPolicy(_PhasePlanPolicy):
    kind = "gap"

    def __init__(self, tau, schedule, delta, receiver_edge_indices, strict=False):
        super().__init__(tau, schedule, delta, receiver_edge_indices)
        self.strict = strict
        self.plans: list[GapPhasePlan] = []

    def _pick_degree(self, probs):
        plan = gap_plan(probs, self.delta, strict=self.strict)
        self.plans.append(plan)
        return plan.degree


class ArgminPolicy(_PhasePlanPolicy):
    kind = "argmin"

    def _pick_degree(self, probs):
        return 1 << argmin_degree(probs, self.delta)


class CorrelatedShiftPolicy(AdversaryPolicy):
    """One distribution for the whole run (tau = infinity) whose per-round
    degrees become deterministic once the shift is drawn."""

    kind = "correlated_shift"
    correlated = True

    def __init__(self, schedule: Schedule, delta: int,
                 receiver_edge_indices: Sequence[int],
                 forced_shift: int | None = None):
        super().__init__(None)
        self.schedule = schedule
        self.delta = delta
        self.receiver_edge_indices = np.asarray(receiver_edge_indices, dtype=np.int64)
        self.forced_shift = forced_shift
        self.plan: ShiftPlan | None = None

    def _new_block(self, block, round_index, history, np_rng, py_rng):
        self.plan = shift_plan(self.schedule.cycle, self.delta, np_rng,
                               forced_shift=self.forced_shift)
        self._responses = np.array(self.plan.responses, dtype=np.float64)
        return ("shift", self.plan.shift)

    def sample_edges(self, round_index, history, np_rng, py_rng):
        extra = self.plan.degree_at(round_index) - 1
        if extra <= 0:
            return np.empty(0, dtype=np.int64)
        pick = _uniform_subset(np_rng, len(self.receiver_edge_indices), extra)
        return self.receiver_edge_indices[pick]

    def degrees(self, start_round, count, history, np_rng, py_rng):
        self.pre_round(start_round, history, np_rng, py_rng)
        idx = (np.arange(start_round, start_round + count) - 1 + self.plan.shift) \
            % self.plan.cycle_length
        return self._responses[idx]


class DegreeWalkPolicy(AdversaryPolicy):
    """Correlated walk on the receiver degree with a per-round change budget."""

    correlated = True

    def __init__(self, tau, schedule: Schedule, step_budget: int, max_degree: int,
                 receiver_edge_indices: Sequence[int] = (),
                 mode: str = "dodging", restricted: bool = True,
                 start_degree: int = 1):
        super().__init__(tau)
        self.kind = "degree_walk_restricted" if restricted else "degree_walk_deterministic"
        self.schedule = schedule
        self.receiver_edge_indices = np.asarray(receiver_edge_indices, dtype=np.int64)
        self.state = DegreeWalkState(
            degree=start_degree, step_budget=step_budget, max_degree=max_degree,
            mode=mode, restricted=restricted)
        self._stepped_for = 1  # state currently valid for round 1

    def _new_block(self, block, round_index, history, np_rng, py_rng):
        return ("walk-block", block)

    def _advance_to(self, round_index: int, np_rng) -> None:
        while self._stepped_for < round_index:
            nxt = self._stepped_for + 1
            p = math.exp(self.schedule.log_probs[(nxt - 1) % self.schedule.cycle_length])
            self.state = degree_walk_step(self.state, p, np_rng)
            self._stepped_for = nxt

    def sample_edges(self, round_index, history, np_rng, py_rng):
        self._advance_to(round_index, np_rng)
        extra = self.state.degree - 1
        if extra <= 0:
            return np.empty(0, dtype=np.int64)
        pick = _uniform_subset(np_rng, len(self.receiver_edge_indices), extra)
        return self.receiver_edge_indices[pick]

    def degrees(self, start_round, count, history, np_rng, py_rng):
        self.pre_round(start_round, history, np_rng, py_rng)
        log_probs = self.schedule.log_probs
        k = self.schedule.cycle_length
        budget = self.state.step_budget
        restricted = self.state.restricted
        dodging = self.state.mode == "dodging"
        cap = self.state.max_degree
        flag = self.state.receiver_has_message

        self._advance_to(start_round, np_rng)
        d = self.state.degree
        out: list = [0] * count
        out[0] = d
        # tight inline walk; semantics identical to degree_walk_step
        randint = np_rng.integers
        coin = np_rng.random
        for j in range(1, count):
            r = start_round + j
            if self.tau is not None and (r - 1) % self.tau == 0:
                self.pre_round(r, history, np_rng, py_rng)
            mag = budget if not restricted else int(randint(0, 2 * budget + 1))
            if mag:
                lo = d - mag
                if lo < 1:
                    lo = 1
                hi = d + mag
                if hi > cap:
                    hi = cap
                if lo == hi:
                    d = lo
                elif not dodging:
                    d = hi if coin() < 0.5 else lo
                else:
                    p = math.exp(log_probs[(r - 1) % k])
                    # underflowed p: the peak (1-p)/p is beyond any degree
                    peak = (1.0 - p) / p if p > 0.0 else math.inf
                    if hi < peak:
                        d = lo
                    elif lo > peak:
                        d = hi
                    else:
                        lp = log_probs[(r - 1) % k]
                        s_lo = exact_success_logprob(lo, lp, flag)
                        s_hi = exact_success_logprob(hi, lp, flag)
                        d = lo if s_lo <= s_hi else hi
            out[j] = d
        self.state = replace(self.state, degree=d)
        self._stepped_for = start_round + count - 1
        if max(out) < 2 ** 53:
            return np.asarray(out, dtype=np.float64)
        return out


class ChainedGapPolicy(AdversaryPolicy):
    """Per-gadget gap plans for the chained graph.

    Gadgets the message has not reached hold their first-phase plan; the
    frontier gadget advances to the next plan only after its relay arms
    have transmitted a full phase of probabilities; a gadget whose local
    receiver has the message keeps its final plan forever.  Advancement is
    therefore never faster than once per tau rounds.
    """

    kind = "chained_gap"

    def __init__(self, tau: int, schedule: Schedule, gadget: Gadget,
                 strict: bool = False):
        super().__init__(tau)
        if gadget.kind != "chained":
            raise ValueError("chained_gap needs a chained gadget")
        self.schedule = schedule
        self.gadget = gadget
        self.strict = strict
        self._plan_cache: dict[int, GapPhasePlan] = {}
        first = self._plan_for_phase(1)
        self.section_phase = [1] * len(gadget.sections)
        self.section_plan = [first] * len(gadget.sections)
        self.section_frozen = [False] * len(gadget.sections)
        self._section_edge_arrays = [np.asarray(s.unreliable_indices, dtype=np.int64)
                                     for s in gadget.sections]

    def _plan_for_phase(self, phase: int) -> GapPhasePlan:
        plan = self._plan_cache.get(phase)
        if plan is None:
            k = self.schedule.cycle_length
            probs = [math.exp(self.schedule.log_probs[((phase - 1) * self.tau + j) % k])
                     for j in range(self.tau)]
            plan = gap_plan(probs, self.gadget.delta, strict=self.strict)
            self._plan_cache[phase] = plan
        return plan

    def pre_round(self, round_index, history, np_rng, py_rng):
        for i, section in enumerate(self.gadget.sections):
            if self.section_frozen[i]:
                continue
            if section.receiver in history.first_delivery:
                self.section_frozen[i] = True
                continue
            start = history.active_from.get(section.arms[0])
            if start is None or round_index <= start:
                continue
            phase = 1 + (round_index - start) // self.tau
            if phase != self.section_phase[i]:
                self.section_phase[i] = phase
                self.section_plan[i] = self._plan_for_phase(phase)
        fp = tuple((self.section_plan[i].degree, self.section_frozen[i])
                   for i in range(len(self.gadget.sections)))
        self._record(round_index, ("chained", fp))

    def sample_edges(self, round_index, history, np_rng, py_rng):
        picks = []
        for i, arr in enumerate(self._section_edge_arrays):
            extra = self.section_plan[i].degree - 1
            if extra <= 0:
                continue
            sel = _uniform_subset(np_rng, len(arr), extra)
            picks.append(arr[sel])
        if not picks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(picks)


def chained_gap_controller(gadget: Gadget, message_front: int,
                           section_phases: Sequence[int], schedule: Schedule,
                           tau: int, strict: bool = False) -> list[GapPhasePlan]:
    """Pure view of the chained rule: per-gadget plans given the frontier.

    Sections beyond `message_front` get the phase-1 plan; the section at the
    frontier gets the plan for its recorded phase; earlier (delivered)
    sections keep theirs too.  Used by tests; the engine drives the stateful
    ChainedGapPolicy, which implements the same rule incrementally.
    """
    k = schedule.cycle_length
    plans = []
    for i in range(len(gadget.sections)):
        phase = section_phases[i] if i <= message_front else 1
        probs = [math.exp(schedule.log_probs[((phase - 1) * tau + j) % k])
                 for j in range(tau)]
        plans.append(gap_plan(probs, gadget.delta, strict=strict))
    return plans


def sample_round(policy: AdversaryPolicy, graph, round_index: int,
                 history: ObservableHistory, np_rng, py_rng=None):
    """One adversary round: honor block boundaries, then draw the extra
    edge subset (as edges of E' \\ E).  Convenience wrapper over the policy
    interface for callers that want edge pairs rather than dense indices."""
    policy.pre_round(round_index, history, np_rng, py_rng)
    idx = policy.sample_edges(round_index, history, np_rng, py_rng)
    return [graph.unreliable_edges[i] for i in idx]


# ---------------------------------------------------------------------------
# construction from config


def make_policy(spec: dict, gadget: Gadget, schedule: Schedule) -> AdversaryPolicy:
    """Fresh per-trial policy from a config mapping (`kind` plus parameters)."""
    kind = spec.get("kind", "static")
    tau = spec.get("tau")
    graph = gadget.graph
    recv = gadget.receiver
    recv_edges: tuple[int, ...] = ()
    if recv is not None:
        recv_edges = graph.unreliable_incident(recv)

    if kind == "static":
        return StaticPolicy(tau=tau, edge_indices=spec.get("edges", ()),
                            extra_degree=spec.get("extra_degree", 0))
    if kind == "iid_subset":
        if gadget.meta.get("virtual"):
            recv_unrel = gadget.delta - 2
        else:
            recv_unrel = len(recv_edges) if recv is not None else None
        return IidSubsetPolicy(
            tau=tau,
            edge_prob=spec.get("edge_prob"),
            n_unreliable=len(graph.unreliable_edges),
            receiver_unreliable=recv_unrel)
    if kind == "gap":
        return GapPolicy(tau=tau, schedule=schedule, delta=gadget.delta,
                         receiver_edge_indices=recv_edges,
                         strict=spec.get("strict", False))
    if kind == "argmin":
        return ArgminPolicy(tau=tau, schedule=schedule, delta=gadget.delta,
                            receiver_edge_indices=recv_edges)
    if kind == "correlated_shift":
        return CorrelatedShiftPolicy(schedule=schedule, delta=gadget.delta,
                                     receiver_edge_indices=recv_edges,
                                     forced_shift=spec.get("shift"))
    if kind in ("degree_walk_deterministic", "degree_walk_restricted"):
        max_degree = spec.get("max_degree")
        if max_degree is None:
            if gadget.meta.get("virtual"):
                max_degree = gadget.delta - 1  # receiver's potential star degree
            elif recv is not None:
                max_degree = len(recv_edges) + 1
            else:
                max_degree = gadget.delta
        return DegreeWalkPolicy(
            tau=tau, schedule=schedule,
            step_budget=spec["l"], max_degree=max_degree,
            receiver_edge_indices=recv_edges,
            mode=spec.get("walk_mode", "dodging"),
            restricted=(kind == "degree_walk_restricted"),
            start_degree=spec.get("start_degree", 1))
    if kind == "chained_gap":
        return ChainedGapPolicy(tau=tau, schedule=schedule, gadget=gadget,
                                strict=spec.get("strict", False))
    raise ValueError(f"unknown adversary kind {kind!r}")
