"""Trial execution: round loops tying schedules, adversaries, and delivery.

Two engines share one contract.  The materialized engine simulates every
node and edge of the dual graph; the analytic engine exploits the star
gadgets' structure and tracks only the designated receiver's effective
degree, sampling its per-round success from the closed-form probability
(in log space, so degree bounds given as log2 values keep working).

Randomness: each trial t uses seed `config.seed + t`.  Inside a trial,
streams are derived by `split_seed` (SHA-256 over the labeled seed), with
disjoint labels for node coins ("nodes") and adversary draws ("adversary"),
so adversary outputs cannot depend on node coins even accidentally.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .adversary import AdversaryPolicy, ObservableHistory, make_policy
from .gadgets import Gadget
from .model import DualGraph
from .oracle import exact_success_logprob, log_one_minus_p
from .schedules import Schedule, ceil_log2, log2e_of

_CHUNK = 4096


def split_seed(root: int, *labels) -> int:
    """Derive a 64-bit stream seed from a root seed and labels (documented
    split function: SHA-256 over the colon-joined decimal/string parts)."""
    text = ":".join([str(root), *map(str, labels)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def trial_rngs(seed: int):
    """(node-coin generator, adversary generator, adversary python Random)."""
    np_nodes = np.random.Generator(np.random.PCG64(split_seed(seed, "nodes")))
    np_adv = np.random.Generator(np.random.PCG64(split_seed(seed, "adversary")))
    py_adv = random.Random(split_seed(seed, "adversary", "py"))
    return np_nodes, np_adv, py_adv


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class TrialConfig:
    problem: str                 # "local" | "global"
    gadget: Gadget
    schedule: Schedule
    adversary: dict
    seed: int
    max_rounds: int
    engine_mode: str = "materialized"   # | "analytic_star"
    epsilon: float = 0.1
    rgb_reps: int | None = None  # global: per-node repetition budget in double cycles
    receivers: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.problem not in ("local", "global"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.engine_mode not in ("materialized", "analytic_star"):
            raise ValueError(f"unknown engine {self.engine_mode!r}")
        if self.problem == "local" and not self.gadget.broadcasters:
            raise ValueError("local broadcast needs a nonempty broadcaster set")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    completed: bool
    completion_round: int | None
    first_delivery: dict[int, int]
    rounds_executed: int
    seed: int
    distribution_changes: tuple[tuple[int, object], ...]

    def __post_init__(self):
        if self.completed and self.completion_round is not None:
            assert self.completion_round <= self.rounds_executed


def verify_stability(result: TrialResult, tau: int | None) -> None:
    """Assert consecutive distribution changes are >= tau rounds apart."""
    if tau is None:
        assert len(result.distribution_changes) <= 1
        return
    rounds = [r for r, _ in result.distribution_changes]
    for a, b in zip(rounds, rounds[1:]):
        assert b - a >= tau, f"distribution changed after {b - a} < tau={tau} rounds"


# ---------------------------------------------------------------------------
# repetition-count formulas


def rlb_repetitions(delta: int, tau: int, epsilon: float) -> int:
    """Cycles guaranteeing single-receiver delivery w.p. >= 1-epsilon."""
    tau_bar = min(tau, ceil_log2(delta))
    d_pow = math.exp(math.log(delta) / tau_bar)
    return 2 * math.ceil(math.log(1.0 / epsilon)) * math.ceil(4.0 * math.e * d_pow)


def frlb_repetitions(delta: int, tau: int, epsilon: float) -> int:
    tau_bar = min(tau, math.ceil(log2e_of(delta)))
    d_pow = math.exp(math.log(delta) / tau_bar)
    return (2 * math.ceil(math.log(1.0 / epsilon))
            * math.ceil(4.0 * d_pow * tau_bar / log2e_of(delta)))


def rgb_repetitions(delta: int, tau: int, epsilon: float, n: int) -> int:
    """Per-node double-cycle budget for the global strategy (log base 2e)."""
    tau_bar = min(tau, math.ceil(log2e_of(delta)))
    d_pow = math.exp(math.log(delta) / tau_bar)
    return (math.ceil(math.log(2.0 * n / epsilon))
            * math.ceil(4.0 * d_pow * tau_bar / log2e_of(delta)))


def rlbc_repetitions(delta: int, tau: int, epsilon: float) -> int:
    d_pow = math.exp(math.log(delta) / tau)
    return math.ceil(16.0 * math.e * math.ceil(math.log(1.0 / epsilon) * d_pow))


def default_max_rounds(problem: str, schedule: Schedule, delta: int, tau: int,
                       epsilon: float, n: int, diameter: int = 1) -> int:
    """100x the relevant upper-bound round count, so lower-bound runs can
    observe non-completion without looping forever."""
    k = schedule.cycle_length
    if problem == "global":
        reps = rgb_repetitions(delta, tau, epsilon, n)
        base = (diameter // 3 + 2) * reps * 2 * k
    elif schedule.label == "rlb":
        base = rlb_repetitions(delta, tau, epsilon) * k
    elif schedule.label == "rlbc":
        base = 2 * rlbc_repetitions(delta, tau, epsilon) * k
    else:
        base = frlb_repetitions(delta, tau, epsilon) * k
    return 100 * base


# ---------------------------------------------------------------------------
# materialized engine


class _FlatAdj:
    """CSR-style reliable adjacency for vectorized neighbor counting."""

    def __init__(self, graph: DualGraph):
        n = graph.node_count
        self.n = n
        lens = np.array([len(graph.reliable_neighbors(v)) for v in range(n)],
                        dtype=np.int64)
        self.ptr = np.concatenate(([0], np.cumsum(lens)))
        self.idx = np.array(
            [w for v in range(n) for w in graph.reliable_neighbors(v)],
            dtype=np.int64) if lens.sum() else np.empty(0, dtype=np.int64)

    def counts(self, tx: np.ndarray) -> np.ndarray:
        """Per node, how many of its reliable neighbors are in tx."""
        if len(tx) == 0:
            return np.zeros(self.n, dtype=np.int64)
        starts = self.ptr[tx]
        lens = self.ptr[tx + 1] - starts
        total = int(lens.sum())
        if total == 0:
            return np.zeros(self.n, dtype=np.int64)
        cum = np.concatenate(([0], np.cumsum(lens)))
        pos = np.arange(total) - np.repeat(cum[:-1], lens) + np.repeat(starts, lens)
        return np.bincount(self.idx[pos], minlength=self.n)


def _flat_adj(graph: DualGraph) -> _FlatAdj:
    adj = graph.__dict__.get("_flat_adj_cache")
    if adj is None:
        adj = _FlatAdj(graph)
        graph.__dict__["_flat_adj_cache"] = adj
    return adj


def _unreliable_endpoint_arrays(graph: DualGraph):
    arrays = graph.__dict__.get("_unreliable_arrays_cache")
    if arrays is None:
        if graph.unreliable_edges:
            arr = np.array(graph.unreliable_edges, dtype=np.int64)
            arrays = (np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1]))
        else:
            arrays = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        graph.__dict__["_unreliable_arrays_cache"] = arrays
    return arrays


def round_counts(graph: DualGraph, extra_edge_indices: np.ndarray,
                 transmitters: np.ndarray) -> np.ndarray:
    """Transmitting active-topology neighbors per node (reliable edges plus
    the chosen unreliable ones).  Mirrors model.deliver's counting rule."""
    counts = _flat_adj(graph).counts(transmitters)
    if len(extra_edge_indices):
        ua, ub = _unreliable_endpoint_arrays(graph)
        a = ua[extra_edge_indices]
        b = ub[extra_edge_indices]
        txf = np.zeros(graph.node_count, dtype=bool)
        txf[transmitters] = True
        heard_a = a[txf[b]]
        heard_b = b[txf[a]]
        if len(heard_a):
            counts += np.bincount(heard_a, minlength=graph.node_count)
        if len(heard_b):
            counts += np.bincount(heard_b, minlength=graph.node_count)
    return counts


def derived_receivers(gadget: Gadget) -> tuple[int, ...]:
    """Nodes reliably adjacent to some broadcaster (the problem's R)."""
    graph = gadget.graph
    out = set()
    for b in gadget.broadcasters:
        out.update(graph.reliable_neighbors(b))
    return tuple(sorted(out))


def run_local_trial(config: TrialConfig) -> TrialResult:
    gadget = config.gadget
    graph = gadget.graph
    schedule = config.schedule
    np_nodes, np_adv, py_adv = trial_rngs(config.seed)

    b_arr = np.array(sorted(gadget.broadcasters), dtype=np.int64)
    if config.receivers is not None:
        receivers = tuple(config.receivers)
    elif gadget.receivers:
        receivers = tuple(sorted(gadget.receivers))
    else:
        receivers = derived_receivers(gadget)
    r_arr = np.array(receivers, dtype=np.int64)
    done = np.zeros(len(receivers), dtype=bool)

    history = ObservableHistory(schedule, active_from={int(b): 1 for b in b_arr})
    policy = make_policy(config.adversary, gadget, schedule)
    cycle = np.exp(np.array(schedule.log_probs))
    k = schedule.cycle_length
    first_delivery: dict[int, int] = history.first_delivery

    completion = None
    r = 0
    for r in range(1, config.max_rounds + 1):
        history.round = r
        policy.pre_round(r, history, np_adv, py_adv)
        extra = policy.sample_edges(r, history, np_adv, py_adv)
        p = cycle[(r - 1) % k]
        tx = b_arr[np_nodes.random(len(b_arr)) < p]
        counts = round_counts(graph, extra, tx)
        txf = np.zeros(graph.node_count, dtype=bool)
        txf[tx] = True
        newly = ~done & (counts[r_arr] == 1) & ~txf[r_arr]
        if newly.any():
            for v in r_arr[newly]:
                first_delivery[int(v)] = r
            done |= newly
            if done.all():
                completion = r
                break

    return TrialResult(
        completed=completion is not None,
        completion_round=completion,
        first_delivery=dict(first_delivery),
        rounds_executed=r,
        seed=config.seed,
        distribution_changes=tuple(policy.change_log),
    )


def run_global_trial(config: TrialConfig) -> TrialResult:
    gadget = config.gadget
    graph = gadget.graph
    schedule = config.schedule
    if gadget.source is None:
        raise ValueError("global broadcast needs a gadget with a source")
    np_nodes, np_adv, py_adv = trial_rngs(config.seed)

    n = graph.node_count
    k = schedule.cycle_length
    align = 2 * k
    reps = config.rgb_reps
    if reps is None:
        reps = rgb_repetitions(gadget.delta, config.adversary.get("tau") or k,
                               config.epsilon, n)
    budget = reps * align

    has_msg = np.zeros(n, dtype=bool)
    has_msg[gadget.source] = True
    never = np.iinfo(np.int64).max
    act = np.full(n, never, dtype=np.int64)
    act[gadget.source] = 0  # activation at round 0, transmits from round 1

    history = ObservableHistory(schedule, active_from={gadget.source: 1})
    policy = make_policy(config.adversary, gadget, schedule)
    cycle = np.exp(np.array(schedule.log_probs))
    first_delivery = history.first_delivery

    completion = None
    r = 0
    for r in range(1, config.max_rounds + 1):
        history.round = r
        policy.pre_round(r, history, np_adv, py_adv)
        extra = policy.sample_edges(r, history, np_adv, py_adv)
        cand = np.flatnonzero((act < r) & (act >= r - budget))
        if len(cand) == 0:
            # no transmitter now; stop when no activation is pending either
            # (every node is unreached forever or past its budget)
            if ((act == never) | (act < r - budget)).all():
                break
            continue
        p = cycle[(r - 1) % k]
        tx = cand[np_nodes.random(len(cand)) < p]
        counts = round_counts(graph, extra, tx)
        newly = np.flatnonzero(~has_msg & (counts == 1))
        if len(newly):
            has_msg[newly] = True
            activation = align * math.ceil(r / align)
            assert activation % align == 0
            act[newly] = activation
            for v in newly:
                first_delivery[int(v)] = r
                history.active_from[int(v)] = activation + 1
            if has_msg.all():
                completion = r
                break

    return TrialResult(
        completed=completion is not None,
        completion_round=completion,
        first_delivery=dict(first_delivery),
        rounds_executed=r,
        seed=config.seed,
        distribution_changes=tuple(policy.change_log),
    )


# ---------------------------------------------------------------------------
# analytic engine


def _schedule_arrays(schedule: Schedule):
    """(log p, ln(1-p)) cycle arrays, cached on the schedule instance."""
    cached = schedule.__dict__.get("_np_cache")
    if cached is None:
        log_p = np.array(schedule.log_probs)
        l1mp = np.array([log_one_minus_p(lp) for lp in schedule.log_probs])
        if not np.isfinite(l1mp).all():
            raise ValueError("analytic engine requires every cycle entry < 1")
        cached = (log_p, l1mp)
        schedule.__dict__["_np_cache"] = cached
    return cached


def run_analytic_star_trial(config: TrialConfig) -> TrialResult:
    """Degree-only fast path for a single-receiver star or double star.

    The adversary supplies the receiver's effective degree per round; the
    round succeeds with the exact closed-form probability, sampled by
    comparing log-probability against the log of a uniform draw.
    """
    gadget = config.gadget
    if gadget.kind not in ("star", "double_star") or gadget.receiver is None:
        raise ValueError("analytic engine needs a star or double-star gadget")
    schedule = config.schedule
    np_nodes, np_adv, py_adv = trial_rngs(config.seed)

    recv = gadget.receiver
    flag = recv in gadget.broadcasters
    history = ObservableHistory(schedule,
                                active_from={int(b): 1 for b in gadget.broadcasters})
    policy = make_policy(config.adversary, gadget, schedule)

    k = schedule.cycle_length
    log_p, l1mp = _schedule_arrays(schedule)
    exp_off = 0.0 if flag else 1.0

    completion = None
    rounds_executed = 0
    r = 1
    chunk = 64
    while r <= config.max_rounds and completion is None:
        cnt = min(chunk, config.max_rounds - r + 1)
        chunk = min(chunk * 4, _CHUNK)
        history.round = r
        degs = policy.degrees(r, cnt, history, np_adv, py_adv)
        u = np_nodes.random(cnt)
        if isinstance(degs, np.ndarray):
            idx = (np.arange(r - 1, r - 1 + cnt)) % k
            log_s = np.log(degs) + log_p[idx] + (degs - exp_off) * l1mp[idx]
            hits = np.log(u) < log_s
            if hits.any():
                completion = r + int(np.argmax(hits))
        else:  # arbitrary-precision degrees
            for j, d in enumerate(degs):
                lp = schedule.log_probs[(r - 1 + j) % k]
                log_s = exact_success_logprob(d, lp, flag)
                if math.log(u[j]) < log_s:
                    completion = r + j
                    break
        rounds_executed = completion if completion is not None else r + cnt - 1
        r += cnt

    if completion is not None:
        history.first_delivery[recv] = completion
    return TrialResult(
        completed=completion is not None,
        completion_round=completion,
        first_delivery=dict(history.first_delivery),
        rounds_executed=rounds_executed,
        seed=config.seed,
        distribution_changes=tuple(policy.change_log),
    )


def run_trial(config: TrialConfig) -> TrialResult:
    if config.engine_mode == "analytic_star":
        if config.problem != "local":
            raise ValueError("analytic engine only runs local broadcast")
        return run_analytic_star_trial(config)
    if config.problem == "local":
        return run_local_trial(config)
    return run_global_trial(config)


# ---------------------------------------------------------------------------
# aggregation


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


_QUANTS = (0.25, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class Stats:
    trial_count: int
    success_count: int
    success_rate: float
    wilson_low: float
    wilson_high: float
    mean_completion: float | None
    quantiles: dict[float, float]
    results: tuple[TrialResult, ...] = field(repr=False, default=())

    @property
    def median_completion(self) -> float:
        return self.quantiles[0.5]


def aggregate(results: Sequence[TrialResult]) -> Stats:
    """Deterministic fold over trials sorted by seed (execution-order free)."""
    ordered = sorted(results, key=lambda t: t.seed)
    n = len(ordered)
    succ = sum(1 for t in ordered if t.completed)
    lo, hi = wilson_interval(succ, n)
    finished = [t.completion_round for t in ordered if t.completed]
    mean = (sum(finished) / len(finished)) if finished else None
    effective = sorted((t.completion_round if t.completed else math.inf)
                       for t in ordered)
    quants = {q: effective[min(n - 1, int(q * (n - 1)))] for q in _QUANTS}
    return Stats(
        trial_count=n,
        success_count=succ,
        success_rate=succ / n if n else 0.0,
        wilson_low=lo,
        wilson_high=hi,
        mean_completion=mean,
        quantiles=quants,
        results=tuple(ordered),
    )


def run_trials(config: TrialConfig, trial_count: int) -> Stats:
    """Run trials under seeds seed, seed+1, ... and fold deterministically."""
    if trial_count < 1:
        raise ValueError("trial_count must be >= 1")
    results = [run_trial(replace(config, seed=config.seed + i))
               for i in range(trial_count)]
    return aggregate(results)


# ---------------------------------------------------------------------------
# CSV schema (bit-exact column order)

CSV_COLUMNS = ("trial_id", "seed", "problem", "algo", "engine", "delta_log2",
               "tau", "adversary", "completed", "completion_round",
               "rounds_executed")


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def trial_csv_row(trial_id: int, config: TrialConfig, result: TrialResult) -> str:
    tau = config.adversary.get("tau")
    return ",".join([
        str(trial_id),
        str(result.seed),
        config.problem,
        config.schedule.label,
        config.engine_mode,
        f"{math.log2(config.gadget.delta):.17g}",
        "inf" if tau is None else str(tau),
        config.adversary.get("kind", "static"),
        "1" if result.completed else "0",
        "" if result.completion_round is None else str(result.completion_round),
        str(result.rounds_executed),
    ])
