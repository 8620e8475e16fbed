"""Attack simulations on noisy count outputs.

Three attack classes are covered: disclosing the hard noise bound from
linearly constrained 3-tuples, exploiting margins once the bound is known,
and removing noise by averaging redundant representations.  Exact
probabilities come from discrete convolution; Monte Carlo harnesses are
seeded and reproducible.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .noise import (
    CellKey,
    Laplace,
    NoiseSpec,
    PTable,
    RecordKey,
    TwoTailedGeometric,
    cell_key_noise,
    laplace_variance,
    sample_noise,
)
from .redundancy import enumerate_irrs, count_k_t, optimize_kt2
from .tables import Microdata, StatisticKey, TableProgramme, cell_records, enumerate_subtables, tabulate


@dataclass(frozen=True)
class TripleObservation:
    """Noisy (f, m, t) observations with expectation constraint E(f + m - t) = 0."""

    f: int
    m: int
    t: int

    @property
    def residual(self) -> int:
        return self.f + self.m - self.t


@dataclass
class AttackReport:
    """Outcome of one attack run, JSON-serializable for the audit trail."""

    attack: str
    probability: float | None = None
    m_required: int | None = None
    disclosed: list = field(default_factory=list)
    mc_trials: int = 0
    mc_successes: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.probability is not None and not 0.0 <= self.probability <= 1.0:
            raise DomainError(f"probability out of range: {self.probability}")
        if self.mc_successes > self.mc_trials:
            raise DomainError("successes cannot exceed trials")

    def to_json(self) -> str:
        payload = {
            "attack": self.attack,
            "probability": self.probability,
            "m_required": self.m_required,
            "disclosed": self.disclosed,
            "mc_trials": self.mc_trials,
            "mc_successes": self.mc_successes,
            "seed": self.seed,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


# --- bound disclosure --------------------------------------------------------


def _convolve(a: Sequence, b: Sequence) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return out


def p1_exact(pmf: Sequence, bound: int):
    """Probability that one constrained 3-tuple pins the noise bound exactly.

    ``pmf`` is a symmetric finite pmf centered on zero (odd length); returns
    Pr[|x1 + x2 + x3| > 3*(bound - 1)] by exact triple convolution.  Fraction
    inputs stay exact.
    """
    probs = list(pmf)
    if len(probs) % 2 != 1:
        raise DomainError("pmf must have odd length (symmetric support around 0)")
    half = (len(probs) - 1) // 2
    if half > bound:
        outer = probs[: half - bound] + probs[half + bound + 1 :]
        if any(float(p) != 0.0 for p in outer):
            raise DomainError(f"pmf support exceeds the stated bound {bound}")
    triple = _convolve(_convolve(probs, probs), probs)
    offset = 3 * half
    threshold = 3 * (bound - 1)
    total = 0
    for idx, p in enumerate(triple):
        if abs(idx - offset) > threshold:
            total = total + p
    return total


def tuples_needed(p1: float, alpha: float) -> float:
    """Independent 3-tuples needed to pin the bound at confidence alpha."""
    if not 0.0 <= p1 <= 1.0:
        raise DomainError(f"p1 must lie in [0,1], got {p1}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0,1), got {alpha}")
    if p1 == 0.0:
        return math.inf
    if p1 == 1.0:
        return 1
    # log1p keeps tiny p1 from flushing the denominator to zero
    return int(math.ceil(math.log(1.0 - alpha) / math.log1p(-p1)))


def running_bound_estimates(stream: Sequence[TripleObservation]) -> list[int]:
    """Anytime estimate ceil(|f+m-t|/3) maximized over the stream so far."""
    if not stream:
        raise DomainError("cannot estimate from an empty stream")
    estimates = []
    best = 0
    for obs in stream:
        best = max(best, math.ceil(abs(obs.residual) / 3))
        estimates.append(best)
    return estimates


def estimate_bound(stream: Sequence[TripleObservation]) -> int:
    """Final bound estimate after the whole stream; never exceeds the true bound."""
    return running_bound_estimates(stream)[-1]


def simulate_triples(ptable: PTable, count: int, seed) -> list[TripleObservation]:
    """Noisy 3-tuples over true counts (f, m, f+m) with independent table noise."""
    rng = np.random.default_rng(seed)
    true_f = rng.integers(0, 50, size=count)
    true_m = rng.integers(0, 50, size=count)
    noise = ptable.quantile(rng.random((count, 3)))
    return [
        TripleObservation(
            f=int(true_f[i] + noise[i, 0]),
            m=int(true_m[i] + noise[i, 1]),
            t=int(true_f[i] + true_m[i] + noise[i, 2]),
        )
        for i in range(count)
    ]


def bound_disclosure_mc(
    ptable: PTable, m: int, streams: int, seed, true_bound: int | None = None
) -> AttackReport:
    """Fraction of length-m streams whose max estimate reveals the true bound."""
    if m < 1 or streams < 1:
        raise DomainError("stream length and count must be positive")
    bound = true_bound if true_bound is not None else ptable.bound
    rng = np.random.default_rng(seed)
    draws = ptable.quantile(rng.random((streams, m, 3)))
    residual = draws[:, :, 0] + draws[:, :, 1] - draws[:, :, 2]
    revealed = np.any(np.abs(residual) > 3 * (bound - 1), axis=1)
    return AttackReport(
        attack="BoundDisclosure",
        probability=float(p1_exact(ptable.probabilities, bound)),
        m_required=m,
        mc_trials=streams,
        mc_successes=int(revealed.sum()),
        seed=None if not isinstance(seed, int) else seed,
    )


# --- margin exploit ----------------------------------------------------------


def margin_exploit_scan(
    tuples: Sequence[Sequence[int]], bound: int
) -> list[tuple[int, tuple[int, ...]]]:
    """Flag constraint n-tuples carrying the unique all-extreme noise pattern.

    Each tuple lists n internal counts followed by their total.  A residual of
    exactly +-(n+1)*E can only arise with every internal at -+E and the total
    at +-E, so the true counts are recovered exactly: each internal shifted by
    -sign*E and the total by +sign*E.  Returns (index, recovered counts).
    """
    if bound < 1:
        raise DomainError(f"bound must be a positive integer, got {bound}")
    disclosures = []
    for idx, row in enumerate(tuples):
        if len(row) < 2:
            raise DomainError(f"tuple {idx} needs at least one internal count and a total")
        internals, total = list(row[:-1]), row[-1]
        residual = sum(internals) - total
        if abs(residual) == (len(internals) + 1) * bound:
            sign = 1 if residual > 0 else -1
            recovered = tuple(v - sign * bound for v in internals) + (total + sign * bound,)
            disclosures.append((idx, recovered))
    return disclosures


def margin_exploit_mc(
    ptable: PTable, count: int, seed, n_internal: int = 2
) -> AttackReport:
    """Simulated output scan; disclosed entries carry recovered and true counts."""
    rng = np.random.default_rng(seed)
    true_internal = rng.integers(0, 50, size=(count, n_internal))
    true_total = true_internal.sum(axis=1)
    noise = ptable.quantile(rng.random((count, n_internal + 1)))
    observed = np.column_stack([true_internal, true_total]) + noise
    found = margin_exploit_scan(observed.tolist(), ptable.bound)
    disclosed = [
        {
            "index": idx,
            "recovered": list(recovered),
            "true": [int(v) for v in true_internal[idx]] + [int(true_total[idx])],
        }
        for idx, recovered in found
    ]
    return AttackReport(
        attack="MarginExploit",
        disclosed=disclosed,
        mc_trials=count,
        mc_successes=len(found),
        seed=None if not isinstance(seed, int) else seed,
    )


# --- massive averaging -------------------------------------------------------


def averaging_success(
    variance: float, k: float, t: float, model: str = "Gaussian", xi: float = 0.5
) -> float:
    """Probability that the t-fold redundancy average pins the target within xi.

    ``ChebyshevLower`` gives the distribution-free lower bound
    max(0, 1 - k*V/(t^2 * xi^2)); ``Gaussian`` evaluates the normal model with
    summed-noise variance k*V/t^2 exactly.
    """
    if variance < 0 or k <= 0 or t <= 0 or xi <= 0:
        raise DomainError("V must be nonnegative and k, t, xi positive")
    if variance == 0:
        return 1.0
    avg_var = k * variance / t**2
    if model == "ChebyshevLower":
        return max(0.0, 1.0 - avg_var / xi**2)
    if model == "Gaussian":
        return math.erf(xi / math.sqrt(2.0 * avg_var))
    raise DomainError(f"unknown model {model!r}")


def averaging_mc(
    ptable: PTable, k: int, t: int, trials: int, seed, xi: float = 0.5
) -> AttackReport:
    """Sampled success rate of averaging t noise sums totalling k draws."""
    if k < t or t < 1 or trials < 1:
        raise DomainError("need k >= t >= 1 and positive trials")
    sizes = [k // t + (1 if i < k % t else 0) for i in range(t)]
    rng = np.random.default_rng(seed)
    successes = 0
    for _ in range(trials):
        draws = ptable.quantile(rng.random(k))
        sums, pos = [], 0
        for size in sizes:
            sums.append(draws[pos : pos + size].sum())
            pos += size
        if abs(np.mean(sums)) < xi:
            successes += 1
    return AttackReport(
        attack="Averaging",
        probability=averaging_success(ptable.variance(), k, t, "Gaussian", xi),
        mc_trials=trials,
        mc_successes=successes,
        seed=None if not isinstance(seed, int) else seed,
    )


# --- programme-level noisy outputs and the full averaging attack -------------


OutputKey = tuple[str | None, frozenset[str]]


@dataclass(frozen=True)
class NoisyOutput:
    """A full static output release: noisy tabulations plus the hidden truth.

    ``tables`` maps (table id, statistic ids) to noisy cell values; with SPSN
    the table id slot is None because identical statistics share their noise.
    ``exact`` keeps the pre-noise tabulations per unique statistic for harness
    bookkeeping only.
    """

    spsn: bool
    tables: Mapping[OutputKey, Mapping[tuple, float]]
    exact: Mapping[frozenset, Mapping[tuple, int]]


def _noise_variance(spec: NoiseSpec) -> float | None:
    if isinstance(spec, CellKey):
        return spec.variance
    if isinstance(spec, Laplace):
        return laplace_variance(spec.epsilon, spec.delta_sens)
    if isinstance(spec, TwoTailedGeometric):
        q = math.exp(-spec.epsilon)
        return 2.0 * q / (1.0 - q) ** 2
    return None


def perturb_outputs(
    programme: TableProgramme,
    data: Microdata,
    spec: NoiseSpec | None,
    seed,
    spsn: bool = True,
) -> NoisyOutput:
    """Release every table of the programme with all its marginals, noised.

    ``spec=None`` releases exact counts.  With SPSN and a CellKey spec the
    noise is the genuine lookup mechanism driven by per-record keys; with SPSN
    and other specs one draw is reused per unique (statistic, cell).  Without
    SPSN every (table, statistic, cell) gets an independent draw.
    """
    keys = []  # (table_id, stat frozenset), deterministic order
    unique_stats = {}
    for table in programme.tables:
        for sub in enumerate_subtables(table):
            keys.append((table.id, sub.breakdown_ids))
            unique_stats.setdefault(sub.breakdown_ids, sub)
    exact = {
        ids: tabulate(programme, data, key) for ids, key in unique_stats.items()
    }
    if spec is None:
        if spsn:
            tables = {(None, ids): dict(counts) for ids, counts in exact.items()}
        else:
            tables = {(tid, ids): dict(exact[ids]) for tid, ids in keys}
        return NoisyOutput(spsn=spsn, tables=tables, exact=exact)

    rng = np.random.default_rng(seed)
    tables: dict[OutputKey, dict[tuple, float]] = {}
    if spsn and isinstance(spec, CellKey):
        ptable = spec.ptable()
        record_keys = [
            RecordKey(int(f))
            for f in rng.integers(0, 2**64, size=data.n, dtype=np.uint64)
        ]
        for ids, key in unique_stats.items():
            members = cell_records(programme, data, key)
            tables[(None, ids)] = {
                cell: exact[ids][cell]
                + cell_key_noise([record_keys[i] for i in indices], ptable)
                for cell, indices in members.items()
            }
    elif spsn:
        for ids in unique_stats:
            counts = exact[ids]
            noise = sample_noise(spec, rng.integers(0, 2**63), len(counts))
            tables[(None, ids)] = {
                cell: counts[cell] + noise[i] for i, cell in enumerate(sorted(counts))
            }
    else:
        for tid, ids in keys:
            counts = exact[ids]
            noise = sample_noise(spec, rng.integers(0, 2**63), len(counts))
            tables[(tid, ids)] = {
                cell: counts[cell] + noise[i] for i, cell in enumerate(sorted(counts))
            }
    return NoisyOutput(spsn=spsn, tables=tables, exact=exact)


def irr_value(output: NoisyOutput, irr, target: StatisticKey) -> float:
    """Evaluate one redundant representation of the target cell on the output."""
    stat_ids = target.breakdown_ids | irr.summed_out
    table = output.tables[(irr.table_id, stat_ids)]
    sorted_stat = tuple(sorted(stat_ids))
    positions = [sorted_stat.index(b) for b in target.sorted_ids]
    total = 0.0
    for cell, value in table.items():
        if all(cell[pos] == want for pos, want in zip(positions, target.cell)):
            total += value
    return total


def run_averaging_attack(
    programme: TableProgramme,
    output: NoisyOutput,
    target: StatisticKey,
    optimize: bool = False,
) -> AttackReport:
    """Average all redundant representations of one target cell and round."""
    if target.cell is None:
        raise DomainError("averaging attack needs a fully specified target cell")
    irrs = enumerate_irrs(
        programme, StatisticKey(target.breakdown_ids), spsn=output.spsn
    )
    stats = optimize_kt2(irrs, target) if optimize else count_k_t(irrs, target)
    values = [irr_value(output, irr, target) for irr in stats.irrs]
    estimate = float(np.mean(values))
    recovered = int(round(estimate))
    truth = output.exact[target.breakdown_ids][target.cell]
    return AttackReport(
        attack="Averaging",
        probability=None,
        disclosed=[
            {
                "cell": target.label() + ":" + "/".join(target.cell),
                "recovered": recovered,
                "true": int(truth),
                "estimate": estimate,
                "t": stats.t,
                "k": stats.k,
            }
        ],
        mc_trials=1,
        mc_successes=int(recovered == truth),
    )
