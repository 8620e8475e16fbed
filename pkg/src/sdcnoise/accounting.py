"""Differential-privacy risk accounting for count outputs.

Guarantee checks are computed for the unit-shift neighboring pair (person
counts change by exactly 1), which is the relevant setting for census-like
tabulations.  Natural logarithms are used throughout.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .errors import DomainError
from .tables import StatisticKey, TableProgramme


@dataclass(frozen=True)
class DPGuarantee:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise DomainError(f"epsilon must be finite and nonnegative, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0,1], got {self.delta}")


@dataclass(frozen=True)
class BudgetSplit:
    global_epsilon: float
    parts: tuple[float, ...]

    def __post_init__(self):
        if any(p <= 0 for p in self.parts):
            raise DomainError("all budget parts must be positive")
        if abs(sum(self.parts) - self.global_epsilon) > 1e-12:
            raise DomainError(
                f"parts sum to {sum(self.parts)}, not {self.global_epsilon}"
            )


@dataclass(frozen=True)
class ReidRates:
    r_recon: float
    r_match: float
    r_reid: float = field(init=False)

    def __post_init__(self):
        for name, value in (("r_recon", self.r_recon), ("r_match", self.r_match)):
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0,1], got {value}")
        object.__setattr__(self, "r_reid", self.r_recon * self.r_match)


def reid_rate(r_recon: float, r_match: float) -> ReidRates:
    """Re-identification success rate: product of reconstruction and matching rates."""
    return ReidRates(r_recon=r_recon, r_match=r_match)


def tightest_delta(pmf: Mapping[int, float], epsilon: float) -> float:
    """Smallest delta making a unit-shifted pair of this noise pmf (eps, delta)-DP.

    Maximizes sum_x max(0, p(x) - e^eps * p(x - s)) over shifts s in {+1, -1};
    strictly positive for every bounded pmf at any finite epsilon.
    """
    if epsilon < 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon}")
    total = sum(pmf.values())
    if abs(total - 1.0) > 1e-9 or any(p < 0 for p in pmf.values()):
        raise DomainError(f"invalid pmf (sum {total})")
    factor = math.exp(epsilon)
    best = 0.0
    for shift in (1, -1):
        delta = sum(
            max(0.0, p - factor * pmf.get(x - shift, 0.0)) for x, p in pmf.items()
        )
        best = max(best, delta)
    return best


def sensitivity(
    programme: TableProgramme, query: Sequence[StatisticKey], spsn: bool = False
) -> int:
    """Global L1 sensitivity of a set of requested tabulations.

    A single-record change moves exactly one cell of every full tabulation it
    appears in, so each requested full tabulation contributes 1.  Cell-restricted
    keys contribute only for records matching the cell; the maximum over record
    types is taken.  With SPSN, duplicate keys share their noise and count once.
    """
    if not query:
        raise DomainError("sensitivity of an empty query is undefined")
    for key in query:
        programme.validate_key(key)
    full = [k for k in query if k.cell is None]
    cells = [k for k in query if k.cell is not None]
    if spsn:
        base = len({k.breakdown_ids for k in full})
        cells = list({(k.breakdown_ids, k.cell): k for k in cells}.values())
    else:
        base = len(full)
    if not cells:
        return base
    # maximize matched cell keys over the record's values on involved breakdowns
    involved = sorted({bid for k in cells for bid in k.breakdown_ids})
    axes = [programme.breakdown(bid).categories for bid in involved]
    best = 0
    for combo in itertools.product(*axes):
        assignment = dict(zip(involved, combo))
        matched = sum(
            1
            for k in cells
            if all(assignment[b] == v for b, v in zip(k.sorted_ids, k.cell))
        )
        best = max(best, matched)
    return base + best


def compose(parts: Sequence[float]) -> float:
    """Sequential composition: budgets add up."""
    if any(p <= 0 for p in parts):
        raise DomainError("all epsilons must be positive")
    return float(sum(parts))


def halving_schedule(global_epsilon: float, i: int) -> float:
    """Budget eps/2^i of the i-th call under the iterative halving schedule."""
    if global_epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {global_epsilon}")
    if i < 1:
        raise DomainError(f"call index must be >= 1, got {i}")
    return global_epsilon / 2.0**i


def eps_alpha_n(n: int, alpha: float) -> float:
    """Per-query epsilon above which a size-n database is reconstructable at
    confidence alpha, assuming t = n log^2 n outputs."""
    if n < 2:
        raise DomainError(f"database size must be >= 2, got {n}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0,1), got {alpha}")
    t = n * math.log(n) ** 2
    return math.log(t / (1.0 - alpha)) / math.sqrt(n)


def noise_scale_for_global(global_epsilon: float, t: float) -> float:
    """Per-count Laplace noise scale sqrt(2)*t/eps under an even eps/t split."""
    if global_epsilon <= 0 or t <= 0:
        raise DomainError("epsilon and output complexity must be positive")
    return math.sqrt(2.0) * t / global_epsilon


def us_table_budget(global_epsilon: float, rounded: bool = True) -> float:
    """Per-table budget: 67.5% of a 1/6 geography share, i.e. 0.1125*eps exactly,
    or the working approximation 0.10*eps when ``rounded``."""
    if global_epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {global_epsilon}")
    share = 0.10 if rounded else 0.675 / 6.0
    return share * global_epsilon
