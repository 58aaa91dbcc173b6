"""Wall-clock time unit (WTU) accounting.

One WTU is the time of one ``f`` or ``grad f`` evaluation on a parallel
processing unit. Proximal maps, regularizer values and vector arithmetic
are free, and so are objective values computed only for reporting. Costs
per method follow the parallel schedules of the methods: an iteration
without backtracking and each additional backtrack have fixed prices.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

__all__ = ["PLAIN_ITERATION", "BACKTRACK", "COSTS", "cost_key", "WtuLedger", "charge",
           "wtu_of_run"]

PLAIN_ITERATION = "plain_iteration"
BACKTRACK = "backtrack"

# (method kind, event) -> WTU. FGM and FISTA-CP have no line search.
COSTS: dict[tuple[str, str], int] = {
    ("acgm", PLAIN_ITERATION): 1,
    ("acgm", BACKTRACK): 2,
    ("fista", PLAIN_ITERATION): 1,
    ("fista", BACKTRACK): 1,
    ("amgs", PLAIN_ITERATION): 2,
    ("amgs", BACKTRACK): 2,
    ("fgm", PLAIN_ITERATION): 1,
    ("fista_cp", PLAIN_ITERATION): 1,
}

_METHOD_KIND = {"acgm_es": "acgm", "acgm_ex": "acgm"}


def cost_key(method: str) -> str:
    """Cost-model kind of a solver name (both ACGM forms share one)."""
    return _METHOD_KIND.get(method, method)


@dataclass
class WtuLedger:
    total_wtu: int = 0
    counts: Counter = field(default_factory=Counter)


def charge(ledger: WtuLedger, method: str, event: str, multiplicity: int = 1) -> WtuLedger:
    """Add ``multiplicity`` events to the ledger and return it."""
    key = (cost_key(method), event)
    if key not in COSTS:
        raise KeyError(f"no cost defined for {key}")
    if multiplicity < 0:
        raise ValueError("multiplicity must be nonnegative")
    ledger.total_wtu += COSTS[key] * multiplicity
    ledger.counts[key] += multiplicity
    return ledger


def wtu_of_run(method: str, iterations: int, backtracks: int) -> int:
    ledger = WtuLedger()
    charge(ledger, method, PLAIN_ITERATION, iterations)
    if backtracks:
        charge(ledger, method, BACKTRACK, backtracks)
    return ledger.total_wtu
