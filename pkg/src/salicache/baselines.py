"""Budgeted eviction policies: sliding window and H2O-style importance eviction.

Both operate on patch-token ids under a fixed live-token budget. The H2O
variant here is the simplified cumulative-score policy (no per-layer budgets);
the harness labels it "h2o". Its compute-then-discard accounting charges one
wasted score evaluation per evicted token per query that scored it in the
step where it is evicted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .attention import ImportanceLedger
from .errors import ConfigError


@dataclass(frozen=True)
class BudgetConfig:
    budget: int = 784

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")


@dataclass
class EvictionTrace:
    """Running record of evictions and attention work spent on evicted tokens."""

    evicted: list[int] = field(default_factory=list)
    wasted_score_computations: int = 0


def sliding_window_step(
    live_tokens: list[int], new_tokens: list[int], budget: int
) -> tuple[list[int], list[int]]:
    """Append new tokens, then drop the oldest ids until within budget.

    Token ids must be strictly increasing in arrival order, so the keep-set
    is always exactly the ``budget`` highest ids.
    """
    if new_tokens and live_tokens and min(new_tokens) <= max(live_tokens):
        raise ValueError("token ids must be strictly increasing in arrival order")
    merged = sorted(live_tokens) + sorted(new_tokens)
    overflow = max(0, len(merged) - budget)
    return merged[overflow:], merged[:overflow]


def h2o_step(
    ledger: ImportanceLedger,
    live_tokens: list[int],
    budget: int,
    trace: EvictionTrace | None = None,
    queries_this_step: int = 1,
) -> tuple[list[int], list[int]]:
    """Evict the lowest-cumulative-importance tokens until within budget.

    Requires the ledger to cover every live token (attention over all live
    tokens, including the ones about to be evicted, has already been paid
    for: compute-then-discard). Ties evict the lower (older) token id first.
    """
    missing = [t for t in live_tokens if int(t) not in ledger.scores]
    if missing:
        raise ValueError(f"ledger/live mismatch: no scores for tokens {missing[:5]}")
    overflow = max(0, len(live_tokens) - budget)
    if overflow == 0:
        return sorted(live_tokens), []
    by_importance = sorted(live_tokens, key=lambda t: (ledger.score(t), t))
    evicted = sorted(by_importance[:overflow])
    keep = sorted(by_importance[overflow:])
    if trace is not None:
        trace.evicted.extend(evicted)
        trace.wasted_score_computations += len(evicted) * queries_this_step
    return keep, evicted
