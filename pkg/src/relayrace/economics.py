"""Negotiation, pricing, and per-node profit/loss accounting.

Path selection is greedy hop by hop (negotiation proceeds sequentially,
not as a global optimization): cheapest acceptable quote first, ties
broken by lower expected latency, then lexicographic node id. Surge
pricing scales a base price by 1/(1-utilization) up to a cap, where
utilization is a link's busy fraction over a trailing window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

DEFAULT_SURGE_CAP = 10.0
DEFAULT_UTILIZATION_WINDOW_NS = 1_000_000_000  # 1 simulated second


@dataclass(frozen=True)
class CapabilityQuote:
    """One node's offer to forward: technology, reach, latency, price."""

    node_id: str
    technology_tag: str
    range_meters: float
    expected_latency: float  # seconds
    price: int

    def __post_init__(self):
        if self.price < 0:
            raise ValueError("price must be >= 0")
        if self.expected_latency <= 0:
            raise ValueError("expected_latency must be > 0")


@dataclass(frozen=True)
class PayoffRecord:
    node_id: str
    rewards_confirmed: int
    forwarding_costs_incurred: int

    @property
    def net(self) -> int:
        return self.rewards_confirmed - self.forwarding_costs_incurred


def quote_sort_key(quote: CapabilityQuote) -> tuple:
    """Documented negotiation rule: cheaper, then faster, then node id."""
    return (quote.price, quote.expected_latency, quote.node_id)


def select_path(
    candidates: Sequence[Sequence[CapabilityQuote]],
    budget: int,
    latency_bound: float,
) -> Optional[list[CapabilityQuote]]:
    """Greedy per-hop pick under a per-hop latency bound and total budget.

    Returns the chosen quote per hop, or None when no hop has a feasible
    candidate or the running total exceeds the budget.
    """
    chosen: list[CapabilityQuote] = []
    spent = 0
    for hop_quotes in candidates:
        feasible = [q for q in hop_quotes if q.expected_latency <= latency_bound]
        if not feasible:
            return None
        best = min(feasible, key=quote_sort_key)
        spent += best.price
        if spent > budget:
            return None
        chosen.append(best)
    return chosen


def surge_price(base_price: int, utilization: float, cap: float = DEFAULT_SURGE_CAP) -> int:
    """base_price * min(1/(1-utilization), cap), rounded up to an integer."""
    if not 0 <= utilization < 1:
        raise ValueError("utilization must be in [0, 1)")
    multiplier = min(1.0 / (1.0 - utilization), cap)
    return math.ceil(base_price * multiplier)


def utilization(busy_intervals: Sequence[tuple[int, int]], now: int,
                window: int = DEFAULT_UTILIZATION_WINDOW_NS) -> float:
    """Busy fraction of [now - window, now], clamped below 1."""
    start = now - window
    busy = 0
    for a, b in busy_intervals:
        lo, hi = max(a, start), min(b, now)
        if hi > lo:
            busy += hi - lo
    return min(busy / window, 0.999999)


def settle(
    confirmed_rewards: dict[str, int],
    forward_counts: dict[str, int],
    forwarding_costs: dict[str, int],
    node_ids: Sequence[str],
) -> list[PayoffRecord]:
    """One payoff record per node: confirmed rewards minus forwarding costs.

    Total rewards across records equal the ledger's total confirmed
    value by construction (each claim credits exactly one node).
    """
    records = []
    for node_id in node_ids:
        rewards = confirmed_rewards.get(node_id, 0)
        costs = forward_counts.get(node_id, 0) * forwarding_costs.get(node_id, 0)
        records.append(PayoffRecord(node_id, rewards, costs))
    return records
