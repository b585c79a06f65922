"""Simulated public reward ledger.

Publishes reward chains, takes claim transactions, and enforces the
three claim conditions: serial order (block i needs block i-1 claimed),
key correctness against the block's commitment, and first-claim-wins.
A claim's key becomes publicly readable the instant it is accepted
(that is what lets the next block be deobfuscated), while the monetary
credit lands only after ``confirmation_delay``, modeling slow reward
propagation.

All times are integer simulated nanoseconds. The ledger is a
single-writer state machine: state is a pure function of the ordered
publish/claim sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .timelock import PublicBlock, verify_key

REJECT_OUT_OF_ORDER = "out_of_order"
REJECT_BAD_KEY = "bad_key"
REJECT_ALREADY_CLAIMED = "already_claimed"
REJECT_UNKNOWN_CHAIN = "unknown_chain"


@dataclass(frozen=True)
class LedgerParams:
    """Delays in simulated nanoseconds; both >= 0."""

    confirmation_delay: int = 0
    publication_delay: int = 0

    def __post_init__(self):
        if self.confirmation_delay < 0 or self.publication_delay < 0:
            raise ValueError("ledger delays must be >= 0")


@dataclass(frozen=True)
class Claim:
    chain_id: str
    block_index: int
    claimant: str
    key: bytes
    claim_time: int
    confirm_time: int
    value: int


@dataclass(frozen=True)
class ClaimResult:
    accepted: bool
    reason: Optional[str] = None  # set iff rejected


@dataclass
class LedgerEntry:
    chain_id: str
    blocks: list[PublicBlock]
    publish_time: int
    visible_time: int
    claims: dict[int, Claim] = field(default_factory=dict)


@dataclass(frozen=True)
class ClaimLogRow:
    """One row per submitted claim, accepted or rejected."""

    chain_id: str
    block_index: int
    claimant: str
    result: str  # "accepted" | "rejected"
    reason: str  # rejection reason, "" when accepted
    claim_time: int
    confirm_time: Optional[int]  # None when rejected


class Ledger:
    def __init__(self, params: LedgerParams = LedgerParams()):
        self.params = params
        self._entries: dict[str, LedgerEntry] = {}
        self._log: list[ClaimLogRow] = []
        self._auto_id = 0

    # -- publication -------------------------------------------------

    def publish_chain(
        self, public_blocks: list[PublicBlock], now: int, chain_id: Optional[str] = None
    ) -> str:
        if not public_blocks:
            raise ValueError("cannot publish an empty chain")
        for i, blk in enumerate(public_blocks):
            if blk.index != i:
                raise ValueError(f"block indices must be contiguous from 0, got {blk.index} at {i}")
        if chain_id is None:
            chain_id = f"c{self._auto_id}"
            self._auto_id += 1
        if chain_id in self._entries:
            raise ValueError(f"duplicate chain_id {chain_id!r}")
        self._entries[chain_id] = LedgerEntry(
            chain_id=chain_id,
            blocks=list(public_blocks),
            publish_time=now,
            visible_time=now + self.params.publication_delay,
        )
        return chain_id

    def visible(self, chain_id: str, now: int) -> bool:
        entry = self._entries.get(chain_id)
        return entry is not None and now >= entry.visible_time

    def visible_chains(self, now: int) -> list[str]:
        return [cid for cid, e in self._entries.items() if now >= e.visible_time]

    def chain_blocks(self, chain_id: str) -> list[PublicBlock]:
        return list(self._require(chain_id).blocks)

    def visible_time(self, chain_id: str) -> int:
        return self._require(chain_id).visible_time

    # -- claims ------------------------------------------------------

    def submit_claim(
        self, chain_id: str, block_index: int, key: bytes, claimant: str, now: int
    ) -> ClaimResult:
        entry = self._entries.get(chain_id)
        if entry is None or now < entry.visible_time:
            return self._reject(chain_id, block_index, claimant, now, REJECT_UNKNOWN_CHAIN)
        if block_index < 0 or block_index >= len(entry.blocks):
            return self._reject(chain_id, block_index, claimant, now, REJECT_UNKNOWN_CHAIN)
        if block_index in entry.claims:
            return self._reject(chain_id, block_index, claimant, now, REJECT_ALREADY_CLAIMED)
        block = entry.blocks[block_index]
        # key correctness is reported ahead of ordering: a claim that could
        # never succeed should not masquerade as a merely-early one
        if not verify_key(key, block.key_commitment):
            return self._reject(chain_id, block_index, claimant, now, REJECT_BAD_KEY)
        if block_index > 0 and (block_index - 1) not in entry.claims:
            return self._reject(chain_id, block_index, claimant, now, REJECT_OUT_OF_ORDER)

        confirm = now + self.params.confirmation_delay
        claim = Claim(
            chain_id=chain_id,
            block_index=block_index,
            claimant=claimant,
            key=bytes(key),
            claim_time=now,
            confirm_time=confirm,
            value=block.value,
        )
        entry.claims[block_index] = claim
        self._log.append(
            ClaimLogRow(chain_id, block_index, claimant, "accepted", "", now, confirm)
        )
        return ClaimResult(accepted=True)

    def _reject(
        self, chain_id: str, block_index: int, claimant: str, now: int, reason: str
    ) -> ClaimResult:
        self._log.append(ClaimLogRow(chain_id, block_index, claimant, "rejected", reason, now, None))
        return ClaimResult(accepted=False, reason=reason)

    # -- queries -----------------------------------------------------

    def revealed_keys(self, chain_id: str, now: int) -> dict[int, bytes]:
        """Keys of all claims accepted at or before ``now`` (reveal is instant)."""
        entry = self._require(chain_id)
        return {i: c.key for i, c in entry.claims.items() if c.claim_time <= now}

    def claimed_indices(self, chain_id: str, now: int) -> set[int]:
        entry = self._require(chain_id)
        return {i for i, c in entry.claims.items() if c.claim_time <= now}

    def claim_of(self, chain_id: str, block_index: int) -> Optional[Claim]:
        return self._require(chain_id).claims.get(block_index)

    def confirmed_balance(self, node_id: str, now: int) -> int:
        """Sum of claim values credited to ``node_id`` by ``now``."""
        total = 0
        for entry in self._entries.values():
            for claim in entry.claims.values():
                if claim.claimant == node_id and claim.confirm_time <= now:
                    total += claim.value
        return total

    def claim_log(self) -> list[ClaimLogRow]:
        return list(self._log)

    def claimants(self) -> set[str]:
        return {c.claimant for e in self._entries.values() for c in e.claims.values()}

    def chain_ids(self) -> list[str]:
        return list(self._entries.keys())

    def _require(self, chain_id: str) -> LedgerEntry:
        entry = self._entries.get(chain_id)
        if entry is None:
            raise KeyError(f"unknown chain {chain_id!r}")
        return entry
