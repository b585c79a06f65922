"""Forwarding protocols: hop setup, acknowledgement secrets, state machines.

The central construction: for each forwarder the sender picks a random
32-byte secret, and hands the forwarder a nonce such that

    nonce XOR (next hop's secret) XOR (hash of the full message) = puzzle key

A forwarder therefore unlocks its reward block only if it (a) received
the whole message intact (its streaming hash matches the one the sender
used), and (b) got the next hop's secret back, which the next hop sends
only after receiving the whole message itself. Each node also must send
its own secret backward, or the previous hop loses its reward.

State machines here are pure reducers: (state, event) -> actions, with
all timing supplied by the surrounding event loop. No retransmission:
timeouts and hash mismatches fail the node and leave its block to the
puzzle crackers.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

from .timelock import KEY_BYTES, PuzzleChain, xor_bytes


class RollingHash:
    """Streaming SHA-256: absorb chunks in constant memory, finalize once."""

    def __init__(self):
        self._ctx = hashlib.sha256()
        self._digest: Optional[bytes] = None

    def update(self, chunk: bytes) -> "RollingHash":
        if self._digest is not None:
            raise RuntimeError("update after finalize")
        self._ctx.update(chunk)
        return self

    def finalize(self) -> bytes:
        if self._digest is None:
            self._digest = self._ctx.digest()
        return self._digest


def incremental_hash_update(state: RollingHash, chunk: bytes) -> RollingHash:
    """Absorb one chunk into the running hash; constant memory."""
    return state.update(chunk)


@dataclass(frozen=True)
class MessageManifest:
    """What every participant learns about the message up front."""

    message_id: str
    total_length: int
    chunk_size: int
    full_hash: bytes

    def __post_init__(self):
        if self.total_length < 1:
            raise ValueError("total_length must be >= 1")
        if not 1 <= self.chunk_size <= self.total_length:
            raise ValueError("chunk_size must be in 1..total_length")
        if len(self.full_hash) != KEY_BYTES:
            raise ValueError("full_hash must be 32 bytes")

    @classmethod
    def for_message(cls, message_id: str, body: bytes, chunk_size: int) -> "MessageManifest":
        return cls(message_id, len(body), chunk_size, hashlib.sha256(body).digest())

    def chunks(self, body: bytes) -> list[bytes]:
        return [body[i : i + self.chunk_size] for i in range(0, len(body), self.chunk_size)]


@dataclass(frozen=True)
class HopSetup:
    """Per-forwarder values distributed by the sender.

    ``secret`` goes BACK to the previous hop once the full message has
    arrived; ``nonce`` combines with the next hop's secret and the
    message hash to yield this hop's puzzle key.
    """

    hop_index: int  # 1-based position among forwarders
    secret: bytes
    nonce: bytes
    ack_address: str  # control-plane address of the previous hop


def reconstruct_key(nonce: bytes, next_secret: bytes, full_hash: bytes) -> bytes:
    """nonce XOR next_secret XOR full_hash."""
    return xor_bytes(xor_bytes(nonce, next_secret), full_hash)


def setup_double_incentive(
    path: Sequence[str],
    manifest: MessageManifest,
    chain: PuzzleChain,
    rng: random.Random,
) -> tuple[list[HopSetup], bytes]:
    """Build per-forwarder setups for a sender -> f1..fn -> receiver path.

    Draws secrets s_1..s_{n+1} (the last held by the receiver) and sets
    nonce_i = key_{i-1} XOR s_{i+1} XOR full_hash, so that
    reconstruct_key inverts the construction exactly. One reward block
    per forwarder.
    """
    if len(path) < 3:
        raise ValueError("path needs sender, at least one forwarder, and receiver")
    n = len(path) - 2
    if len(chain.blocks) != n:
        raise ValueError(f"chain has {len(chain.blocks)} blocks for {n} forwarders")
    secrets = [rng.randbytes(KEY_BYTES) for _ in range(n + 1)]  # s_1..s_{n+1}
    setups = []
    for i in range(1, n + 1):
        nonce = xor_bytes(xor_bytes(chain.keys[i - 1], secrets[i]), manifest.full_hash)
        setups.append(
            HopSetup(
                hop_index=i,
                secret=secrets[i - 1],
                nonce=nonce,
                ack_address=path[i - 1],
            )
        )
    return setups, secrets[n]


# -- forwarder state machine ------------------------------------------


class Phase(str, Enum):
    AWAITING_SETUP = "awaiting_setup"
    RECEIVING = "receiving"
    FORWARDING = "forwarding"
    AWAITING_ACK = "awaiting_ack"
    RECONSTRUCTING = "reconstructing"
    CLAIMING = "claiming"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class Setup:
    hop_setup: HopSetup
    manifest: MessageManifest
    chain_id: str


@dataclass(frozen=True)
class Chunk:
    data: bytes
    seq: int = 0


@dataclass(frozen=True)
class Ack:
    secret: bytes


@dataclass(frozen=True)
class Timeout:
    pass


ForwarderEvent = Union[Setup, Chunk, Ack, Timeout]


@dataclass(frozen=True)
class SendAck:
    to: str
    secret: bytes


@dataclass(frozen=True)
class ForwardChunk:
    data: bytes
    seq: int = 0


@dataclass(frozen=True)
class SubmitClaim:
    chain_id: str
    block_index: int
    key: bytes


@dataclass(frozen=True)
class Fail:
    reason: str


Action = Union[SendAck, ForwardChunk, SubmitClaim, Fail]


@dataclass
class ForwarderState:
    """One relay node: buffer a window, hash the stream, earn the block.

    The window never holds more than ``window_capacity`` chunks (the
    node never stores the whole message); every received chunk is
    forwarded within the same step.
    """

    node_id: str
    window_capacity: int = 16
    phase: Phase = Phase.AWAITING_SETUP
    setup: Optional[HopSetup] = None
    manifest: Optional[MessageManifest] = None
    chain_id: Optional[str] = None
    hasher: RollingHash = field(default_factory=RollingHash)
    window: deque = field(default_factory=deque)
    bytes_received: int = 0
    received_secret: Optional[bytes] = None
    full_hash: Optional[bytes] = None
    max_window_occupancy: int = 0
    phase_history: list = field(default_factory=list)

    def _enter(self, phase: Phase):
        self.phase = phase
        self.phase_history.append(phase)

    def step(self, event: ForwarderEvent) -> list[Action]:
        if self.phase in (Phase.DONE, Phase.FAILED):
            return []
        if isinstance(event, Setup):
            return self._on_setup(event)
        if isinstance(event, Chunk):
            return self._on_chunk(event)
        if isinstance(event, Ack):
            return self._on_ack(event)
        if isinstance(event, Timeout):
            return self._on_timeout()
        raise TypeError(f"unknown event {event!r}")

    def _on_setup(self, event: Setup) -> list[Action]:
        if self.phase != Phase.AWAITING_SETUP:
            self._enter(Phase.FAILED)
            return [Fail("setup_out_of_order")]
        self.setup = event.hop_setup
        self.manifest = event.manifest
        self.chain_id = event.chain_id
        self._enter(Phase.RECEIVING)
        return []

    def _on_chunk(self, event: Chunk) -> list[Action]:
        if self.phase == Phase.AWAITING_ACK:
            # the declared length already arrived; anything more is excess
            self._enter(Phase.FAILED)
            return [Fail("chunk_overflow")]
        if self.phase not in (Phase.RECEIVING, Phase.FORWARDING):
            self._enter(Phase.FAILED)
            return [Fail("chunk_before_setup")]
        if self.bytes_received + len(event.data) > self.manifest.total_length:
            self._enter(Phase.FAILED)
            return [Fail("chunk_overflow")]
        if self.phase == Phase.RECEIVING:
            self._enter(Phase.FORWARDING)
        self.window.append(event)
        self.max_window_occupancy = max(self.max_window_occupancy, len(self.window))
        if len(self.window) > self.window_capacity:
            self._enter(Phase.FAILED)
            return [Fail("window_overflow")]
        self.hasher.update(event.data)
        self.bytes_received += len(event.data)

        actions: list[Action] = []
        while self.window:
            queued = self.window.popleft()
            actions.append(ForwardChunk(queued.data, queued.seq))
        if self.bytes_received == self.manifest.total_length:
            # full message seen: release own secret backward, commit to the hash
            self.full_hash = self.hasher.finalize()
            actions.append(SendAck(self.setup.ack_address, self.setup.secret))
            self._enter(Phase.AWAITING_ACK)
            if self.received_secret is not None:
                actions.extend(self._reconstruct_and_claim())
        return actions

    def _on_ack(self, event: Ack) -> list[Action]:
        self.received_secret = event.secret
        if self.phase == Phase.AWAITING_ACK:
            return self._reconstruct_and_claim()
        return []  # early ack: held until the message completes

    def _reconstruct_and_claim(self) -> list[Action]:
        self._enter(Phase.RECONSTRUCTING)
        key = reconstruct_key(self.setup.nonce, self.received_secret, self.full_hash)
        self._enter(Phase.CLAIMING)
        self._enter(Phase.DONE)
        return [SubmitClaim(self.chain_id, self.setup.hop_index - 1, key)]

    def _on_timeout(self) -> list[Action]:
        self._enter(Phase.FAILED)
        return [Fail("ack_timeout")]


def forwarder_step(state: ForwarderState, event: ForwarderEvent) -> tuple[ForwarderState, list[Action]]:
    """Functional wrapper over ForwarderState.step (state is mutated)."""
    return state, state.step(event)


@dataclass
class ReceiverState:
    """Terminal node: hash the stream, acknowledge completion.

    In the double-incentive model the receiver sends its secret back to
    the last forwarder as soon as the declared length has arrived (key
    verification happens at the ledger, so corrupted runs surface there
    as bad_key rejections). In the all-or-nothing model it instead
    checks the hash against the manifest and, on a match, acknowledges
    end-to-end to the sender.
    """

    node_id: str
    manifest: MessageManifest
    secret: Optional[bytes] = None  # held in the double-incentive model
    ack_to: Optional[str] = None  # previous hop (double incentive) or sender (all-or-nothing)
    verify_hash: bool = False
    hasher: RollingHash = field(default_factory=RollingHash)
    bytes_received: int = 0
    complete: bool = False
    hash_ok: Optional[bool] = None
    phase: Phase = Phase.RECEIVING

    def on_chunk(self, data: bytes) -> list[Action]:
        if self.complete or self.bytes_received + len(data) > self.manifest.total_length:
            self.phase = Phase.FAILED
            return [Fail("chunk_overflow")]
        self.hasher.update(data)
        self.bytes_received += len(data)
        if self.bytes_received < self.manifest.total_length:
            return []
        self.complete = True
        self.hash_ok = self.hasher.finalize() == self.manifest.full_hash
        self.phase = Phase.DONE
        if self.verify_hash and not self.hash_ok:
            self.phase = Phase.FAILED
            return [Fail("hash_mismatch")]
        if self.ack_to is not None:
            return [SendAck(self.ack_to, self.secret if self.secret is not None else bytes(KEY_BYTES))]
        return []


# -- contract forwarding ----------------------------------------------


@dataclass
class ContractState:
    """One delivery contract; subcontracts nest recursively."""

    contract_id: str
    principal: str
    contractor: str
    agreed_price: int
    deadline: int
    subcontracts: list = field(default_factory=list)

    def leaf(self) -> "ContractState":
        return self.subcontracts[0].leaf() if self.subcontracts else self

    def depth(self) -> int:
        return 1 + (self.subcontracts[0].depth() if self.subcontracts else 0)

    def to_record(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "principal": self.principal,
            "contractor": self.contractor,
            "agreed_price": self.agreed_price,
            "deadline": self.deadline,
            "subcontracts": [s.to_record() for s in self.subcontracts],
        }


class ContractDeclined(Exception):
    """No candidate can do the job within the offered price."""


def plan_contract(
    contract_id: str,
    principal: str,
    contractors: Sequence[str],
    agreed_price: int,
    margin: float,
    deadline: int,
    min_prices: Optional[dict[str, int]] = None,
) -> ContractState:
    """Build the subcontract chain with a fixed per-level margin.

    Level d is paid agreed_price * (1 - margin)^d, rounded down; a level
    whose price falls below its contractor's minimum declines and the
    whole contract fails. Each contractor keeps its margin and passes
    the rest down, so subcontract totals never exceed the parent price.
    """
    if not contractors:
        raise ContractDeclined("no contractor offered")
    if not 0 <= margin < 1:
        raise ValueError("margin must be in [0, 1)")
    min_prices = min_prices or {}
    price = agreed_price
    head = contractors[0]
    if price < min_prices.get(head, 0):
        raise ContractDeclined(f"{head} declines price {price}")
    root = ContractState(contract_id, principal, head, price, deadline)
    node = root
    for i, nxt in enumerate(contractors[1:], start=1):
        price = int(agreed_price * (1 - margin) ** i)
        if price < min_prices.get(nxt, 0):
            raise ContractDeclined(f"{nxt} declines price {price}")
        sub = ContractState(f"{contract_id}.{i}", node.contractor, nxt, price, deadline)
        node.subcontracts.append(sub)
        node = sub
    return root


# -- competing forwarders ---------------------------------------------


def assign_competing_rewards(credited_hops: Sequence[str], values: Sequence[int]) -> dict[str, int]:
    """Map the i-th rank-increasing delivery to block i's value.

    ``credited_hops`` lists the last hop of each innovative packet in
    arrival order; with equal block values this is exactly a split of
    the pool proportional to innovative-packet counts.
    """
    if len(credited_hops) != len(values):
        raise ValueError("one credited hop per reward block required")
    totals: dict[str, int] = {}
    for hop, value in zip(credited_hops, values):
        totals[hop] = totals.get(hop, 0) + value
    return totals
