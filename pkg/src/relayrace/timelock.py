"""Time-locked puzzle reward chains built from iterated SHA-256.

Each reward block hides a 32-byte key behind ``iterations`` sequential
SHA-256 applications of a random initialization vector. Blocks after the
first publish their IV XORed with the previous block's final key, so a
chain can be created in parallel (every key derivation is independent)
but can only be solved in serial: recovering block i's key from public
data requires block i-1's key first.

All quantities (IVs, keys, masks, commitments) are exactly 32 bytes so
XOR composition is well-defined throughout.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Optional, Sequence

KEY_BYTES = 32

# Instrumentation hook: counts individual SHA-256 applications made by
# derive_key/solve_block so tests can assert the serial-solve cost.
_hash_calls = 0


def hash_call_count() -> int:
    """Total SHA-256 applications performed by this module so far."""
    return _hash_calls


def _sha256(data: bytes) -> bytes:
    global _hash_calls
    _hash_calls += 1
    return hashlib.sha256(data).digest()


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """XOR two equal-length byte strings."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return bytes(x ^ y for x, y in zip(a, b))


def _check32(name: str, value: bytes) -> None:
    if not isinstance(value, (bytes, bytearray)) or len(value) != KEY_BYTES:
        raise ValueError(f"{name} must be exactly {KEY_BYTES} bytes")


@dataclass(frozen=True)
class RewardBlockSpec:
    """One block of a puzzle chain, creator-side view.

    ``iv_clear`` is private to the creator; everything else may be
    published. ``iv_published`` equals ``iv_clear`` for block 0 and
    ``iv_clear XOR key(index-1)`` afterwards.
    """

    index: int
    iv_clear: bytes
    iv_published: bytes
    iterations: int
    key_commitment: bytes
    value: int

    def __post_init__(self):
        _check32("iv_clear", self.iv_clear)
        _check32("iv_published", self.iv_published)
        _check32("key_commitment", self.key_commitment)
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.value < 0:
            raise ValueError("value must be >= 0")

    def public(self) -> "PublicBlock":
        return PublicBlock(
            index=self.index,
            iv_published=self.iv_published,
            iterations=self.iterations,
            key_commitment=self.key_commitment,
            value=self.value,
        )


@dataclass(frozen=True)
class PublicBlock:
    """Publishable fields of a reward block (no clear IV, no key)."""

    index: int
    iv_published: bytes
    iterations: int
    key_commitment: bytes
    value: int

    def to_record(self) -> dict:
        """Publication format: hex strings for byte fields, decimal ints."""
        return {
            "index": self.index,
            "iv_published": self.iv_published.hex(),
            "iterations": self.iterations,
            "key_commitment": self.key_commitment.hex(),
            "value": self.value,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PublicBlock":
        return cls(
            index=int(rec["index"]),
            iv_published=bytes.fromhex(rec["iv_published"]),
            iterations=int(rec["iterations"]),
            key_commitment=bytes.fromhex(rec["key_commitment"]),
            value=int(rec["value"]),
        )


@dataclass(frozen=True)
class PuzzleChain:
    """A full reward chain with the creator's keys.

    ``keys`` never leaves the creator; consumers get ``published()``.
    """

    blocks: tuple[RewardBlockSpec, ...]
    keys: tuple[bytes, ...]

    def __post_init__(self):
        if len(self.blocks) != len(self.keys):
            raise ValueError("blocks and keys must have equal length")

    def published(self) -> list[PublicBlock]:
        return [b.public() for b in self.blocks]

    @property
    def total_value(self) -> int:
        return sum(b.value for b in self.blocks)


def derive_key(iv: bytes, iterations: int) -> bytes:
    """Apply SHA-256 to ``iv`` sequentially ``iterations`` times."""
    _check32("iv", iv)
    if iterations < 1:
        # iterations=0 would make the key equal the IV and void the time lock
        raise ValueError("iterations must be >= 1")
    digest = bytes(iv)
    for _ in range(iterations):
        digest = _sha256(digest)
    return digest


def key_commitment(key: bytes) -> bytes:
    """Public commitment to a key: one extra SHA-256 of it."""
    _check32("key", key)
    return _sha256(key)


def verify_key(candidate: bytes, commitment: bytes) -> bool:
    """True iff SHA-256(candidate) equals the published commitment."""
    if len(candidate) != KEY_BYTES or len(commitment) != KEY_BYTES:
        return False
    return _sha256(bytes(candidate)) == commitment


def deobfuscate_iv(iv_published: bytes, prev_key: bytes) -> bytes:
    """Recover a block's clear IV given the previous block's key."""
    _check32("iv_published", iv_published)
    _check32("prev_key", prev_key)
    return xor_bytes(iv_published, prev_key)


def solve_block(iv_published: bytes, prev_key: Optional[bytes], iterations: int) -> bytes:
    """Brute-forcer's path: deobfuscate (if not block 0), then iterate.

    Yields exactly the creator's key; costs ``iterations`` hash calls
    (plus none for the XOR).
    """
    iv = iv_published if prev_key is None else deobfuscate_iv(iv_published, prev_key)
    return derive_key(iv, iterations)


def generate_chain(
    n_blocks: int,
    iterations: int,
    values: Sequence[int],
    rng_seed: int,
    derive_order: Optional[Sequence[int]] = None,
) -> PuzzleChain:
    """Create an ``n_blocks``-long chain from a seeded deterministic RNG.

    IVs come from ``random.Random(rng_seed)`` (reproducible test chains; a
    real deployment would use a CSPRNG). Per-block key derivations are
    independent; ``derive_order`` lets tests evaluate them in any
    permutation and must not change the result.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if len(values) != n_blocks:
        raise ValueError(f"values has length {len(values)}, expected {n_blocks}")
    rng = random.Random(rng_seed)
    ivs = [rng.randbytes(KEY_BYTES) for _ in range(n_blocks)]

    order = range(n_blocks) if derive_order is None else derive_order
    if sorted(order) != list(range(n_blocks)):
        raise ValueError("derive_order must be a permutation of block indices")
    keys: list[Optional[bytes]] = [None] * n_blocks
    for i in order:
        keys[i] = derive_key(ivs[i], iterations)

    blocks = []
    for i in range(n_blocks):
        mask = keys[i - 1] if i > 0 else bytes(KEY_BYTES)
        blocks.append(
            RewardBlockSpec(
                index=i,
                iv_clear=ivs[i],
                iv_published=xor_bytes(ivs[i], mask),
                iterations=iterations,
                key_commitment=key_commitment(keys[i]),
                value=int(values[i]),
            )
        )
    return PuzzleChain(blocks=tuple(blocks), keys=tuple(keys))
