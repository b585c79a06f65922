"""Random linear network coding over GF(256).

Source symbols of a generation are combined with uniformly random
coefficients; intermediate nodes may recode (fresh random combinations
of packets they hold) and the receiver performs incremental Gaussian
elimination, counting each rank-increasing packet as innovative. Field
arithmetic uses GF(2^8) with the AES reduction polynomial
x^8 + x^4 + x^3 + x + 1 (0x11B); addition is XOR.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

MAX_GENERATION_SIZE = 255

# exp/log tables over generator 0x03
_EXP = [0] * 512
_LOG = [0] * 256


def _build_tables():
    x = 1
    for i in range(255):
        _EXP[i] = x
        _LOG[x] = i
        # multiply x by the generator 0x03 = x + 1
        x ^= (x << 1) ^ (0x11B if x & 0x80 else 0)
        x &= 0xFF
    for i in range(255, 512):
        _EXP[i] = _EXP[i - 255]


_build_tables()


def gf256_mul(a: int, b: int) -> int:
    """Multiply in GF(2^8), AES polynomial."""
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def gf256_inv(a: int) -> int:
    """Multiplicative inverse; a must be nonzero."""
    if a == 0:
        raise ZeroDivisionError("zero has no inverse in GF(256)")
    return _EXP[255 - _LOG[a]]


def _mul_row(scalar: int, row: bytes) -> bytes:
    if scalar == 0:
        return bytes(len(row))
    if scalar == 1:
        return bytes(row)
    log_s = _LOG[scalar]
    return bytes(_EXP[log_s + _LOG[v]] if v else 0 for v in row)


def _add_rows(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


@dataclass(frozen=True)
class Generation:
    """k source symbols of equal size, jointly encoded."""

    generation_id: str
    k: int
    symbol_size: int
    source_symbols: tuple[bytes, ...]

    def __post_init__(self):
        if not 1 <= self.k <= MAX_GENERATION_SIZE:
            raise ValueError(f"k must be in 1..{MAX_GENERATION_SIZE}")
        if len(self.source_symbols) != self.k:
            raise ValueError("source_symbols must have exactly k entries")
        if any(len(s) != self.symbol_size for s in self.source_symbols):
            raise ValueError("all symbols must be exactly symbol_size bytes")

    @classmethod
    def from_message(cls, generation_id: str, message: bytes, k: int) -> "Generation":
        """Split a message into k symbols, zero-padding the tail."""
        if k < 1:
            raise ValueError("k must be >= 1")
        symbol_size = max(1, -(-len(message) // k))  # ceil division
        padded = message.ljust(k * symbol_size, b"\x00")
        symbols = tuple(padded[i * symbol_size : (i + 1) * symbol_size] for i in range(k))
        return cls(generation_id, k, symbol_size, symbols)


@dataclass(frozen=True)
class CodedPacket:
    """Coefficient vector plus the matching linear combination of symbols.

    ``last_hop`` is restamped at every transmission; the receiver credits
    innovative packets to it.
    """

    generation_id: str
    coefficients: bytes  # k GF(256) elements
    payload: bytes
    last_hop: Optional[str] = None

    def with_last_hop(self, node_id: str) -> "CodedPacket":
        return CodedPacket(self.generation_id, self.coefficients, self.payload, node_id)


def combine_symbols(coefficients: Sequence[int], symbols: Sequence[bytes]) -> bytes:
    """Sum of coefficient[j] * symbols[j] over GF(256)."""
    out = bytes(len(symbols[0]))
    for c, sym in zip(coefficients, symbols):
        if c:
            out = _add_rows(out, _mul_row(c, sym))
    return out


def encode(generation: Generation, rng: random.Random) -> CodedPacket:
    """Fresh packet with coefficients drawn uniformly from GF(256)^k."""
    coeffs = bytes(rng.randrange(256) for _ in range(generation.k))
    return encode_with_coefficients(generation, coeffs)


def encode_with_coefficients(generation: Generation, coefficients: bytes) -> CodedPacket:
    """Deterministic encode for a caller-chosen coefficient vector."""
    if len(coefficients) != generation.k:
        raise ValueError("coefficient vector must have length k")
    payload = combine_symbols(coefficients, generation.source_symbols)
    return CodedPacket(generation.generation_id, bytes(coefficients), payload)


def recode(held_packets: Sequence[CodedPacket], rng: random.Random) -> CodedPacket:
    """Random GF(256) combination of held packets; stays in their span."""
    if not held_packets:
        raise ValueError("recode requires at least one held packet")
    gen_ids = {p.generation_id for p in held_packets}
    if len(gen_ids) != 1:
        raise ValueError("recode inputs must share one generation")
    scalars = [rng.randrange(256) for _ in held_packets]
    k = len(held_packets[0].coefficients)
    coeffs = bytes(k)
    payload = bytes(len(held_packets[0].payload))
    for s, pkt in zip(scalars, held_packets):
        if s:
            coeffs = _add_rows(coeffs, _mul_row(s, pkt.coefficients))
            payload = _add_rows(payload, _mul_row(s, pkt.payload))
    return CodedPacket(held_packets[0].generation_id, coeffs, payload)


class DecoderState:
    """Incremental Gaussian elimination with paired payload rows.

    Rows are kept in reduced form with one pivot column per row; rank is
    the number of stored rows. Single-owner (one receiver), not shared.
    """

    def __init__(self, generation_id: str, k: int, symbol_size: int):
        self.generation_id = generation_id
        self.k = k
        self.symbol_size = symbol_size
        self._pivot_rows: dict[int, tuple[bytes, bytes]] = {}  # pivot col -> (coeffs, payload)

    @property
    def rank(self) -> int:
        return len(self._pivot_rows)

    @property
    def complete(self) -> bool:
        return self.rank == self.k

    def accept(self, packet: CodedPacket) -> bool:
        """Reduce the packet against stored rows; True iff it raised rank."""
        if packet.generation_id != self.generation_id:
            raise ValueError(
                f"packet generation {packet.generation_id!r} != {self.generation_id!r}"
            )
        coeffs = packet.coefficients
        payload = packet.payload
        for col, (prow, ppay) in self._pivot_rows.items():
            c = coeffs[col]
            if c:
                coeffs = _add_rows(coeffs, _mul_row(c, prow))
                payload = _add_rows(payload, _mul_row(c, ppay))
        pivot = next((i for i, v in enumerate(coeffs) if v), None)
        if pivot is None:
            return False
        inv = gf256_inv(coeffs[pivot])
        coeffs = _mul_row(inv, coeffs)
        payload = _mul_row(inv, payload)
        # back-eliminate the new pivot from existing rows to keep reduced form
        for col, (prow, ppay) in list(self._pivot_rows.items()):
            c = prow[pivot]
            if c:
                self._pivot_rows[col] = (
                    _add_rows(prow, _mul_row(c, coeffs)),
                    _add_rows(ppay, _mul_row(c, payload)),
                )
        self._pivot_rows[pivot] = (coeffs, payload)
        return True

    def decoded_symbols(self) -> list[bytes]:
        """The k source symbols; only valid once rank == k."""
        if not self.complete:
            raise ValueError(f"decoder rank {self.rank} < k={self.k}")
        return [self._pivot_rows[i][1] for i in range(self.k)]

    def decoded_message(self, original_length: int) -> bytes:
        return b"".join(self.decoded_symbols())[:original_length]


def decoder_accept(state: DecoderState, packet: CodedPacket) -> tuple[DecoderState, bool]:
    """Functional wrapper over DecoderState.accept (state is mutated)."""
    return state, state.accept(packet)


def rank_of(vectors: Sequence[bytes]) -> int:
    """From-scratch GF(256) rank (plain forward elimination)."""
    rows = [bytearray(v) for v in vectors]
    n_cols = len(rows[0]) if rows else 0
    rank = 0
    for col in range(n_cols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = gf256_inv(rows[rank][col])
        rows[rank] = bytearray(_mul_row(inv, bytes(rows[rank])))
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                rows[r] = bytearray(
                    _add_rows(bytes(rows[r]), _mul_row(rows[r][col], bytes(rows[rank])))
                )
        rank += 1
        if rank == len(rows):
            break
    return rank
