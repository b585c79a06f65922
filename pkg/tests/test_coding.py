"""GF(256) arithmetic and network-coding tests against naive oracles."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relayrace.coding import (
    CodedPacket,
    DecoderState,
    Generation,
    combine_symbols,
    decoder_accept,
    encode,
    encode_with_coefficients,
    gf256_inv,
    gf256_mul,
    rank_of,
    recode,
)


def oracle_mul(a: int, b: int) -> int:
    """Independent bitwise multiply modulo the AES polynomial."""
    product = 0
    for _ in range(8):
        if b & 1:
            product ^= a
        carry = a & 0x80
        a = (a << 1) & 0xFF
        if carry:
            a ^= 0x1B
        b >>= 1
    return product


class ScriptedRng:
    """Stand-in RNG yielding a fixed coefficient script."""

    def __init__(self, values):
        self.values = list(values)

    def randrange(self, _n):
        return self.values.pop(0)


def test_table_multiply_matches_bitwise_oracle_exhaustively():
    for a in range(0, 256, 7):
        for b in range(256):
            assert gf256_mul(a, b) == oracle_mul(a, b)


def test_multiplicative_identity():
    assert all(gf256_mul(a, 1) == a for a in range(256))


def test_every_nonzero_element_has_an_inverse():
    for a in range(1, 256):
        assert gf256_mul(a, gf256_inv(a)) == 1


def test_known_aes_inverse_pair():
    assert gf256_mul(0x53, 0xCA) == 0x01


def test_inverse_of_zero_raises():
    with pytest.raises(ZeroDivisionError):
        gf256_inv(0)


@given(a=st.integers(0, 255), b=st.integers(0, 255), c=st.integers(0, 255))
@settings(max_examples=60, deadline=None)
def test_field_algebra(a, b, c):
    assert gf256_mul(a, b) == gf256_mul(b, a)
    assert gf256_mul(a, gf256_mul(b, c)) == gf256_mul(gf256_mul(a, b), c)
    assert gf256_mul(a, b ^ c) == gf256_mul(a, b) ^ gf256_mul(a, c)


def make_generation(k=4, symbol_size=8, seed=1):
    rng = random.Random(seed)
    symbols = tuple(rng.randbytes(symbol_size) for _ in range(k))
    return Generation("g", k, symbol_size, symbols)


class TestEncode:
    def test_unit_vector_reproduces_source_symbol(self):
        gen = make_generation()
        for j in range(gen.k):
            coeffs = bytes(1 if i == j else 0 for i in range(gen.k))
            packet = encode_with_coefficients(gen, coeffs)
            assert packet.payload == gen.source_symbols[j]

    def test_all_zero_coefficients_give_zero_payload(self):
        gen = make_generation()
        packet = encode_with_coefficients(gen, bytes(gen.k))
        assert packet.payload == bytes(gen.symbol_size)

    def test_ones_pair_is_xor_of_symbols(self):
        gen = make_generation(k=2)
        packet = encode_with_coefficients(gen, b"\x01\x01")
        expected = bytes(x ^ y for x, y in zip(*gen.source_symbols))
        assert packet.payload == expected

    def test_random_encode_payload_matches_combination(self):
        gen = make_generation(k=6, symbol_size=16)
        rng = random.Random(2)
        for _ in range(10):
            packet = encode(gen, rng)
            assert packet.payload == combine_symbols(packet.coefficients, gen.source_symbols)


class TestRecode:
    def test_single_packet_scalar_one_is_identity(self):
        gen = make_generation()
        packet = encode(gen, random.Random(3))
        out = recode([packet], ScriptedRng([1]))
        assert (out.coefficients, out.payload) == (packet.coefficients, packet.payload)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            recode([], random.Random(0))

    def test_output_stays_in_span_of_inputs(self):
        gen = make_generation(k=6, symbol_size=4)
        rng = random.Random(4)
        held = [encode(gen, rng) for _ in range(3)]
        base_rank = rank_of([p.coefficients for p in held])
        for _ in range(10):
            out = recode(held, rng)
            assert rank_of([p.coefficients for p in held] + [out.coefficients]) == base_rank
            # payload linearity survives recoding
            assert out.payload == combine_symbols(out.coefficients, gen.source_symbols)

    def test_recoding_cannot_exceed_the_recoders_span(self):
        gen = make_generation(k=5)
        rng = random.Random(5)
        held = [encode(gen, rng) for _ in range(2)]  # rank at most 2
        decoder = DecoderState("g", gen.k, gen.symbol_size)
        for _ in range(20):
            decoder.accept(recode(held, rng))
        assert decoder.rank <= rank_of([p.coefficients for p in held])


class TestDecoder:
    def test_unit_vectors_decode_to_source(self):
        gen = make_generation(k=5, symbol_size=12)
        decoder = DecoderState("g", gen.k, gen.symbol_size)
        for j in range(gen.k):
            coeffs = bytes(1 if i == j else 0 for i in range(gen.k))
            state, innovative = decoder_accept(decoder, encode_with_coefficients(gen, coeffs))
            assert innovative
        assert decoder.decoded_symbols() == list(gen.source_symbols)

    def test_duplicate_packet_is_not_innovative(self):
        gen = make_generation()
        decoder = DecoderState("g", gen.k, gen.symbol_size)
        packet = encode(gen, random.Random(6))
        assert decoder.accept(packet)
        assert not decoder.accept(packet)
        assert decoder.rank == 1

    def test_generation_mismatch_rejected(self):
        gen = make_generation()
        decoder = DecoderState("other", gen.k, gen.symbol_size)
        with pytest.raises(ValueError):
            decoder.accept(encode(gen, random.Random(0)))

    def test_innovative_flags_match_prefix_rank_oracle(self):
        gen = make_generation(k=4)
        rng = random.Random(7)
        packets = [encode(gen, rng) for _ in range(6)]
        decoder = DecoderState("g", gen.k, gen.symbol_size)
        seen = []
        for packet in packets:
            before = rank_of(seen) if seen else 0
            seen.append(packet.coefficients)
            expected = rank_of(seen) > before
            assert decoder.accept(packet) == expected
            assert decoder.rank == rank_of(seen)

    def test_decode_exact_for_larger_generations(self):
        for k in (2, 8, 32):
            gen = make_generation(k=k, symbol_size=10, seed=k)
            rng = random.Random(k)
            decoder = DecoderState("g", gen.k, gen.symbol_size)
            attempts = 0
            while not decoder.complete:
                decoder.accept(encode(gen, rng))
                attempts += 1
                assert attempts < 10 * k
            assert decoder.decoded_symbols() == list(gen.source_symbols)

    def test_decode_before_completion_raises(self):
        gen = make_generation(k=3)
        decoder = DecoderState("g", gen.k, gen.symbol_size)
        with pytest.raises(ValueError):
            decoder.decoded_symbols()


def test_full_rank_probability_close_to_analytic_value():
    # quick version; the acceptance suite runs the 10,000-trial check
    k, trials = 4, 2000
    expected = 1.0
    for i in range(1, k + 1):
        expected *= 1 - 256.0 ** (-i)
    rng = random.Random(8)
    hits = 0
    for _ in range(trials):
        vectors = [bytes(rng.randrange(256) for _ in range(k)) for _ in range(k)]
        hits += rank_of(vectors) == k
    assert abs(hits / trials - expected) < 0.02


class TestGeneration:
    def test_message_padding_round_trip(self):
        message = b"0123456789abcdef-tail"
        gen = Generation.from_message("g", message, k=4)
        assert gen.k == 4
        assert b"".join(gen.source_symbols)[: len(message)] == message

    def test_generation_size_bounds(self):
        with pytest.raises(ValueError):
            Generation("g", 0, 1, ())
        with pytest.raises(ValueError):
            Generation("g", 256, 1, tuple(bytes(1) for _ in range(256)))

    def test_symbol_size_enforced(self):
        with pytest.raises(ValueError):
            Generation("g", 2, 4, (bytes(4), bytes(3)))

    def test_last_hop_stamp(self):
        gen = make_generation()
        packet = encode(gen, random.Random(9)).with_last_hop("n7")
        assert packet.last_hop == "n7"
        assert isinstance(packet, CodedPacket)
