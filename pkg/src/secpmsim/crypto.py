"""Counter-mode line encryption via one-time pads.

A 64-byte pad is derived from (key, line address, 71-bit counter) and XORed
with the line content.  The block function is an opaque fixed-latency
pseudorandom primitive; only determinism and pad non-reuse matter here, so
the default is AES-128-ECB in a two-stage cascade:

    t      = E_K(addr64 || ctr_low64)
    pad_i  = E_K(t XOR (ctr_high64 || i)),   i = 0..3

The address/counter packing is a convention of this simulator, not a
hardware contract.
"""

from __future__ import annotations

import struct
from typing import Callable

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

LINE = 64
COUNTER_BITS = 71
_LOW64 = (1 << 64) - 1

BlockFn = Callable[[bytes], bytes]


def aes_block_fn(key_bytes: bytes) -> BlockFn:
    """Block permutation keyed by a 128-bit secret.

    Accepts any multiple of 16 bytes and permutes each 16-byte block
    independently (ECB), so a 64-byte pad costs one call.
    """
    if len(key_bytes) != 16:
        raise ValueError("key must be 16 bytes")
    enc = Cipher(algorithms.AES(key_bytes), modes.ECB()).encryptor()
    return lambda block: enc.update(block)


class OtpEngine:
    """Pad generator for one encryption key, fixed for a simulation run."""

    def __init__(self, key_bytes: bytes, block_fn: BlockFn | None = None):
        self._block = block_fn if block_fn is not None else aes_block_fn(key_bytes)

    def generate(self, line_address: int, counter_value: int) -> bytes:
        """Deterministic 64-byte pad for (address, major||minor counter)."""
        if counter_value < 0 or counter_value >= (1 << COUNTER_BITS):
            raise ValueError("counter out of 71-bit range")
        t = int.from_bytes(
            self._block(struct.pack(">QQ", line_address, counter_value & _LOW64)),
            "big",
        )
        base = t ^ ((counter_value >> 64) << 64)
        msg = (
            (base << 384) | ((base ^ 1) << 256) | ((base ^ 2) << 128) | (base ^ 3)
        ).to_bytes(64, "big")
        return self._block(msg)


def xor_lines(a: bytes, b: bytes) -> bytes:
    if len(a) != LINE or len(b) != LINE:
        raise ValueError("lines must be 64 bytes")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(LINE, "big")


def encrypt_line(plaintext: bytes, pad: bytes) -> bytes:
    return xor_lines(plaintext, pad)


def decrypt_line(ciphertext: bytes, pad: bytes) -> bytes:
    return xor_lines(ciphertext, pad)
