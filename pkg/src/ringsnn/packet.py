"""64-bit synapse packet codec.

Wire layout (little-endian when serialized)::

    [63:32] weight, IEEE-754 single precision bit pattern
    [31:30] sync class
    [29:8]  destination neuron ID (sync tokens carry the origin core ID here)
    [7:0]   delay in timesteps
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

DST_BITS = 22
DELAY_BITS = 8
DST_MASK = (1 << DST_BITS) - 1
DELAY_MASK = (1 << DELAY_BITS) - 1
WORD_MASK = (1 << 64) - 1

SYNC_SHIFT = 30
DST_SHIFT = 8
WEIGHT_SHIFT = 32

BURST_SIZE = 4

_F32 = struct.Struct("<f")
_U32 = struct.Struct("<I")


class SyncClass(IntEnum):
    DATA = 0b00
    LOCAL_SYNC = 0b01
    GLOBAL_SYNC = 0b10
    RESERVED = 0b11


class PacketError(ValueError):
    pass


def float_to_bits(x: float) -> int:
    return _U32.unpack(_F32.pack(x))[0]


def bits_to_float(bits: int) -> float:
    return _F32.unpack(_U32.pack(bits))[0]


@dataclass(frozen=True)
class SynapsePacket:
    """One wire packet.

    The weight is held as its raw 32-bit pattern so that NaN payloads survive
    a round trip; use :meth:`data` to build a packet from a float weight.
    """

    weight_bits: int
    sync: SyncClass
    dst: int
    delay: int

    def __post_init__(self):
        if not 0 <= self.weight_bits <= 0xFFFFFFFF:
            raise PacketError(f"weight bit pattern out of range: {self.weight_bits:#x}")
        if not 0 <= self.dst <= DST_MASK:
            raise PacketError(f"dst {self.dst} does not fit in {DST_BITS} bits")
        if not 0 <= self.delay <= DELAY_MASK:
            raise PacketError(f"delay {self.delay} does not fit in {DELAY_BITS} bits")
        object.__setattr__(self, "sync", SyncClass(self.sync))

    @classmethod
    def data(cls, weight: float, dst: int, delay: int) -> "SynapsePacket":
        return cls(float_to_bits(weight), SyncClass.DATA, dst, delay)

    @classmethod
    def token(cls, sync: SyncClass, origin_core: int) -> "SynapsePacket":
        return cls(0, sync, origin_core, 0)

    @classmethod
    def filler(cls) -> "SynapsePacket":
        return cls(0, SyncClass.RESERVED, 0, 0)

    @property
    def weight(self) -> float:
        return bits_to_float(self.weight_bits)

    @property
    def origin(self) -> int:
        # only meaningful for sync tokens
        return self.dst


def encode(p: SynapsePacket) -> int:
    return (
        (p.weight_bits << WEIGHT_SHIFT)
        | (int(p.sync) << SYNC_SHIFT)
        | (p.dst << DST_SHIFT)
        | p.delay
    )


def decode(word: int) -> SynapsePacket:
    word &= WORD_MASK
    return SynapsePacket(
        weight_bits=word >> WEIGHT_SHIFT,
        sync=SyncClass((word >> SYNC_SHIFT) & 0b11),
        dst=(word >> DST_SHIFT) & DST_MASK,
        delay=word & DELAY_MASK,
    )


def encode_words(weights, dst, delay, sync: int | np.ndarray = SyncClass.DATA) -> np.ndarray:
    """Vectorized :func:`encode` over arrays; returns ``uint64``."""
    w = np.ascontiguousarray(weights, dtype=np.float32).view(np.uint32).astype(np.uint64)
    dst = np.asarray(dst, dtype=np.uint64)
    delay = np.asarray(delay, dtype=np.uint64)
    if dst.size and int(dst.max()) > DST_MASK:
        raise PacketError(f"dst {int(dst.max())} does not fit in {DST_BITS} bits")
    if delay.size and int(delay.max()) > DELAY_MASK:
        raise PacketError(f"delay {int(delay.max())} does not fit in {DELAY_BITS} bits")
    s = np.asarray(sync, dtype=np.uint64) & np.uint64(0b11)
    return (
        (w << np.uint64(WEIGHT_SHIFT))
        | (s << np.uint64(SYNC_SHIFT))
        | (dst << np.uint64(DST_SHIFT))
        | delay
    )


def decode_words(words) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`decode`: returns ``(weight f32, sync, dst, delay)``."""
    words = np.asarray(words, dtype=np.uint64)
    weight = (words >> np.uint64(WEIGHT_SHIFT)).astype(np.uint32).view(np.float32)
    sync = ((words >> np.uint64(SYNC_SHIFT)) & np.uint64(0b11)).astype(np.uint8)
    dst = ((words >> np.uint64(DST_SHIFT)) & np.uint64(DST_MASK)).astype(np.uint32)
    delay = (words & np.uint64(DELAY_MASK)).astype(np.uint8)
    return weight, sync, dst, delay


FILLER_WORD = encode(SynapsePacket.filler())


def pack_burst(ps: Sequence[SynapsePacket]) -> int:
    """Pack four packets into one 256-bit block, packet 0 in the low word."""
    if len(ps) != BURST_SIZE:
        raise PacketError(f"a burst holds exactly {BURST_SIZE} packets, got {len(ps)}")
    block = 0
    for k, p in enumerate(ps):
        block |= encode(p) << (64 * k)
    return block


def unpack_burst(block: int) -> list[SynapsePacket]:
    return [decode((block >> (64 * k)) & WORD_MASK) for k in range(BURST_SIZE)]


def pack_bursts(ps: Iterable[SynapsePacket]) -> list[int]:
    ps = list(ps)
    pad = -len(ps) % BURST_SIZE
    ps.extend(SynapsePacket.filler() for _ in range(pad))
    return [pack_burst(ps[i:i + BURST_SIZE]) for i in range(0, len(ps), BURST_SIZE)]


def unpack_bursts(blocks: Iterable[int]) -> list[SynapsePacket]:
    """Inverse of :func:`pack_bursts`; filler packets are dropped."""
    out = []
    for block in blocks:
        out.extend(p for p in unpack_burst(block) if p.sync != SyncClass.RESERVED)
    return out


def burst_to_bytes(block: int) -> bytes:
    return block.to_bytes(8 * BURST_SIZE, "little")


def burst_from_bytes(raw: bytes) -> int:
    if len(raw) != 8 * BURST_SIZE:
        raise PacketError(f"expected {8 * BURST_SIZE} bytes, got {len(raw)}")
    return int.from_bytes(raw, "little")
