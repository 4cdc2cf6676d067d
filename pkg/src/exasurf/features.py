"""Per-vertex 16-bit feature words: 7-bit shape, 3-bit partition, 6-bit ao."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHAPE_SHIFT = 9
PART_SHIFT = 6
AO_MASK = 0x3F
PART_MASK = 0x7
SHAPE_MASK = 0x7F


@dataclass
class VertexAttributes:
    shape_code: np.ndarray      # uint8, 0..126
    partition: np.ndarray       # uint8, 0..7
    ao: np.ndarray              # uint8, 0 fully occluded .. 63 fully open

    def __len__(self):
        return len(self.shape_code)


def pack_features(attrs: VertexAttributes) -> bytes:
    shape = np.asarray(attrs.shape_code, dtype=np.uint32)
    part = np.asarray(attrs.partition, dtype=np.uint32)
    ao = np.asarray(attrs.ao, dtype=np.uint32)
    if shape.max(initial=0) > SHAPE_MASK:
        raise ValueError("shape code exceeds 7 bits")
    if part.max(initial=0) > PART_MASK:
        raise ValueError("partition exceeds 3 bits")
    if ao.max(initial=0) > AO_MASK:
        raise ValueError("ao exceeds 6 bits")
    word = (shape << SHAPE_SHIFT) | (part << PART_SHIFT) | ao
    return word.astype("<u2").tobytes()


def unpack_features(section: bytes) -> VertexAttributes:
    word = np.frombuffer(section, dtype="<u2").astype(np.uint32)
    return VertexAttributes(
        shape_code=((word >> SHAPE_SHIFT) & SHAPE_MASK).astype(np.uint8),
        partition=((word >> PART_SHIFT) & PART_MASK).astype(np.uint8),
        ao=(word & AO_MASK).astype(np.uint8))


def pack_ao(ao6: np.ndarray) -> bytes:
    """Standalone 6-bit occlusion stream (AOCC section), MSB-first."""
    from .bits import pack_varbits

    return pack_varbits(np.asarray(ao6, dtype=np.uint64),
                        np.full(len(ao6), 6, dtype=np.int64)).tobytes()


def unpack_ao(section: bytes, count: int) -> np.ndarray:
    from .bits import unpack_fixed

    return unpack_fixed(np.frombuffer(section, dtype=np.uint8), count, 6).astype(np.uint8)
