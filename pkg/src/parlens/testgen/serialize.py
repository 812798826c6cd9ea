"""Wire encoding of assignments along a path."""

from __future__ import annotations

from ..graph import GraphPath


def serialize_packet(path: GraphPath, assignment: dict[str, int]) -> bytes:
    """Concatenate the path's fields big-endian, BIT fields packed MSB-first."""
    acc, nbits = 0, 0
    for node in path.nodes:
        value = assignment[node.name]
        bits = node.type.bits
        assert 0 <= value < (1 << bits), f"{node.name}={value} does not fit in {bits} bits"
        acc = (acc << bits) | value
        nbits += bits
    assert nbits % 8 == 0, "path layout is not byte aligned"
    return acc.to_bytes(nbits // 8, "big")


def decode_path(path: GraphPath, data: bytes) -> dict[str, int]:
    """Inverse of :func:`serialize_packet` for a packet of the path's exact length."""
    total = len(data) * 8
    if total != path.bit_length:
        raise ValueError(f"packet has {total} bits, path needs {path.bit_length}")
    big = int.from_bytes(data, "big")
    out, pos = {}, 0
    for node in path.nodes:
        pos += node.type.bits
        out[node.name] = (big >> (total - pos)) & ((1 << node.type.bits) - 1)
    return out


def field_offsets(path: GraphPath) -> list[tuple[str, int, int]]:
    """(name, start bit, end bit) for every field of the path."""
    out, pos = [], 0
    for node in path.nodes:
        out.append((node.name, pos, pos + node.type.bits))
        pos += node.type.bits
    return out
