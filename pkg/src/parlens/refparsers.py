"""Hand-written reference parsers for the Babel-mini TLV format.

Usage: ``python -m parlens.refparsers VARIANT [FILE]``.  The packet is read
from FILE or from stdin.  Exit status 0 accepts, 1 rejects.

Variants:
  correct          enforces every rule of the Babel-mini format
  omitting         never checks that the router id is neither all zeros nor all ones
  reserved-lenient ignores the Reserved field on receipt
  crashing         correct, but dies with SIGSEGV when bytes trail the TLV
  accept-all       accepts anything

These do not use the format package on purpose: they stand in for
independent implementations under test.
"""

from __future__ import annotations

import os
import signal
import sys

VARIANTS = ("correct", "omitting", "reserved-lenient", "crashing", "accept-all")

PAD1, ROUTER_ID = 0, 6
ROUTER_ID_SIZE = 12  # Type, Length, Reserved (2), Router-Id (8)


def parse(data: bytes, variant: str = "correct") -> bool:
    if variant == "accept-all":
        return True
    if not data:
        return False
    kind = data[0]
    if kind == PAD1:
        expected = 1
    elif kind == ROUTER_ID:
        expected = ROUTER_ID_SIZE
    else:
        return False
    if len(data) > expected and variant == "crashing":
        os.kill(os.getpid(), signal.SIGSEGV)
    if len(data) != expected:
        return False
    if kind == PAD1:
        return True
    length = data[1]
    reserved = int.from_bytes(data[2:4], "big")
    router_id = int.from_bytes(data[4:12], "big")
    if length < 10:
        return False
    if reserved != 0 and variant != "reserved-lenient":
        return False
    if variant != "omitting" and router_id in (0, (1 << 64) - 1):
        return False
    return True


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in VARIANTS:
        print(f"usage: python -m parlens.refparsers {{{'|'.join(VARIANTS)}}} [FILE]", file=sys.stderr)
        return 2
    if len(argv) > 1:
        with open(argv[1], "rb") as fh:
            data = fh.read()
    else:
        data = sys.stdin.buffer.read()
    ok = parse(data, argv[0])
    print("ACCEPT" if ok else "REJECT")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
