"""Reference SAS Transport V5 encoder for test fixtures.

Written directly from the published record layout, independently of the
package parser: 80-byte records, big-endian NAMESTR fields, IBM hex floats.
The parser under test must round-trip everything this writer emits.
"""

from __future__ import annotations

import math
import struct

RECORD = 80
STAMP = b"01JAN20:00:00:00"


def double_to_ibm(x: float) -> bytes:
    """IEEE binary64 -> 8-byte IBM hexadecimal float (exact for values whose
    significand fits, which covers every fixture here)."""
    if x == 0.0:
        return b"\x00" * 8
    sign = 0x80 if x < 0 else 0x00
    m, e = math.frexp(abs(x))  # abs(x) = m * 2**e, 0.5 <= m < 1
    mant = int(m * (1 << 53))  # exact 53-bit integer
    k = e - 53                 # abs(x) = mant * 2**k
    shift = (k + 56) % 4
    fraction = mant << shift
    exponent = (k + 56 - shift) // 4 + 64
    if not 0 <= exponent <= 127:
        raise OverflowError(f"{x!r} outside IBM float range")
    return bytes([sign | exponent]) + fraction.to_bytes(7, "big")


def _pad80(chunk: bytes, fill: bytes = b" ") -> bytes:
    need = (-len(chunk)) % RECORD
    return chunk + fill * need


def _namestr(number: int, name: str, is_numeric: bool, length: int, position: int) -> bytes:
    return struct.pack(
        ">hhhh8s40s8shhh2s8shhl52s",
        1 if is_numeric else 2,
        0,
        length,
        number,
        name.encode("ascii").ljust(8),
        f"label for {name}".encode("ascii").ljust(40),
        b" " * 8,
        0,
        0,
        0,
        b"  ",
        b" " * 8,
        0,
        0,
        position,
        b" " * 52,
    )


def build_xpt(
    columns: list[tuple[str, str, list]],
    member: str = "DATA",
    char_lengths: dict[str, int] | None = None,
) -> bytes:
    """Encode columns [(name, "num"|"char", values)] as a V5 transport file.

    Numeric missing values are passed as None; char cells are blank-padded.
    """
    char_lengths = char_lengths or {}
    out = bytearray()
    out += b"HEADER RECORD*******LIBRARY HEADER RECORD!!!!!!!" + b"0" * 30 + b"  "
    out += _pad80(b"SAS     SAS     SASLIB  9.4     Linux   " + b" " * 24 + STAMP)
    out += _pad80(STAMP)
    out += (
        b"HEADER RECORD*******MEMBER  HEADER RECORD!!!!!!!"
        + b"000000000000000001600000000140  "
    )
    out += b"HEADER RECORD*******DSCRPTR HEADER RECORD!!!!!!!" + b"0" * 30 + b"  "
    out += _pad80(
        b"SAS     "
        + member.encode("ascii").ljust(8)
        + b"SASDATA 9.4     Linux   "
        + b" " * 24
        + STAMP
    )
    out += _pad80(STAMP + b" " * 16 + b" " * 40 + b" " * 8)
    out += (
        b"HEADER RECORD*******NAMESTR HEADER RECORD!!!!!!!000000"
        + b"%04d" % len(columns)
        + b"0" * 20
        + b"  "
    )

    namestrs = bytearray()
    position = 0
    lengths = []
    for i, (name, kind, _) in enumerate(columns, 1):
        length = 8 if kind == "num" else char_lengths.get(name, 8)
        namestrs += _namestr(i, name, kind == "num", length, position)
        lengths.append(length)
        position += length
    out += _pad80(bytes(namestrs))

    out += b"HEADER RECORD*******OBS     HEADER RECORD!!!!!!!" + b"0" * 30 + b"  "
    n_rows = len(columns[0][2]) if columns else 0
    body = bytearray()
    for r in range(n_rows):
        for (name, kind, values), length in zip(columns, lengths):
            v = values[r]
            if kind == "num":
                body += b".\x00\x00\x00\x00\x00\x00\x00" if v is None else double_to_ibm(v)
            else:
                body += ("" if v is None else str(v)).encode("ascii").ljust(length)
    out += _pad80(bytes(body))
    return bytes(out)
