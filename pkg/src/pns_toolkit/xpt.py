"""SAS Transport (XPT) V5 reader.

The format is a stream of 80-byte records: library header, member header,
variable descriptors (NAMESTR entries), then packed observation records.
Numeric cells are IBM hexadecimal floating point, converted exactly to
binary64 whenever the value has at most 52 significand bits. V8/V9
transport files are rejected with UnsupportedVersion.

Only the first member of a multi-member library is returned; NHANES
releases ship one member per file.
"""

from __future__ import annotations

import math
import struct

from .errors import ToolkitError

RECORD = 80

_LIBRARY_MAGIC = b"HEADER RECORD*******LIBRARY HEADER RECORD!!!!!!!"
_MEMBER_MAGIC = b"HEADER RECORD*******MEMBER  HEADER RECORD!!!!!!!"
_DSCRPTR_MAGIC = b"HEADER RECORD*******DSCRPTR HEADER RECORD!!!!!!!"
_NAMESTR_MAGIC = b"HEADER RECORD*******NAMESTR HEADER RECORD!!!!!!!"
_OBS_MAGIC = b"HEADER RECORD*******OBS     HEADER RECORD!!!!!!!"
_V8_MARKERS = (b"LIBV8", b"MEMBV8", b"DSCPTV8", b"NAMSTV8", b"OBSV8")

_NAMESTR_FMT = ">hhhh8s40s8shhh2s8shhl52s"


class MalformedHeader(ToolkitError):
    """A header record does not match the transport layout."""


class UnsupportedVersion(ToolkitError):
    """The file uses the V8/V9 transport extensions, which are not handled."""


class TruncatedRecord(ToolkitError):
    """The stream ended inside a record or section."""


def ibm_to_double(raw: bytes) -> float:
    """Convert a (possibly length-truncated) IBM hex float to binary64.

    Exact whenever the value fits in 52 significand bits; correctly rounded
    otherwise. Layout: 1 sign bit, 7-bit base-16 exponent biased by 64,
    56-bit fraction with the binary point on the left.
    """
    if not 2 <= len(raw) <= 8:
        raise ValueError(f"IBM float must be 2..8 bytes, got {len(raw)}")
    raw = raw.ljust(8, b"\x00")
    mantissa = int.from_bytes(raw[1:], "big")
    if mantissa == 0:
        return 0.0
    sign = raw[0] >> 7
    exponent = raw[0] & 0x7F
    value = math.ldexp(mantissa, 4 * (exponent - 64) - 56)
    return -value if sign else value


def _is_missing_numeric(raw: bytes) -> bool:
    # '.' and the special missings .A-.Z and ._ : tag byte then zeros
    tag = raw[0]
    if tag == 0x2E or tag == 0x5F or 0x41 <= tag <= 0x5A:
        return all(b == 0 for b in raw[1:])
    return False


class XptVariable:
    """One NAMESTR entry: name, label, numeric flag, field position/length."""

    __slots__ = ("name", "label", "is_numeric", "position", "length", "number")

    def __init__(self, name, label, is_numeric, position, length, number):
        self.name = name
        self.label = label
        self.is_numeric = is_numeric
        self.position = position
        self.length = length
        self.number = number


class XptMember:
    """Parsed member: dataset name, variables, and raw row cells."""

    __slots__ = ("name", "variables", "rows")

    def __init__(self, name, variables, rows):
        self.name = name
        self.variables = variables
        self.rows = rows


def _check_version(record: bytes, offset: int) -> None:
    for marker in _V8_MARKERS:
        if marker in record[:48]:
            raise UnsupportedVersion(
                f"V8/V9 transport record at byte {offset}; only V5 is supported"
            )


def _take_record(data: bytes, offset: int, what: str) -> bytes:
    if offset + RECORD > len(data):
        raise TruncatedRecord(f"stream ends inside {what} at byte {offset}")
    return data[offset : offset + RECORD]


def _expect_magic(data: bytes, offset: int, magic: bytes, what: str) -> bytes:
    record = _take_record(data, offset, what)
    if not record.startswith(magic):
        _check_version(record, offset)
        raise MalformedHeader(f"bad {what} record at byte {offset}")
    return record


def parse_member(data: bytes) -> XptMember:
    """Parse the first member of a V5 transport stream."""
    if len(data) < RECORD:
        raise TruncatedRecord("stream ends inside library header at byte 0")
    offset = 0
    _expect_magic(data, offset, _LIBRARY_MAGIC, "library header")
    offset += RECORD
    _take_record(data, offset, "first real header")
    offset += RECORD
    _take_record(data, offset, "second real header")
    offset += RECORD

    member = _expect_magic(data, offset, _MEMBER_MAGIC, "member header")
    tail = member[48:].rstrip()
    try:
        namestr_len = int(tail[-4:])
    except ValueError:
        raise MalformedHeader(f"member header at byte {offset} lacks a descriptor size")
    if namestr_len not in (136, 140):
        raise MalformedHeader(
            f"member header at byte {offset}: descriptor size {namestr_len} not in (136, 140)"
        )
    offset += RECORD
    _expect_magic(data, offset, _DSCRPTR_MAGIC, "descriptor header")
    offset += RECORD
    first_desc = _take_record(data, offset, "member descriptor")
    member_name = first_desc[8:16].decode("ascii", "replace").strip()
    offset += RECORD
    _take_record(data, offset, "member descriptor date record")
    offset += RECORD

    namestr_hdr = _expect_magic(data, offset, _NAMESTR_MAGIC, "namestr header")
    try:
        n_vars = int(namestr_hdr[54:58])
    except ValueError:
        raise MalformedHeader(f"namestr header at byte {offset} lacks a variable count")
    offset += RECORD

    section = n_vars * namestr_len
    padded = -(-section // RECORD) * RECORD
    if offset + padded > len(data):
        raise TruncatedRecord(f"stream ends inside namestr section at byte {offset}")
    variables = []
    for i in range(n_vars):
        entry = data[offset + i * namestr_len : offset + i * namestr_len + namestr_len]
        fields = struct.unpack(_NAMESTR_FMT, entry[:140].ljust(140, b"\x00"))
        ntype, nlng, varnum, nname, nlabel = (
            fields[0], fields[2], fields[3], fields[4], fields[5],
        )
        npos = fields[14]
        variables.append(
            XptVariable(
                name=nname.decode("ascii", "replace").strip(),
                label=nlabel.decode("ascii", "replace").strip(),
                is_numeric=(ntype == 1),
                position=npos,
                length=nlng,
                number=varnum,
            )
        )
    offset += padded

    _expect_magic(data, offset, _OBS_MAGIC, "observation header")
    offset += RECORD

    row_len = max((v.position + v.length for v in variables), default=0)
    rows = []
    if row_len > 0:
        data_end = len(data.rstrip(b" "))
        while offset + row_len <= len(data):
            chunk = data[offset : offset + row_len]
            if offset >= data_end:
                break  # trailing blank padding (an all-blank final row is
                # indistinguishable from padding and treated as padding)
            if offset % RECORD == 0 and chunk.startswith(b"HEADER RECORD*******"):
                break  # next member; only the first is returned
            rows.append(_decode_row(chunk, variables, offset))
            offset += row_len
        leftover = data[offset:]
        if leftover.strip(b" \x00") != b"":
            if leftover.startswith(b"HEADER RECORD*******"):
                pass  # next member
            else:
                raise TruncatedRecord(
                    f"stream ends inside an observation record at byte {offset}"
                )
    return XptMember(member_name, variables, rows)


def _decode_row(chunk: bytes, variables, offset: int):
    cells = []
    for v in variables:
        raw = chunk[v.position : v.position + v.length]
        if v.is_numeric:
            if _is_missing_numeric(raw):
                cells.append(None)
            else:
                cells.append(ibm_to_double(raw))
        else:
            text = raw.decode("latin-1").strip()
            cells.append(text if text else None)
    return tuple(cells)
