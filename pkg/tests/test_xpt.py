import math
import struct

import pytest

from pns_toolkit.xpt import (
    MalformedHeader,
    TruncatedRecord,
    UnsupportedVersion,
    ibm_to_double,
    parse_member,
)
from pns_toolkit.dataset import parse_xpt

from xpt_writer import build_xpt, double_to_ibm


class TestIbmFloat:
    def test_documented_test_vectors(self):
        # from the transport-format description
        assert ibm_to_double(bytes.fromhex("4110000000000000")) == 1.0
        assert ibm_to_double(bytes.fromhex("c110000000000000")) == -1.0
        assert ibm_to_double(bytes.fromhex("4120000000000000")) == 2.0
        assert ibm_to_double(b"\x00" * 8) == 0.0

    def test_fraction(self):
        # 0.5 = 16^0 * 8/16
        assert ibm_to_double(bytes.fromhex("4080000000000000")) == 0.5

    def test_full_52_bit_significand_exact(self):
        value = 1.0 + 2.0**-52
        assert ibm_to_double(double_to_ibm(value)) == value

    def test_round_trip_varied_values(self):
        values = [1.0, -1.0, 0.0, 2.0, 0.5, 3.1415926535897931, 1e10, -2.5e-7,
                  123456789.0, 31.2, 29.9, 6.5, 6.4, 240.0, 385.0]
        for v in values:
            assert ibm_to_double(double_to_ibm(v)) == v

    def test_truncated_field_padded(self):
        # 2-byte numeric field: 1.0 survives because the tail is zero
        assert ibm_to_double(bytes.fromhex("4110")) == 1.0

    def test_bad_width_rejected(self):
        with pytest.raises(ValueError):
            ibm_to_double(b"\x41")


class TestParser:
    def test_single_variable_identity_case(self):
        data = build_xpt([("V", "num", [1.0])])
        table = parse_xpt(data)
        assert table.columns == ("V",)
        assert table.rows == ((1.0,),)

    def test_hand_crafted_two_by_three(self):
        cols = [
            ("SEQN", "num", [1.0, 2.0, 3.0]),
            ("BMXBMI", "num", [31.2, 29.9, None]),
        ]
        table = parse_xpt(build_xpt(cols))
        assert table.columns == ("SEQN", "BMXBMI")
        assert table.rows == ((1.0, 31.2), (2.0, 29.9), (3.0, None))

    def test_char_variable(self):
        table = parse_xpt(
            build_xpt([("ID", "char", ["a", "bc", None])], char_lengths={"ID": 4})
        )
        assert table.rows == (("a",), ("bc",), (None,))
        assert table.schema[0].kind == "categorical"

    def test_empty_member(self):
        table = parse_xpt(build_xpt([("V", "num", [])]))
        assert table.n == 0
        assert table.columns == ("V",)

    def test_special_missing_codes(self):
        data = build_xpt([("V", "num", [1.0])])
        # rewrite the single data field with .A missing (0x41 then zeros)
        body = bytearray(data)
        body[-80:-72] = b"A\x00\x00\x00\x00\x00\x00\x00"
        assert parse_xpt(bytes(body)).rows == ((None,),)

    def test_member_name_and_labels(self):
        member = parse_member(build_xpt([("V", "num", [1.0])], member="DEMO"))
        assert member.name == "DEMO"
        assert member.variables[0].label == "label for V"

    def test_truncated_padding_tolerated(self):
        data = build_xpt([("V", "num", [1.0, 2.0])])
        # cut inside the trailing blank padding
        assert parse_xpt(data[:-37]).rows == ((1.0,), (2.0,))


class TestParserErrors:
    def test_malformed_library_header(self):
        data = b"NOT A TRANSPORT FILE".ljust(80) + b"\x00" * 160
        with pytest.raises(MalformedHeader) as err:
            parse_xpt(data)
        assert "byte 0" in str(err.value)

    def test_v8_rejected(self):
        good = build_xpt([("V", "num", [1.0])])
        v8 = good.replace(
            b"HEADER RECORD*******LIBRARY HEADER RECORD!!!!!!!",
            b"HEADER RECORD*******LIBV8   HEADER RECORD!!!!!!!",
        )
        with pytest.raises(UnsupportedVersion):
            parse_xpt(v8)

    def test_member_v8_rejected(self):
        good = build_xpt([("V", "num", [1.0])])
        v8 = good.replace(
            b"HEADER RECORD*******MEMBER  HEADER RECORD!!!!!!!",
            b"HEADER RECORD*******MEMBV8  HEADER RECORD!!!!!!!",
        )
        with pytest.raises(UnsupportedVersion):
            parse_xpt(v8)

    def test_truncated_stream(self):
        good = build_xpt([("V", "num", [1.0])])
        with pytest.raises(TruncatedRecord) as err:
            parse_xpt(good[:200])
        assert "byte" in str(err.value)

    def test_truncated_observation(self):
        cols = [("A", "num", [1.0]), ("B", "num", [2.0])]
        good = build_xpt(cols)
        # remove the padding then cut mid-row
        trimmed = good[: good.index(b"HEADER RECORD*******OBS") + 80 + 9]
        with pytest.raises(TruncatedRecord):
            parse_xpt(trimmed)

    def test_wrong_descriptor_size(self):
        good = build_xpt([("V", "num", [1.0])])
        bad = good.replace(b"000000000000000001600000000140  ", b"000000000000000001600000000999  ")
        with pytest.raises(MalformedHeader):
            parse_xpt(bad)


def test_lossless_round_trip_many_fixtures():
    # oracle: the independent writer; parser must reproduce cells untouched
    fixtures = [
        [("X1", "num", [0.0, 1.0, -1.0, 2.0**-20, 1.0 + 2.0**-52])],
        [("A", "num", [5.0, None]), ("B", "char", ["yy", "z"]), ("C", "num", [7.5, -3.25])],
        [("SEQN", "num", list(map(float, range(1, 26))))],
    ]
    for cols in fixtures:
        table = parse_xpt(build_xpt(cols, char_lengths={"B": 3}))
        assert table.columns == tuple(name for name, _, _ in cols)
        for j, (_, kind, values) in enumerate(cols):
            got = [row[j] for row in table.rows]
            assert got == values
