from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statbridge.errors import WorkspaceError
from statbridge.storage import (
    MISSING_NAMES,
    N_MISSING,
    NUMERIC_TYPES,
    SYSMISS,
    StorageType,
    decode_missing,
    double_missing,
    encode_missing,
    missing_codes_array,
    missing_mask_array,
    missing_name,
    narrow_from_double,
    narrow_scalar,
    parse_missing_name,
    widen_to_double,
)

INT_TYPES = [StorageType.BYTE, StorageType.INT, StorageType.LONG]


def oracle_int_missing(stype: StorageType, code: int) -> int:
    # reserved block is the top 27 values of the signed range
    bits = {StorageType.BYTE: 8, StorageType.INT: 16, StorageType.LONG: 32}[stype]
    return 2 ** (bits - 1) - 1 - 26 + code


def oracle_float_missing(stype: StorageType, code: int) -> float:
    # k ulps above the largest power of two below the type's max finite value
    if stype is StorageType.FLOAT:
        base = struct.unpack("<I", struct.pack("<f", 2.0**127))[0]
        return struct.unpack("<f", struct.pack("<I", base + code))[0]
    base = struct.unpack("<Q", struct.pack("<d", 2.0**1023))[0]
    return struct.unpack("<d", struct.pack("<Q", base + code))[0]


def oracle_missing(stype: StorageType, code: int):
    if stype.is_integer:
        return oracle_int_missing(stype, code)
    return oracle_float_missing(stype, code)


@pytest.mark.parametrize("stype", NUMERIC_TYPES)
@pytest.mark.parametrize("code", range(N_MISSING))
def test_encoding_matches_oracle_and_round_trips(stype, code):
    raw = encode_missing(code, stype)
    assert raw == oracle_missing(stype, code)
    assert decode_missing(raw, stype) == code
    assert raw > stype.valid_max


def test_byte_valid_range_is_exactly_minus128_to_100():
    assert StorageType.BYTE.valid_min == -128
    assert StorageType.BYTE.valid_max == 100
    reserved = [encode_missing(k, StorageType.BYTE) for k in range(N_MISSING)]
    assert reserved == list(range(101, 128))


def test_integer_valid_maxima():
    assert StorageType.INT.valid_max == 32740
    assert StorageType.LONG.valid_max == 2147483620


@pytest.mark.parametrize("stype", [StorageType.STR, StorageType.STRL])
def test_string_types_have_no_missing_codes(stype):
    with pytest.raises(WorkspaceError):
        encode_missing(0, stype)


def test_missing_names_round_trip():
    assert MISSING_NAMES[0] == "." and MISSING_NAMES[-1] == ".z"
    for k in range(N_MISSING):
        assert parse_missing_name(missing_name(k)) == k


def test_decode_valid_value_is_none():
    assert decode_missing(100, StorageType.BYTE) is None
    assert decode_missing(1.5, StorageType.DOUBLE) is None


def test_off_ladder_float_decodes_as_generic_missing():
    big = np.nextafter(oracle_float_missing(StorageType.DOUBLE, 26), np.inf)
    assert decode_missing(float(big), StorageType.DOUBLE) == 0


def test_widen_maps_ladder_to_double_ladder():
    raw = np.array([5, encode_missing(3, StorageType.INT)], dtype=np.int16)
    out = widen_to_double(StorageType.INT, raw)
    assert out[0] == 5.0
    assert out[1] == double_missing(3)


def test_narrow_overflow_stores_generic_missing_and_counts():
    vals = np.array([100, 101, 1.5, double_missing(3), -128, np.nan])
    out, overflow = narrow_from_double(StorageType.BYTE, vals)
    assert list(out) == [100, 101, 101, 104, -128, 101]
    assert overflow == 3


def test_missing_mask_and_codes_arrays():
    raw = np.array([1, encode_missing(0, StorageType.LONG), encode_missing(26, StorageType.LONG)], dtype=np.int32)
    assert list(missing_mask_array(StorageType.LONG, raw)) == [False, True, True]
    assert list(missing_codes_array(StorageType.LONG, raw)) == [-1, 0, 26]


def test_sysmiss_is_code_zero():
    assert SYSMISS == double_missing(0)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(INT_TYPES), st.data())
def test_integer_valid_values_survive_widen_narrow(stype, data):
    v = data.draw(st.integers(int(stype.valid_min), int(stype.valid_max)))
    cell, overflowed = narrow_scalar(stype, float(v))
    assert not overflowed
    assert cell == v
    assert widen_to_double(stype, np.array([cell], dtype=stype.dtype))[0] == float(v)
