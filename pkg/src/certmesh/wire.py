"""Canonical byte encoding shared by signatures, byte counters and traces.

Every field carries a one-byte type tag, variable-length fields a length
prefix, and fields are emitted in a fixed order, so two values encode to the
same bytes iff they are field-for-field equal.
"""

from __future__ import annotations

import struct

_LEN = struct.Struct(">I").pack
_INT = struct.Struct(">q").pack
_FLOAT = struct.Struct(">d").pack


def _bool(v):
    return b"B\x01" if v else b"B\x00"


def _int(v):
    return b"I" + _INT(v)


def _float(v):
    return b"F" + _FLOAT(v)


def _bytes(v):
    return b"Y" + _LEN(len(v)) + bytes(v)


def _str(v):
    raw = v.encode()
    return b"S" + _LEN(len(raw)) + raw


def _seq(v):
    items = sorted(v) if isinstance(v, (set, frozenset)) else v
    body = b"".join([encode_field(x) for x in items])
    return b"L" + _LEN(len(items)) + _LEN(len(body)) + body


_ENCODERS = {
    bool: _bool, int: _int, float: _float, bytes: _bytes, bytearray: _bytes, str: _str,
    tuple: _seq, list: _seq, set: _seq, frozenset: _seq,
}


def encode_field(value) -> bytes:
    enc = _ENCODERS.get(type(value))
    if enc is not None:
        return enc(value)
    if value is None:
        return b"N"
    to_bytes = getattr(value, "to_bytes", None)
    if to_bytes is None or isinstance(value, int):
        for base, fn in _ENCODERS.items():
            if isinstance(value, base):
                return fn(value)
        raise TypeError(f"cannot encode {type(value).__name__}")
    raw = to_bytes()
    return b"O" + _LEN(len(raw)) + raw


def encode(*fields) -> bytes:
    return b"".join([encode_field(f) for f in fields])
