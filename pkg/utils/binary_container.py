"""Checksummed binary container used for model and dataset files

Layout (all integers little-endian):
    magic (4 bytes) | version u32 | descriptor length u32 | descriptor UTF-8
    key=value lines | payload of float64 values | CRC-32 of everything before it
"""

import struct
import zlib

import numpy as np

from utils.errors import ChecksumError, ModelFormatError, ModelTruncationError

FORMAT_VERSION = 1
HEADER_SIZE = 12
CRC_SIZE = 4


def format_descriptor(fields):
    """Render an ordered mapping as flat key=value text

    Args:
        fields (dict): Keys and values; values are converted with ``str``

    Returns:
        str: One ``key=value`` per line
    """
    lines = []
    for key, value in fields.items():
        text = str(value)
        if "\n" in text or "=" in key:
            raise ValueError(f"Descriptor entry cannot be encoded: {key}")
        lines.append(f"{key}={text}")
    return "\n".join(lines)


def parse_descriptor(text):
    """Parse flat key=value text back into a dict of strings"""
    fields = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"Descriptor line without '=': {line}")
        fields[key] = value
    return fields


def encode_container(magic, fields, payload, version=FORMAT_VERSION):
    """Pack a descriptor and a float64 payload into a container

    Args:
        magic (bytes): 4-byte file magic
        fields (dict): Descriptor entries; ``values`` is added automatically
        payload (numpy.ndarray): Values to store, flattened in row-major order
        version (int): Format version

    Returns:
        bytes: The encoded container
    """
    values = np.ascontiguousarray(payload, dtype=np.float64).ravel()
    descriptor = dict(fields)
    descriptor["values"] = values.size
    desc_bytes = format_descriptor(descriptor).encode("utf-8")

    body = bytearray()
    body += magic
    body += struct.pack("<II", version, len(desc_bytes))
    body += desc_bytes
    body += values.astype("<f8").tobytes()

    # CRC-32 (IEEE) over all preceding bytes
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    body += struct.pack("<I", crc)
    return bytes(body)


def decode_container(blob, magic, format_error=ModelFormatError,
                     truncation_error=ModelTruncationError, checksum_error=ChecksumError):
    """Unpack a container, verifying magic, length and checksum

    Args:
        blob (bytes): Encoded container
        magic (bytes): Expected 4-byte magic

    Returns:
        tuple: (version, descriptor dict, float64 payload array)
    """
    if len(blob) < len(magic):
        raise truncation_error(f"File too short for magic ({len(blob)} bytes)")
    if blob[:len(magic)] != magic:
        raise format_error(f"Bad magic {blob[:len(magic)]!r}, expected {magic!r}")
    if len(blob) < HEADER_SIZE + CRC_SIZE:
        raise truncation_error(f"File too short for header ({len(blob)} bytes)")

    version, desc_len = struct.unpack_from("<II", blob, 4)
    desc_end = HEADER_SIZE + desc_len
    if desc_end + CRC_SIZE > len(blob):
        raise truncation_error(f"Descriptor runs past end of file ({desc_end} > {len(blob) - CRC_SIZE})")

    # Parse leniently first: a corrupted descriptor is reported by the CRC check
    fields = None
    try:
        fields = parse_descriptor(blob[HEADER_SIZE:desc_end].decode("utf-8"))
        count = int(fields["values"])
    except (UnicodeDecodeError, ValueError, KeyError):
        fields = None
    if fields is not None:
        expected = desc_end + count * 8 + CRC_SIZE
        if len(blob) < expected:
            raise truncation_error(f"Payload truncated: {len(blob)} bytes, expected {expected}")

    stored_crc, = struct.unpack_from("<I", blob, len(blob) - CRC_SIZE)
    actual_crc = zlib.crc32(blob[:-CRC_SIZE]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise checksum_error(f"CRC mismatch: stored 0x{stored_crc:08X}, computed 0x{actual_crc:08X}")

    if fields is None:
        raise format_error("Descriptor is not valid key=value text")
    if len(blob) != expected:
        raise format_error(f"Payload length {len(blob) - desc_end - CRC_SIZE} does not match {count} values")

    payload = np.frombuffer(blob, dtype="<f8", count=count, offset=desc_end).astype(np.float64)
    return version, fields, payload
