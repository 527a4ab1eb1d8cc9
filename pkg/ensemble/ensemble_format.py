"""Ensemble manifest: flat key=value text next to one model file per base

Example manifest::

    kind=ensemble
    m=2
    mode=fusion
    weights=0.5,0.5
    base0.file=ens.base0.lnfc
    base0.crc=1A2B3C4D
    ...
"""

import os
import zlib

from ensemble.ensemble_model import EnsembleModel
from layers.model_format import deserialize_model, read_model_bytes, serialize_model
from utils.binary_container import format_descriptor, parse_descriptor
from utils.errors import ChecksumError, ModelFormatError, ParameterError, ShapeError

MANIFEST_KIND = "ensemble"


def base_file_name(manifest_path, index):
    stem = os.path.splitext(os.path.basename(manifest_path))[0]
    return f"{stem}.base{index}.lnfc"


def save_ensemble(ensemble, path):
    """Write the manifest to path and each base beside it"""
    folder = os.path.dirname(os.path.abspath(path))
    fields = {
        "kind": MANIFEST_KIND,
        "m": ensemble.m,
        "mode": ensemble.mode,
        "weights": ",".join(repr(float(w)) for w in ensemble.weights),
    }
    for idx, base in enumerate(ensemble.bases):
        blob = serialize_model(base)
        name = base_file_name(path, idx)
        with open(os.path.join(folder, name), "wb") as f:
            f.write(blob)
        fields[f"base{idx}.file"] = name
        fields[f"base{idx}.crc"] = f"{zlib.crc32(blob) & 0xFFFFFFFF:08X}"
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_descriptor(fields) + "\n")


def load_ensemble(path, threads=1):
    """Read a manifest and its base files

    Raises:
        ModelFormatError: malformed manifest
        ChecksumError: a base file does not match its recorded CRC-32
    """
    folder = os.path.dirname(os.path.abspath(path))
    text = read_model_bytes(path).decode("utf-8", errors="replace")
    try:
        fields = parse_descriptor(text)
        if fields.get("kind") != MANIFEST_KIND:
            raise ModelFormatError(f"Not an ensemble manifest (kind={fields.get('kind')})")
        m = int(fields["m"])
        weights = [float(w) for w in fields["weights"].split(",")]
        entries = [(fields[f"base{i}.file"], int(fields[f"base{i}.crc"], 16)) for i in range(m)]
        mode = fields["mode"]
    except (KeyError, ValueError) as e:
        raise ModelFormatError(f"Malformed ensemble manifest: {e}") from e

    bases = []
    for idx, (name, crc) in enumerate(entries):
        blob = read_model_bytes(os.path.join(folder, name))
        actual = zlib.crc32(blob) & 0xFFFFFFFF
        if actual != crc:
            raise ChecksumError(f"Base {idx} ({name}): CRC 0x{actual:08X} does not match manifest 0x{crc:08X}")
        bases.append(deserialize_model(blob))
    try:
        return EnsembleModel(bases, weights, mode=mode, threads=threads)
    except (ParameterError, ShapeError) as e:
        raise ModelFormatError(f"Manifest describes an invalid ensemble: {e}") from e


def is_manifest(path):
    """True if path looks like an ensemble manifest rather than a model file"""
    return read_model_bytes(path).startswith(f"kind={MANIFEST_KIND}".encode("ascii"))
