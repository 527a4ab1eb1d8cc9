"""Dataset cache in the checksummed container with the "DATA" magic"""

import numpy as np

from dataio.dataset import Dataset
from utils.binary_container import decode_container, encode_container
from utils.errors import ConsistencyError, DataError, FormatError, TruncationError

DATA_MAGIC = b"DATA"


def serialize_dataset(ds):
    """Features (row-major) then labels, as float64"""
    fields = {
        "kind": "dataset",
        "name": ds.name.replace("\n", " "),
        "n": ds.n,
        "d": ds.d,
        "k": ds.k,
        "raw": int(ds.raw is not None),
        "image_shape": ",".join(str(v) for v in ds.image_shape) if ds.image_shape else "",
    }
    payload = np.concatenate([ds.features.ravel(), ds.labels.astype(np.float64)])
    return encode_container(DATA_MAGIC, fields, payload)


def deserialize_dataset(blob):
    _, fields, payload = decode_container(blob, DATA_MAGIC, format_error=FormatError,
                                          truncation_error=TruncationError,
                                          checksum_error=ConsistencyError)
    try:
        n, d, k = int(fields["n"]), int(fields["d"]), int(fields["k"])
        has_raw = fields["raw"] == "1"
        shape_text = fields.get("image_shape", "")
        name = fields["name"]
    except (KeyError, ValueError) as e:
        raise FormatError(f"Malformed dataset descriptor: {e}") from e
    if payload.size != n * d + n:
        raise ConsistencyError(f"Dataset payload holds {payload.size} values, expected {n * d + n}")
    features = payload[:n * d].reshape(n, d)
    labels = payload[n * d:].astype(np.int64)
    image_shape = tuple(int(v) for v in shape_text.split(",")) if shape_text else None
    raw = np.rint(features * 255.0).astype(np.uint8) if has_raw else None
    return Dataset(features, labels, k, name=name, raw=raw, image_shape=image_shape)


def save_dataset(ds, path):
    with open(path, "wb") as f:
        f.write(serialize_dataset(ds))


def load_dataset(path):
    """Read a cached dataset"""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise DataError(f"Cannot read dataset cache {path}: {e}") from e
    return deserialize_dataset(blob)
