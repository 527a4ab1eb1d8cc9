"""Big-endian IDX reader (MNIST distribution format), plain or gzip"""

import gzip
import struct

import numpy as np

from dataio.dataset import Dataset
from utils.errors import ConsistencyError, DataError, FormatError, TruncationError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


def _read_bytes(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        with opener(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise DataError(f"Cannot read IDX file {path}: {e}") from e


def _header(blob, path, magic, ndims):
    size = 4 * (1 + ndims)
    if len(blob) < size:
        raise TruncationError(f"{path}: header needs {size} bytes, file has {len(blob)}")
    found, = struct.unpack_from(">I", blob, 0)
    if found != magic:
        raise FormatError(f"{path}: magic 0x{found:08X}, expected 0x{magic:08X}")
    dims = struct.unpack_from(f">{ndims}I", blob, 4)
    return dims, size


def _payload(blob, path, offset, count):
    if len(blob) < offset + count:
        raise TruncationError(f"{path}: payload has {len(blob) - offset} bytes, header promises {count}")
    if len(blob) > offset + count:
        raise ConsistencyError(f"{path}: {len(blob) - offset - count} bytes past the promised payload")
    return np.frombuffer(blob, dtype=np.uint8, count=count, offset=offset)


def read_idx_images(path):
    """(n, rows, cols) uint8 array from an image file"""
    blob = _read_bytes(path)
    (n, rows, cols), offset = _header(blob, path, IDX_IMAGE_MAGIC, 3)
    return _payload(blob, path, offset, n * rows * cols).reshape(n, rows, cols)


def read_idx_labels(path):
    """(n,) uint8 array from a label file"""
    blob = _read_bytes(path)
    (n,), offset = _header(blob, path, IDX_LABEL_MAGIC, 1)
    return _payload(blob, path, offset, n)


def load_idx(images_path, labels_path, k=None, name=None):
    """Load an image/label pair of IDX files as a Dataset

    Pixels are scaled to [0, 1]; the raw bytes are kept for class-gap work.

    Args:
        images_path (str): Image file (magic 0x00000803)
        labels_path (str): Label file (magic 0x00000801)
        k (int): Number of classes; defaults to max label + 1

    Returns:
        Dataset: Features (n, rows*cols) with image_shape (rows, cols, 1)
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(f"{images_path} holds {images.shape[0]} images but "
                               f"{labels_path} holds {labels.shape[0]} labels")
    n, rows, cols = images.shape
    if n == 0:
        raise DataError(f"{images_path} holds no images")
    labels = labels.astype(np.int64)
    return Dataset.from_raw(images.reshape(n, rows * cols), labels,
                            k if k is not None else int(labels.max()) + 1,
                            name=name or str(images_path), image_shape=(rows, cols, 1))


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images (n, rows, cols) and labels (n,) as IDX files"""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())
