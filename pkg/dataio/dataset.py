"""Labelled feature matrix in [0, 1]^d"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.errors import DataError, LabelError, ShapeError


@dataclass
class Dataset:
    """Features (n, d) in [0, 1], integer labels in [0, k), optional raw bytes"""
    features: np.ndarray
    labels: np.ndarray
    k: int
    name: str = "dataset"
    raw: Optional[np.ndarray] = None
    image_shape: Optional[tuple] = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeError(f"Features must be (n, d), got shape {self.features.shape}")
        n = self.features.shape[0]
        if n == 0:
            raise DataError(f"Dataset '{self.name}' is empty")
        if self.labels.shape != (n,):
            raise ShapeError(f"Expected {n} labels, got shape {self.labels.shape}")
        if self.labels.min() < 0 or self.labels.max() >= self.k:
            raise LabelError(f"Labels of '{self.name}' fall outside [0, {self.k})")
        if not np.all(np.isfinite(self.features)) or self.features.min() < 0 or self.features.max() > 1:
            raise DataError(f"Features of '{self.name}' must lie in [0, 1]")
        if self.raw is not None:
            self.raw = np.ascontiguousarray(self.raw, dtype=np.uint8)
            if self.raw.shape != self.features.shape:
                raise ShapeError(f"Raw shape {self.raw.shape} does not match features {self.features.shape}")
        if self.image_shape is not None:
            self.image_shape = tuple(int(v) for v in self.image_shape)
            if int(np.prod(self.image_shape)) != self.features.shape[1]:
                raise ShapeError(f"Image shape {self.image_shape} does not cover {self.features.shape[1]} features")

    @classmethod
    def from_raw(cls, raw, labels, k, name="dataset", image_shape=None):
        """Build from 0-255 bytes; features are exactly raw / 255"""
        raw = np.ascontiguousarray(raw, dtype=np.uint8)
        return cls(raw.astype(np.float64) / 255.0, labels, k, name=name, raw=raw, image_shape=image_shape)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, indices, name=None):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.k,
                       name=name or self.name,
                       raw=None if self.raw is None else self.raw[indices],
                       image_shape=self.image_shape)

    def head(self, limit):
        """First `limit` samples (all of them when limit <= 0 or too large)"""
        if limit is None or limit <= 0 or limit >= self.n:
            return self
        return self.subset(np.arange(limit), name=f"{self.name}[:{limit}]")
