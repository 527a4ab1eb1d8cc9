"""Shared pytest configuration"""

import os

import pytest

MNIST_ENV = "LINF_MNIST_DIR"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")
    config.addinivalue_line("markers", "mnist: needs MNIST IDX files under $LINF_MNIST_DIR")


def pytest_collection_modifyitems(config, items):
    if os.environ.get(MNIST_ENV):
        return
    skip = pytest.mark.skip(reason=f"set {MNIST_ENV} to the MNIST IDX directory")
    for item in items:
        if "mnist" in item.keywords:
            item.add_marker(skip)
