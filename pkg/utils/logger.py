"""Logger setup module"""

import logging
import os
import sys
from datetime import datetime

LOGGER_NAME = "linfcert"


def setup_logger(level="INFO", log_dir="logs"):
    """Set up and configure logger

    Args:
        level (str): Console log level name
        log_dir (str): Directory for the timestamped debug log; empty disables it

    Returns:
        logging.Logger: The configured ``linfcert`` logger
    """
    # Create logger
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    # Remove existing handlers
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    # Console goes to stdout: success paths never touch stderr
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = os.path.join(log_dir, f"{LOGGER_NAME}_{timestamp}.log")
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name=None):
    """Return the package logger or one of its children"""
    base = logging.getLogger(LOGGER_NAME)
    return base.getChild(name) if name else base
