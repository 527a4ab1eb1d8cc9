"""Shared helpers: logging, config, errors, file container"""
