"""Fusion/Voting ensembles of distance networks"""
