"""PGD attack, certification, evaluation reports and bound evaluators"""
