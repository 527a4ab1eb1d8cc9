"""Datasets: IDX ingestion, synthetic corners, class gap and the dataset cache"""
