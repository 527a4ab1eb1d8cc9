"""Losses, optimizers, EMA, p-annealing, augmentation and the training loop"""
