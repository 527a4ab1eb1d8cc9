"""Train the base networks of an ensemble"""

import dataclasses
import os

from ensemble.ensemble_model import FUSION, EnsembleModel
from training.train_manager import TrainManager
from utils.errors import EnsembleTrainingError, LinfError, ParameterError, TrainingDivergenceError
from utils.logger import get_logger
from utils.parallel import parallel_map


class EnsembleManager:
    """Trains m bases that differ only in their seed"""

    def __init__(self, cfg, logger=None, threads=1, metrics_dir=None):
        self.cfg = cfg.validate()
        self.logger = logger or get_logger("ensemble")
        self.threads = threads
        self.metrics_dir = metrics_dir

    def _train_base(self, index, base_seed, train_set, val_set):
        seed = base_seed + index
        cfg = dataclasses.replace(self.cfg, seed=seed)
        metrics_path = None
        if self.metrics_dir:
            metrics_path = os.path.join(self.metrics_dir, f"base{index}.metrics.jsonl")
        self.logger.info(f"Training base {index} with seed {seed}")
        try:
            return TrainManager(cfg, logger=self.logger, metrics_path=metrics_path).train(train_set, val_set)
        except TrainingDivergenceError as e:
            self.logger.error(f"Base {index} diverged: {e}")
            raise EnsembleTrainingError(f"Base {index} (seed {seed}): {e}", index, e.last_good_epoch) from e
        except LinfError as e:
            self.logger.error(f"Base {index} failed: {e}")
            raise EnsembleTrainingError(f"Base {index} (seed {seed}): {e}", index, -1) from e

    def train(self, train_set, m, base_seed, val_set=None, mode=FUSION):
        """Train m bases with seeds base_seed .. base_seed + m - 1

        Returns:
            tuple: (EnsembleModel with uniform weights over the evaluation
            networks, list of TrainResult)
        """
        if m < 1:
            raise ParameterError(f"Ensemble size must be >= 1, got {m}")
        self.logger.info(f"Training {m} bases from seed {base_seed} ({self.threads} threads)")
        results = parallel_map(lambda i: self._train_base(i, base_seed, train_set, val_set),
                               range(m), self.threads)
        bases = [result.evaluation_network() for result in results]
        return EnsembleModel(bases, mode=mode, threads=self.threads), results


def train_ensemble(cfg, m, base_seed, train_set, val_set=None, mode=FUSION, logger=None,
                   threads=1, metrics_dir=None):
    """Train an m-member ensemble; see EnsembleManager.train"""
    ensemble, _ = EnsembleManager(cfg, logger=logger, threads=threads,
                                  metrics_dir=metrics_dir).train(train_set, m, base_seed, val_set, mode)
    return ensemble
