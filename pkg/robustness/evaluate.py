"""Clean / robust / certified evaluation and the empirical error estimators"""

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ensemble.ensemble_model import VOTING, EnsembleModel, weighted_vote
from robustness.attack import AttackConfig, pgd_batch
from robustness.certify import certified_flags, certified_radii, certify_voting
from utils.logger import get_logger
from utils.parallel import map_chunks

VOTING_CAVEAT = ("probability-averaged Voting predictions are not certified; "
                 "vote_certified covers the weighted-argmax vote only")


@dataclass
class CertReport:
    """Per-sample radii and flags plus aggregate accuracies

    Voting ensembles report radii and certified as None and put the
    weighted-argmax vote figures under metadata["voting"]. Robust fields are
    None when no attack ran; certified fields are None when certification was
    skipped.
    """
    epsilon: float
    n: int
    clean: float
    certified: Optional[float]
    robust: Optional[float]
    radii: Optional[list] = None
    certified_at_r: Optional[list] = None
    robust_flags: Optional[list] = None
    clean_flags: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json() + "\n")

    def format_table(self):
        """Standard / Robust / Certified percentages at 2 decimals"""
        def pct(value):
            return "-" if value is None else f"{100.0 * value:.2f}"
        header = f"{'eps':>8} {'Standard':>9} {'Robust':>9} {'Certified':>9}"
        row = f"{self.epsilon:>8.4g} {pct(self.clean):>9} {pct(self.robust):>9} {pct(self.certified):>9}"
        return f"{header}\n{row}"


def _arrays(dataset):
    return np.asarray(dataset.features, dtype=np.float64), np.asarray(dataset.labels, dtype=np.int64)


def _is_voting(model):
    return isinstance(model, EnsembleModel) and model.mode == VOTING


def _model_kind(model):
    if isinstance(model, EnsembleModel):
        return f"{model.mode}-ensemble"
    return "network+head" if model.head is not None else "network"


def eval_suite(model, dataset, epsilon, attack_cfg=None, certify=True, attack=True,
               threads=1, metadata=None):
    """Evaluate clean, robust (PGD) and certified accuracy at epsilon

    Raises:
        CertificationRefusedError: model has a surrogate layer and certify is set
    """
    X, Y = _arrays(dataset)
    clean = map_chunks(lambda x, y: model.predict(x) == y, [X, Y], threads)

    radii = certified = None
    meta = {"model": _model_kind(model)}
    if certify and _is_voting(model):
        vote_clean = map_chunks(lambda x, y: weighted_vote(model, x) == y, [X, Y], threads)
        meta["voting"] = {
            "vote_clean": float(np.mean(vote_clean)),
            "vote_certified": float(np.mean(certify_voting(model, X, Y, epsilon, threads))),
            "caveat": VOTING_CAVEAT,
        }
    elif certify:
        radii = certified_radii(model, X, Y, threads)
        certified = certified_flags(model, X, Y, epsilon, threads) & clean

    robust = None
    violations = 0
    if attack:
        cfg = attack_cfg if attack_cfg is not None else AttackConfig(epsilon)
        if cfg.epsilon != epsilon:
            cfg = cfg.with_epsilon(epsilon)
        success, _ = pgd_batch(model, X, Y, cfg, threads)
        robust = clean & ~success
        if certified is not None:
            violations = int(np.sum(certified & success))
        meta["attack"] = {"steps": cfg.steps, "step_size": cfg.step_size,
                          "restarts": cfg.restarts, "seed": cfg.seed}
    meta["soundness_violations"] = violations
    meta.update(metadata or {})

    return CertReport(
        epsilon=float(epsilon),
        n=len(Y),
        clean=float(np.mean(clean)),
        certified=None if certified is None else float(np.mean(certified)),
        robust=None if robust is None else float(np.mean(robust)),
        radii=None if radii is None else radii.tolist(),
        certified_at_r=None if certified is None else certified.tolist(),
        robust_flags=None if robust is None else robust.tolist(),
        clean_flags=clean.tolist(),
        metadata=meta,
    )


def certified_train_error(model, train_set, r, threads=1):
    """Upper estimate of the r-certified error: fraction not certified beyond r

    For Voting ensembles this is the error of the weighted-argmax vote.
    """
    X, Y = _arrays(train_set)
    return float(1.0 - np.mean(certified_flags(model, X, Y, r, threads)))


def robust_error_empirical(model, dataset, r, attack_cfg=None, threads=1):
    """Lower estimate of the r-robust error: misclassified or broken by PGD at r"""
    X, Y = _arrays(dataset)
    cfg = attack_cfg.with_epsilon(r) if attack_cfg is not None else AttackConfig(r)
    success, _ = pgd_batch(model, X, Y, cfg, threads)
    return float(np.mean(success))


class EvalManager:
    """Runs evaluations for the CLI and logs their outcome"""

    def __init__(self, logger=None, threads=1):
        self.logger = logger or get_logger("robustness")
        self.threads = threads

    def evaluate(self, model, dataset, epsilon, attack_cfg=None, certify=True, attack=True, metadata=None):
        """Evaluate model on dataset; see eval_suite"""
        self.logger.info(f"Evaluating {_model_kind(model)} on '{dataset.name}' ({dataset.n} samples) at eps={epsilon}")
        report = eval_suite(model, dataset, epsilon, attack_cfg, certify=certify, attack=attack,
                            threads=self.threads, metadata=metadata)
        violations = report.metadata["soundness_violations"]
        if violations:
            self.logger.error(f"{violations} certified samples were broken by PGD")
        self.logger.info(f"clean={report.clean:.4f} robust={report.robust} certified={report.certified}")
        return report
