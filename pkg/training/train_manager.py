"""Training loop for l_inf-dist networks"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from layers.network_builder import build_network
from numcore.rng import Rng
from robustness.attack import AttackConfig
from robustness.certify import accuracy_summary
from training.augment import augment_batch
from training.ema import EmaState, ema_update
from training.losses import cross_entropy_batch, hinge_batch
from training.optimizers import make_optimizer
from training.schedule import learning_rate, p_schedule
from utils.errors import NumericError, TrainingDivergenceError
from utils.logger import get_logger

# Independent Rng streams derived from the config seed
INIT_STREAM = 1
SHUFFLE_STREAM = 2
AUGMENT_STREAM = 3
ATTACK_STREAM = 4


@dataclass
class TrainResult:
    """Trained network, EMA shadow (if enabled) and per-epoch metrics"""
    network: object
    ema: Optional[EmaState] = None
    metrics: list = field(default_factory=list)

    def evaluation_network(self):
        """The network used for evaluation: shadow weights when EMA is on"""
        return evaluation_network(self.network, self.ema)


def evaluation_network(net, ema):
    if ema is None:
        return net
    shadow_net = net.copy()
    shadow_net.load_parameters(ema.shadow)
    return shadow_net


class TrainManager:
    """Runs the seeded training loop and writes the metrics stream"""

    def __init__(self, cfg, logger=None, metrics_path=None):
        self.cfg = cfg.validate()
        self.logger = logger or get_logger("training")
        self.metrics_path = metrics_path

    def train(self, train_set, val_set=None):
        """Train a fresh network on train_set

        Returns:
            TrainResult: final network, EMA state and metrics records
        """
        cfg = self.cfg
        root = Rng(cfg.seed)
        init_rng = root.spawn(INIT_STREAM)
        shuffle_rng = root.spawn(SHUFFLE_STREAM)
        augment_rng = root.spawn(AUGMENT_STREAM)

        net = build_network(train_set.d, train_set.k, cfg.hidden_widths, init_rng, arch=cfg.arch,
                            image_shape=train_set.image_shape, head_widths=cfg.head_widths,
                            residual_c=cfg.residual_c, mode=p_schedule(0, cfg),
                            init_low=cfg.init_low, init_high=cfg.init_high)
        params = net.parameters()
        optimizer = make_optimizer(cfg.optimizer, params, cfg)
        ema = EmaState.from_params(params, cfg.ema_decay) if cfg.ema_decay is not None else None

        use_waug = cfg.augment == "waug" and train_set.image_shape is not None
        if cfg.augment == "waug" and not use_waug:
            self.logger.warning(f"Dataset '{train_set.name}' has no image shape; WAUG disabled")
        margin = cfg.resolved_hinge_margin() if cfg.loss == "hinge" else None
        ce_epochs = int(round(cfg.ce_warmup_fraction * cfg.epochs))
        eval_set = (val_set if val_set is not None else train_set).head(cfg.eval_limit)

        n = train_set.n
        steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
        self.logger.info(f"Training {net.describe()} on {n} samples for {cfg.epochs} epochs (seed {cfg.seed})")

        metrics = []
        last_good = -1
        metrics_file = open(self.metrics_path, "w", encoding="utf-8") if self.metrics_path else None
        try:
            for epoch in range(cfg.epochs):
                mode = p_schedule(epoch, cfg)
                net.set_mode(mode)
                order = shuffle_rng.permutation(n)
                total_loss = 0.0

                for step, start in enumerate(range(0, n, cfg.batch_size)):
                    idx = order[start:start + cfg.batch_size]
                    xb = train_set.features[idx]
                    yb = train_set.labels[idx]
                    if use_waug:
                        xb = augment_batch(xb, train_set.image_shape, augment_rng, cfg.waug_pad, cfg.waug_flip)

                    logits, cache = net.forward_with_cache(xb)
                    if cfg.loss == "ce" or epoch < ce_epochs:
                        losses, dlogits = cross_entropy_batch(logits, yb, cfg.ce_scale)
                    else:
                        losses, dlogits = hinge_batch(logits, yb, margin)
                    if not np.all(np.isfinite(losses)):
                        self.logger.error(f"Non-finite loss at epoch {epoch}, step {step}")
                        raise TrainingDivergenceError(f"Loss diverged at epoch {epoch}, step {step}", last_good)

                    grads, _ = net.backward(xb, dlogits / len(idx), cache)
                    lr = learning_rate(cfg.lr if cfg.optimizer == "adamw" else cfg.madam_lr,
                                       epoch, step, steps_per_epoch, cfg.warmup_epochs)
                    try:
                        optimizer.step(params, grads, lr=lr)
                    except NumericError as e:
                        self.logger.error(f"Non-finite gradient at epoch {epoch}, step {step}: {e}")
                        raise TrainingDivergenceError(f"Gradient diverged at epoch {epoch}: {e}", last_good) from e
                    if ema is not None:
                        ema_update(ema, params)
                    total_loss += float(losses.sum())

                record = self._epoch_record(epoch, mode, total_loss / n, net, ema, eval_set, root)
                metrics.append(record)
                if metrics_file is not None:
                    metrics_file.write(json.dumps(record) + "\n")
                    metrics_file.flush()
                self.logger.info(f"Epoch {epoch}: mode={record['p_mode']} loss={record['loss']:.4f} "
                                 f"clean={record['clean']:.4f} certified={record['certified']:.4f}")
                last_good = epoch
        finally:
            if metrics_file is not None:
                metrics_file.close()

        return TrainResult(network=net, ema=ema, metrics=metrics)

    def _epoch_record(self, epoch, mode, loss, net, ema, eval_set, root):
        cfg = self.cfg
        # Certification reads the parameters as an Exact-mode network
        model = evaluation_network(net, ema).exact_view()
        robust = None
        attack = None
        if cfg.metrics_attack_steps > 0 and cfg.epsilon > 0:
            attack = AttackConfig(epsilon=cfg.epsilon, steps=cfg.metrics_attack_steps,
                                  step_size=cfg.epsilon / 4.0, restarts=1,
                                  seed=root.spawn(ATTACK_STREAM).seed + epoch)
        summary = accuracy_summary(model, eval_set.features, eval_set.labels, cfg.epsilon, attack)
        if attack is not None:
            robust = summary["robust"]
        return {
            "epoch": epoch,
            "p_mode": mode.describe(),
            "loss": float(loss),
            "clean": summary["clean"],
            "certified": summary["certified"],
            "robust": robust,
            "ema": ema is not None,
        }


def train(cfg, train_set, val_set=None, logger=None, metrics_path=None):
    """Train one network; see TrainManager.train"""
    return TrainManager(cfg, logger=logger, metrics_path=metrics_path).train(train_set, val_set)
