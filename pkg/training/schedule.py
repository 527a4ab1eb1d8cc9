"""p-annealing and learning-rate warm-up"""

from layers.neuron_mode import EXACT, LSE, Exact, LogSumExp, PNorm


def p_schedule(epoch, cfg):
    """Neuron mode for an epoch

    Geometric interpolation p_start -> p_end while epoch < p_exact_from_epoch,
    Exact afterwards.
    """
    start = cfg.resolved_p_exact_from_epoch()
    if cfg.surrogate == EXACT or epoch >= start:
        return Exact()
    span = max(start - 1, 1)
    p = cfg.p_start * (cfg.p_end / cfg.p_start) ** (epoch / span)
    return LogSumExp(p) if cfg.surrogate == LSE else PNorm(p)


def learning_rate(base_lr, epoch, step_in_epoch, steps_per_epoch, warmup_epochs):
    """Constant rate with an optional linear warm-up over the first epochs"""
    if warmup_epochs <= 0:
        return base_lr
    progress = (epoch * steps_per_epoch + step_in_epoch + 1) / (warmup_epochs * steps_per_epoch)
    return base_lr * min(1.0, progress)
