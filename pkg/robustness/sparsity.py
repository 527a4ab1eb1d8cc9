"""How far surrogate neuron gradients sit from the one-hot l_inf gradient"""

import numpy as np

from layers.dist_neuron import distance_grad
from layers.neuron_mode import LSE, PNORM, Exact, LogSumExp, PNorm
from numcore.tensor import as_tensor, check_same_shape
from utils.errors import DegenerateInputError, ParameterError

# Required gap between the largest and second-largest |z - w|
UNIQUE_MAX_GAP = 1e-2


def _mode_for(kind, p):
    if np.isinf(p):
        return Exact()
    if kind == PNORM:
        return PNorm(p)
    if kind == LSE:
        return LogSumExp(p)
    raise ParameterError(f"Sparsity profile supports pnorm and lse, got {kind}")


def gradient_sparsity_profile(z, w, p_list, kinds=(PNORM, LSE)):
    """l1 distance between each surrogate gradient and e_k * sign(z_k - w_k)

    An infinite p stands for the Exact neuron and always gives 0.

    Returns:
        dict: kind -> list of distances, one per p in p_list
    """
    z = as_tensor(z, name="z").ravel()
    w = as_tensor(w, name="w").ravel()
    check_same_shape(z, w, "z", "w")
    diff = z - w
    a = np.abs(diff)
    if a.size >= 2:
        top = np.sort(a)[-2:]
        if top[1] - top[0] < UNIQUE_MAX_GAP:
            raise DegenerateInputError(
                f"Largest |z - w| leads the runner-up by {top[1] - top[0]:.3g} < {UNIQUE_MAX_GAP}")
    k = int(np.argmax(a))
    target = np.zeros_like(diff)
    target[k] = np.sign(diff[k])

    profile = {}
    for kind in kinds:
        profile[kind] = [float(np.abs(distance_grad(diff, _mode_for(kind, float(p))) - target).sum())
                         for p in p_list]
    return profile
