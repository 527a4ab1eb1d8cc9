"""Build freshly initialized networks from architecture presets"""

import numpy as np

from layers.dist_layers import AffineHead, ConvDistLayer, DistLayer
from layers.network import Network
from layers.neuron_mode import Exact
from utils.errors import ParameterError
from utils.net_types import get_arch_preset


def build_network(in_width, num_classes, hidden_widths, rng, arch="mlp", image_shape=None,
                  head_widths=(), residual_c=None, mode=None, init_low=0.0, init_high=1.0,
                  negate_logits=True):
    """Create a network with parameters drawn from rng

    Args:
        in_width (int): Input dimension d
        num_classes (int): Number of output logits
        hidden_widths (list): Widths of the hidden distance layers
        rng (Rng): Parameter initialization stream
        arch (str): Preset name ('mlp' or 'lenet')
        image_shape (tuple): (H, W, C), required for conv presets
        head_widths (list): Hidden widths of the affine head; None/empty and
            no head requested means a headless net
        residual_c (float): Skip weight for equal-width hidden layers
        mode (NeuronMode): Initial neuron mode

    Returns:
        Network: Untrained network
    """
    preset = get_arch_preset(arch)
    if preset is None:
        raise ParameterError(f"Unknown architecture preset: {arch}")
    mode = mode or Exact()
    hidden_widths = [int(w) for w in hidden_widths]
    use_head = head_widths is not None and len(head_widths) > 0

    layers = []
    width = in_width
    if preset["conv"]:
        if image_shape is None:
            raise ParameterError(f"Preset '{arch}' needs an image shape")
        shape = tuple(image_shape)
        for spec in preset["conv"]:
            kernels = rng.uniform_array((spec["out_channels"], shape[2], spec["kernel"], spec["kernel"]),
                                        init_low, init_high)
            layer = ConvDistLayer(kernels, np.zeros(spec["out_channels"]), shape,
                                  stride=spec["stride"], padding=spec["padding"], mode=mode)
            layers.append(layer)
            shape = layer.out_shape
        width = layers[-1].out_width

    # Headless nets end in a distance layer with one unit per class
    dist_widths = list(hidden_widths) + ([] if use_head else [num_classes])
    for out_width in dist_widths:
        weights = rng.uniform_array((out_width, width), init_low, init_high)
        c = residual_c if (residual_c is not None and out_width == width) else None
        layers.append(DistLayer(weights, np.zeros(out_width), mode=mode, residual_c=c))
        width = out_width

    head = None
    if use_head:
        matrices, biases = [], []
        for out_width in list(head_widths) + [num_classes]:
            bound = 1.0 / np.sqrt(width)
            matrices.append(rng.uniform_array((int(out_width), width), -bound, bound))
            biases.append(np.zeros(int(out_width)))
            width = int(out_width)
        head = AffineHead(matrices, biases)

    return Network(layers, head=head, negate_logits=negate_logits)
