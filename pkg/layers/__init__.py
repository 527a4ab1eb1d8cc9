"""Distance neurons, layers, networks and the model file format"""

from layers.dist_layers import AffineHead, ConvDistLayer, DistLayer
from layers.dist_neuron import (dist_neuron_forward, dist_neuron_grad, distance, distance_grad,
                                residual_unit_forward, residual_unit_grad, tie_mask)
from layers.model_format import (deserialize_model, load_model, read_model_bytes, read_model_tags, save_model,
                                 serialize_model)
from layers.network import Network, network_backward, network_forward
from layers.network_builder import build_network
from layers.neuron_mode import EXACT, LSE, PNORM, Exact, LogSumExp, NeuronMode, PNorm, parse_mode
