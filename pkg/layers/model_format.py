"""Bit-exact model file ("LNFC" container)

The descriptor holds the architecture as flat key=value text; the payload
holds, for each layer in order, its weights (row-major) then its bias.
"""

import numpy as np

from layers.dist_layers import AffineHead, ConvDistLayer, DistLayer
from layers.network import Network
from layers.neuron_mode import parse_mode
from numcore.tensor import check_finite
from utils.binary_container import decode_container, encode_container
from utils.errors import ModelFileError, ModelFormatError, ParameterError, ShapeError

MODEL_MAGIC = b"LNFC"
TAG_PREFIX = "tag."


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _join(values):
    return ",".join(str(int(v)) for v in values)


def serialize_model(net, tags=None):
    """Encode a Network as bytes; tags are free-form key=value metadata"""
    fields = {"kind": "network", "negate": int(net.negate_logits), "layers": len(net.dist_layers)}
    for key, value in (tags or {}).items():
        fields[TAG_PREFIX + key] = value
    chunks = []
    for idx, layer in enumerate(net.dist_layers):
        prefix = f"layer{idx}"
        fields[f"{prefix}.type"] = layer.kind
        fields[f"{prefix}.mode"] = layer.mode.describe()
        if isinstance(layer, ConvDistLayer):
            fields[f"{prefix}.kernels"] = _join(layer.kernels.shape)
            fields[f"{prefix}.in_shape"] = _join(layer.in_shape)
            fields[f"{prefix}.stride"] = _join(layer.stride)
            fields[f"{prefix}.padding"] = layer.padding
        else:
            fields[f"{prefix}.in"] = layer.in_width
            fields[f"{prefix}.out"] = layer.out_width
            if layer.residual_c is not None:
                fields[f"{prefix}.c"] = repr(float(layer.residual_c))
        for param in layer.parameters():
            chunks.append(check_finite(param, f"{prefix} parameter").ravel())

    if net.head is not None:
        fields["head"] = len(net.head.matrices)
        for idx, matrix in enumerate(net.head.matrices):
            fields[f"head{idx}.shape"] = _join(matrix.shape)
        for param in net.head.parameters():
            chunks.append(check_finite(param, "head parameter").ravel())
    else:
        fields["head"] = 0

    payload = np.concatenate(chunks) if chunks else np.zeros(0)
    return encode_container(MODEL_MAGIC, fields, payload)


class _PayloadReader:
    def __init__(self, payload):
        self.payload = payload
        self.offset = 0

    def take(self, shape):
        count = int(np.prod(shape))
        if self.offset + count > self.payload.size:
            raise ModelFormatError("Descriptor promises more parameters than the payload holds")
        values = self.payload[self.offset:self.offset + count].reshape(shape).copy()
        self.offset += count
        return values


def deserialize_model(blob):
    """Decode bytes produced by serialize_model"""
    _, fields, payload = decode_container(blob, MODEL_MAGIC)
    try:
        if fields.get("kind") != "network":
            raise ModelFormatError(f"Not a network file (kind={fields.get('kind')})")
        reader = _PayloadReader(payload)
        layers = []
        for idx in range(int(fields["layers"])):
            prefix = f"layer{idx}"
            mode = parse_mode(fields[f"{prefix}.mode"])
            if fields[f"{prefix}.type"] == ConvDistLayer.kind:
                kshape = _ints(fields[f"{prefix}.kernels"])
                kernels = reader.take(kshape)
                bias = reader.take((kshape[0],))
                layers.append(ConvDistLayer(kernels, bias, _ints(fields[f"{prefix}.in_shape"]),
                                            stride=_ints(fields[f"{prefix}.stride"]),
                                            padding=int(fields[f"{prefix}.padding"]), mode=mode))
            else:
                out_w, in_w = int(fields[f"{prefix}.out"]), int(fields[f"{prefix}.in"])
                weights = reader.take((out_w, in_w))
                bias = reader.take((out_w,))
                c = fields.get(f"{prefix}.c")
                layers.append(DistLayer(weights, bias, mode=mode,
                                        residual_c=float(c) if c is not None else None))

        head = None
        n_head = int(fields.get("head", 0))
        if n_head:
            matrices, biases = [], []
            for idx in range(n_head):
                shape = _ints(fields[f"head{idx}.shape"])
                matrices.append(reader.take(shape))
                biases.append(reader.take((shape[0],)))
            head = AffineHead(matrices, biases)

        if reader.offset != payload.size:
            raise ModelFormatError(f"Payload has {payload.size - reader.offset} unused values")
        return Network(layers, head=head, negate_logits=fields["negate"] == "1")
    except (KeyError, ValueError, ParameterError, ShapeError) as e:
        raise ModelFormatError(f"Malformed model descriptor: {e}") from e


def save_model(net, path, tags=None):
    """Write a network to path"""
    with open(path, "wb") as f:
        f.write(serialize_model(net, tags))


def read_model_bytes(path):
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise ModelFileError(f"Cannot read model file {path}: {e}") from e


def load_model(path):
    """Read a network from path"""
    return deserialize_model(read_model_bytes(path))


def read_model_tags(blob):
    """Tags stored by serialize_model"""
    _, fields, _ = decode_container(blob, MODEL_MAGIC)
    return {key[len(TAG_PREFIX):]: value for key, value in fields.items() if key.startswith(TAG_PREFIX)}
