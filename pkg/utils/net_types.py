"""Architecture presets, exit codes and report keys"""

# Architecture presets
# conv entries: out_channels, kernel, stride, padding
ARCH_PRESETS = [
    {"name": "mlp",   "description": "Stack of l_inf-dist layers",            "conv": []},
    {"name": "lenet", "description": "Two l_inf-dist conv layers + l_inf-dist layers",
     "conv": [
         {"out_channels": 8,  "kernel": 5, "stride": 2, "padding": 0},
         {"out_channels": 16, "kernel": 5, "stride": 2, "padding": 0},
     ]},
]

# Neuron modes as written in model descriptors and metrics
NEURON_MODES = {
    "exact": "Exact l_inf distance (certifiable)",
    "pnorm": "l_p distance surrogate, p > 1",
    "lse":   "Log-Sum-Exp surrogate, p > 0",
}

# Ensemble combination modes
ENSEMBLE_MODES = {
    "fusion": "Weighted average of base logits (1-Lipschitz)",
    "voting": "Weighted average of base softmax outputs",
}

# CLI exit codes
EXIT_CODES = {
    0: "Success",
    1: "Unexpected failure",
    2: "Config or parameter error",
    3: "Data error",
    4: "Training diverged",
    5: "Model file corrupted or unreadable",
    6: "Certification refused (surrogate layer)",
}

# Per-epoch metrics stream keys (JSON Lines)
METRIC_KEYS = ["epoch", "p_mode", "loss", "clean", "certified", "robust", "ema"]

# Evaluation defaults
PGD_EVAL_DEFAULTS = {"steps": 20, "restarts": 1}
PGD_SOUNDNESS_DEFAULTS = {"steps": 100, "restarts": 10}

# Class gap defaults
GAP_DEFAULT_LIMIT = 2000


def get_arch_preset(name):
    """Get architecture preset by name"""
    for preset in ARCH_PRESETS:
        if preset["name"] == name:
            return preset
    return None
