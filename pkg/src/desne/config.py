"""Run configuration: defaults, a flat key=value config file, and flags.

Values are resolved in three layers, later layers winning: built-in
defaults, the optional config file, then command-line flags. The resolved
mapping is canonicalized to JSON and hashed; that hash is written into every
output so two artifacts can be matched to the run that produced them.

Worker count and output locations are deliberately left out of the hash;
neither may change what a run computes.
"""

from __future__ import annotations

import hashlib
import json
import os

import tomli

__all__ = [
    "DEFAULTS",
    "COMMAND_KEYS",
    "UsageError",
    "RunConfig",
    "load_config_file",
    "resolve",
]


class UsageError(ValueError):
    """Bad flag or config value; maps to exit code 2."""


DEFAULTS = {
    "input": None,
    "format": "csv",
    "label_column": "auto",
    "normalize": "unit-range",
    "n_cap": 20000,
    "perplexity": 15.0,
    "optimizer": "de",
    "de_pop": 30,
    "de_iters": 10000,
    "de_f": 0.5,
    "de_cr": 0.7,
    "de_stall": 100,
    "bs_iters": 64,
    "math_backend": "reference",
    "tsne_iters": 1000,
    "learning_rate": 200.0,
    "exaggeration": 4.0,
    "exaggeration_iters": 100,
    "keep": 0.1,
    "grid": 32,
    "per_class": False,
    "seed": 0,
    "methods": "dq,nessa",
    "keep_list": "0.1,0.2,0.3",
    "bits_per_image": 3072 * 8,
    "n_images": 50000,
    "e_pcb": 10.0,
    "e_nm": 0.5,
    "passes_override": "",
    "embedding": None,
    "selection": None,
}

_PIPE = (
    "input", "format", "label_column", "normalize", "n_cap",
    "perplexity", "optimizer", "de_pop", "de_iters", "de_f", "de_cr", "de_stall",
    "bs_iters", "math_backend", "seed",
)
_TSNE = ("tsne_iters", "learning_rate", "exaggeration", "exaggeration_iters")

# Keys that take part in each subcommand's config (and therefore its hash).
COMMAND_KEYS = {
    "sample": _PIPE + _TSNE + ("keep", "grid", "per_class"),
    "embed": _PIPE + _TSNE,
    "bench-optimizers": tuple(k for k in _PIPE if k != "optimizer"),
    "energy": ("methods", "keep_list", "bits_per_image", "n_images", "e_pcb", "e_nm",
               "passes_override"),
    "export-scatter": ("embedding", "selection"),
}

# Keys that hold paths; only the file name enters the hash.
_PATH_KEYS = ("input", "embedding", "selection")


class RunConfig(dict):
    """Resolved settings for one subcommand, plus its ``config_hash``."""

    def __init__(self, command, values):
        super().__init__(values)
        self.command = command

    def canonical(self):
        """The hashed view: paths reduced to file names, keys sorted."""
        out = {"command": self.command}
        for k, v in sorted(self.items()):
            if k in _PATH_KEYS and v is not None:
                v = os.path.basename(str(v))
            out[k] = v
        return out

    @property
    def config_hash(self):
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config_file(path):
    """Parse a flat ``key = value`` file. Dashes in keys become underscores."""
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None
    out = {}
    for k, v in doc.items():
        if isinstance(v, dict):
            raise UsageError(f"{path}: tables are not supported ([{k}]); use flat key = value")
        key = k.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}: unknown key {k!r}")
        out[key] = v
    return out


def resolve(command, flags, file_values=None):
    """Merge defaults, file values and non-None flags for ``command``."""
    keys = COMMAND_KEYS[command]
    values = {k: DEFAULTS[k] for k in keys}
    for layer in (file_values or {}, flags):
        for k, v in layer.items():
            if k in values and v is not None:
                values[k] = v
    return RunConfig(command, values)
