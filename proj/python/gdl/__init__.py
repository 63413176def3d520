"""Age regression from cortical surface meshes."""

import json as _json

from ._gdl import (
    CheckpointError,
    GdlError,
    Mesh,
    Model,
    architectures,
    gradcheck,
    icosphere,
    load_mesh,
    run_cli,
)

__all__ = [
    "CheckpointError",
    "GdlError",
    "Mesh",
    "Model",
    "architectures",
    "config_of",
    "gradcheck",
    "icosphere",
    "load_mesh",
    "run_cli",
]
__version__ = "0.1.0"


def config_of(model):
    """Architecture config of a loaded model as a dict."""
    return _json.loads(model.config_json)
