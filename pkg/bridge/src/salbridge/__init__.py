from .model import build_model
from .server import BridgeService, serve

__version__ = "0.1.0"

__all__ = ["BridgeService", "build_model", "serve", "__version__"]
