"""Client for the out-of-process model bridge.

Wire format: newline-delimited JSON over TCP. Requests are
``{"id": n, "cmd": name, "args": {...}}``; every request gets exactly one
``{"id": n, "ok": bool, "result"|"error": ...}`` response. Tensors travel
as base64-encoded little-endian float32 with explicit shape fields.
"""

from __future__ import annotations

import base64
import json
import socket

import numpy as np

from .explainers import Explainer


def encode_tensor(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype("<f4").tobytes()).decode("ascii"),
    }


def decode_tensor(obj: dict) -> np.ndarray:
    data = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f4")
    return data.reshape(obj["shape"]).astype(np.float64)


class BridgeError(RuntimeError):
    pass


class BridgeConnection:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._file = sock.makefile("rwb")
        self._next_id = 0

    @classmethod
    def connect(cls, address: str) -> "BridgeConnection":
        host, _, port = address.rpartition(":")
        sock = socket.create_connection((host or "127.0.0.1", int(port)))
        return cls(sock)

    def call(self, cmd: str, **args):
        self._next_id += 1
        request = {"id": self._next_id, "cmd": cmd, "args": args}
        self._file.write(json.dumps(request).encode() + b"\n")
        self._file.flush()
        line = self._file.readline()
        if not line:
            raise BridgeError("bridge connection closed")
        response = json.loads(line)
        if response.get("id") != self._next_id:
            raise BridgeError("bridge response id mismatch")
        if not response.get("ok"):
            raise BridgeError(str(response.get("error")))
        return response["result"]

    def close(self):
        self._file.close()
        self._sock.close()


class BridgeModel:
    """Predictor backed by a bridge server; also randomizable when the
    server reports layers."""

    threadsafe = False  # randomization state lives on the server

    def __init__(self, conn: BridgeConnection):
        self._conn = conn
        info = conn.call("info")
        self.input_shape = tuple(info["input_shape"])
        self.num_classes = int(info["num_classes"])
        self.num_layers = int(info["num_layers"])
        self.explainer_names = list(info["explainers"])

    @classmethod
    def connect(cls, address: str) -> "BridgeModel":
        return cls(BridgeConnection.connect(address))

    def predict(self, image: np.ndarray) -> np.ndarray:
        result = self._conn.call("predict", images=[encode_tensor(image)])
        return decode_tensor(result["probs"])[0]

    def explain(self, method: str, image: np.ndarray, target: int, seed: int):
        result = self._conn.call(
            "explain", method=method, image=encode_tensor(image),
            target=int(target), seed=int(seed),
        )
        return decode_tensor(result["map"])

    def randomize_top(self, k: int, seed: int) -> "_RandomizedView":
        return _RandomizedView(self, int(k), int(seed))

    def _randomize(self, k: int, seed: int):
        self._conn.call("randomize", k=k, seed=seed)

    def reset(self):
        self._conn.call("reset")

    def close(self):
        self._conn.close()


class _RandomizedView:
    """Predictor view that applies server-side randomization around each
    call, leaving the server pristine afterwards."""

    threadsafe = False

    def __init__(self, model: BridgeModel, k: int, seed: int):
        self._model = model
        self._k = k
        self._seed = seed
        self.input_shape = model.input_shape
        self.num_classes = model.num_classes
        self.num_layers = model.num_layers

    def _scoped(self, fn):
        self._model._randomize(self._k, self._seed)
        try:
            return fn()
        finally:
            self._model.reset()

    def predict(self, image):
        return self._scoped(lambda: self._model.predict(image))

    def explain(self, method, image, target, seed):
        return self._scoped(lambda: self._model.explain(method, image, target, seed))


def bridge_explainer(model, method: str) -> Explainer:
    """Explainer routed through the bridge; the model argument passed at
    call time must be the bridge model (or one of its randomized views)."""

    def _fn(m, image, target, seed):
        return m.explain(method, image, target, seed)

    return Explainer(f"bridge:{method}", _fn)
