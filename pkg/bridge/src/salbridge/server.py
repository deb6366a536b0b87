"""Newline-delimited JSON server.

Requests are ``{"id": n, "cmd": name, "args": {...}}``; each gets exactly
one ``{"id": n, "ok": bool, "result"|"error": ...}`` line back. Tensors are
base64-encoded little-endian float32 with explicit shapes, so a round trip
through the wire preserves the payload bytes exactly.
"""

from __future__ import annotations

import base64
import json
import socketserver
import threading

import numpy as np

from .explain import EXPLAINER_PARAMS, EXPLAINERS, explain
from .model import ManagedModel


def encode_tensor(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_tensor(obj: dict) -> np.ndarray:
    data = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f4")
    return data.reshape(obj["shape"])


class BridgeService:
    """Command dispatch around one managed model.

    Randomization state is shared across connections by design; callers
    that need it (MPR sweeps) serialize their own randomize/explain pairs.
    """

    def __init__(self, model: ManagedModel):
        self._model = model
        self._lock = threading.Lock()

    def handle(self, request: dict) -> dict:
        req_id = request.get("id")
        try:
            cmd = request["cmd"]
            args = request.get("args", {})
            with self._lock:
                result = self._dispatch(cmd, args)
            return {"id": req_id, "ok": True, "result": result}
        except Exception as exc:  # every failure becomes an error response
            return {"id": req_id, "ok": False, "error": str(exc)}

    def _dispatch(self, cmd: str, args: dict):
        if cmd == "info":
            return {
                "input_shape": list(self._model.input_shape),
                "num_classes": self._model.num_classes,
                "num_layers": self._model.num_layers,
                "explainers": sorted(EXPLAINERS),
                "explainer_params": EXPLAINER_PARAMS,
            }
        if cmd == "predict":
            batch = np.stack([decode_tensor(t) for t in args["images"]])
            expected = self._model.input_shape
            if batch.shape[1:] != expected:
                raise ValueError(
                    f"image shape {list(batch.shape[1:])} does not match "
                    f"expected {list(expected)}"
                )
            return {"probs": encode_tensor(self._model.predict(batch))}
        if cmd == "explain":
            # copy: frombuffer views are read-only, torch wants writable
            image = decode_tensor(args["image"]).copy()
            if tuple(image.shape) != self._model.input_shape:
                raise ValueError(
                    f"image shape {list(image.shape)} does not match "
                    f"expected {list(self._model.input_shape)}"
                )
            smap = explain(
                self._model, args["method"], image,
                int(args.get("target", 0)), int(args.get("seed", 0)),
            )
            return {"map": encode_tensor(smap)}
        if cmd == "randomize":
            self._model.randomize(int(args["k"]), int(args.get("seed", 0)))
            return {"ack": True}
        if cmd == "reset":
            self._model.reset()
            return {"ack": True}
        raise ValueError(f"unknown command {cmd!r}")


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        service: BridgeService = self.server.service  # type: ignore[attr-defined]
        for line in self.rfile:
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as exc:
                response = {"id": None, "ok": False, "error": f"bad json: {exc}"}
            else:
                response = service.handle(request)
            self.wfile.write(json.dumps(response).encode() + b"\n")
            self.wfile.flush()


class BridgeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: BridgeService):
        super().__init__(address, _Handler)
        self.service = service


def serve(service: BridgeService, host: str = "127.0.0.1", port: int = 0):
    """Start a server thread; returns (server, bound_port)."""
    server = BridgeServer((host, port), service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, server.server_address[1]
