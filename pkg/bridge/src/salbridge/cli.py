"""Server entry point: pick a model, bind an address, serve forever."""

from __future__ import annotations

import argparse
import threading

from .model import build_model
from .server import BridgeService, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="salbridge", description="Model-bridge server"
    )
    parser.add_argument("--model", default="tinycnn", help="model name")
    parser.add_argument("--weights", default=None,
                        help="optional saved state-dict path")
    parser.add_argument("--bind", default="127.0.0.1:7432",
                        help="host:port to listen on")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--shape", default="3,32,32",
                        help="input shape as C,H,W")
    parser.add_argument("--classes", type=int, default=10)
    args = parser.parse_args(argv)

    shape = tuple(int(v) for v in args.shape.split(","))
    if len(shape) != 3:
        parser.error("--shape must be C,H,W")
    host, _, port = args.bind.rpartition(":")
    model = build_model(
        args.model, input_shape=shape, num_classes=args.classes,
        seed=args.seed, weights=args.weights,
    )
    server, bound = serve(BridgeService(model), host or "127.0.0.1", int(port))
    print(f"salbridge: serving {args.model} on {host or '127.0.0.1'}:{bound}",
          flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
