"""patchforge-server command line: pick a backend, serve the wire protocol."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import create_app
from .backends import load_backend


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchforge-server", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8400)
    parser.add_argument(
        "--model",
        default="toy",
        help="'toy' for the analytic blob detector, or a torchvision "
        "detection model name (e.g. fasterrcnn_resnet50_fpn; requires "
        "locally cached pretrained weights)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backend = load_backend(args.model)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    app = create_app(backend, model_name=args.model)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
