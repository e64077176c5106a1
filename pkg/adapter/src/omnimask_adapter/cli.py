"""Entry point: pick a backend and serve the wire protocol on stdio."""

from __future__ import annotations

import argparse
import os
import sys

from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="omnimask-adapter",
        description="Person detection/tracking adapter (omnimask wire protocol v1).",
    )
    parser.add_argument(
        "--backend",
        choices=("yolosam", "mock", "oracle"),
        default="yolosam",
        help="yolosam: real models; mock: deterministic geometric stand-in; "
        "oracle: delegate to the omnimask synthetic-scene adapter",
    )
    parser.add_argument("--confidence", type=float, default=0.5,
                        help="detection confidence threshold (yolosam)")
    parser.add_argument("--yolo-model", default="yolov8s.pt")
    parser.add_argument("--sam-model", default="facebook/sam2-hiera-large")
    parser.add_argument("--scene", help="scene spec JSON (oracle backend)")
    parser.add_argument("--inline-masks", action="store_true",
                        help="answer with run-length payloads instead of mask files")
    args = parser.parse_args(argv)

    if args.backend == "oracle":
        if not args.scene:
            parser.error("--backend oracle requires --scene")
        # Interchangeability is the point: hand the stream to the synthetic
        # oracle that ships with the pipeline toolkit.
        cmd = ["omnimask", "oracle", "adapter", "--scene", args.scene]
        if args.inline_masks:
            cmd.append("--inline-masks")
        os.execvp(cmd[0], cmd)

    if args.backend == "mock":
        from .backends import MockBackend

        backend = MockBackend()
    else:
        from .backends import YoloSamBackend

        try:
            backend = YoloSamBackend(args.confidence, args.yolo_model, args.sam_model)
        except RuntimeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

    serve(backend, inline_masks=args.inline_masks)
    return 0


if __name__ == "__main__":
    sys.exit(main())
