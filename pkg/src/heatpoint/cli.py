"""Command line interface.

Every subcommand is a thin client of the HTTP service: by default the app is
driven in-process through an ASGI transport (no socket, same code path), and
``--server URL`` points the same calls at a remote instance.

Exit codes: 0 success, 1 invalid flags or configuration, 2 I/O and file
format problems (including transport failures), 3 numerical decode failures.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from . import __version__
from .decode import Decoder
from .errors import HeatpointError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags, which this CLI reserves for I/O
    # problems; route flag errors through the validation exit code instead.
    def error(self, message):
        raise _UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _decoder_list(text: str) -> list[str]:
    if text == "all":
        return [d.value for d in Decoder]
    names = [p.strip() for p in text.split(",") if p.strip()]
    valid = {d.value for d in Decoder}
    unknown = [n for n in names if n not in valid]
    if unknown or not names:
        raise argparse.ArgumentTypeError(
            f"unknown decoder(s) {unknown}; expected values from {sorted(valid)} or 'all'"
        )
    return names


def _normalization(text: str) -> dict:
    if text == "image-diagonal" or text == "heatmap-width":
        return {"kind": text, "constant": None}
    if text == "constant" or text.startswith("constant:"):
        raw = text.partition(":")[2]
        try:
            constant = float(raw) if raw else 256.0
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad normalization constant {raw!r}")
        return {"kind": "constant", "constant": constant}
    raise argparse.ArgumentTypeError(
        f"expected 'constant[:D]', 'image-diagonal', or 'heatmap-width', got {text!r}"
    )


def _request(args, method: str, path: str, *, json_body=None, content=None, params=None) -> httpx.Response:
    async def go():
        if args.server:
            client = httpx.AsyncClient(base_url=args.server, timeout=600.0)
        else:
            from .service.app import create_app

            client = httpx.AsyncClient(
                transport=httpx.ASGITransport(app=create_app()),
                base_url="http://heatpoint.internal",
                timeout=600.0,
            )
        async with client:
            return await client.request(method, path, json=json_body, content=content, params=params)

    return asyncio.run(go())


def _fail(resp: httpx.Response) -> int:
    kind, detail, code, offset = "http", f"HTTP {resp.status_code}", EXIT_IO, None
    try:
        body = resp.json()
        kind = body.get("kind", kind)
        detail = body.get("detail", resp.text)
        code = int(body.get("exit_code", code))
        offset = body.get("offset")
    except (ValueError, TypeError):
        detail = f"HTTP {resp.status_code}: {resp.text[:200]}"
    suffix = f" (byte offset {offset})" if offset is not None else ""
    print(f"error[{kind}]: {detail}{suffix}", file=sys.stderr)
    return code


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_json(path: str):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cmd_bench(args) -> int:
    payload = {
        "resolutions": args.resolutions,
        "decoders": args.decoder,
        "encoding": args.encoding,
        "samples": args.samples,
        "seed": args.seed,
        "sigma": args.sigma,
        "kernel_size": args.kernel_size,
        "anchor_count": args.anchors,
        "normalization": {**args.normalization, "space": args.space},
        "image_side": args.image_side,
        "workers": args.workers,
    }
    resp = _request(args, "POST", "/bench", json_body=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    _emit(body["nme_csv"] if args.format == "csv" else body["nme_text"], args.out)
    sys.stderr.write(body["timing_text"])
    return EXIT_OK


def cmd_sweep(args) -> int:
    payload = {
        "resolutions": args.resolutions,
        "kernels": args.kernels,
        "samples": args.samples,
        "seed": args.seed,
        "sigma": args.sigma,
        "blob_scale": args.blob_scale,
        "noise": args.noise,
        "normalization": {**args.normalization, "space": args.space},
        "image_side": args.image_side,
    }
    resp = _request(args, "POST", "/sweep-anchors", json_body=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    _emit(body["csv"] if args.format == "csv" else body["text"], args.out)
    return EXIT_OK


def cmd_encode(args) -> int:
    records = _load_json(args.annotations)
    payload = {
        "records": records,
        "width": args.width,
        "height": args.height,
        "downsample": args.downsample,
        "sigma": args.sigma,
        "mode": args.encoding,
        "amplitude": args.amplitude,
    }
    resp = _request(args, "POST", "/encode", json_body=payload)
    if resp.status_code != 200:
        return _fail(resp)
    Path(args.out).write_bytes(resp.content)
    return EXIT_OK


def cmd_decode(args) -> int:
    data = Path(args.hmap).read_bytes()
    params = {
        "decoder": args.decoder,
        "sigma": args.sigma,
        "kernel_size": args.kernel_size,
        "anchor_count": args.anchors,
        "smoothing": args.smoothing,
        "value_floor": args.value_floor,
        "toward_second": not args.shift_away,
        "image_side": args.image_side,
        "record_id": args.id,
    }
    if args.downsample is not None:
        params["downsample"] = args.downsample
    resp = _request(args, "POST", "/decode", content=data, params=params)
    if resp.status_code != 200:
        return _fail(resp)
    text = json.dumps(resp.json()["records"], indent=2) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    payload = {
        "gt": _load_json(args.gt),
        "predictions": _load_json(args.predictions),
        "normalization": {**args.normalization, "space": args.space},
    }
    if args.image_size is not None:
        payload["image_size"] = args.image_size
    if args.heatmap_width is not None:
        payload["heatmap_width"] = args.heatmap_width
    resp = _request(args, "POST", "/eval", json_body=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    per_landmark = ",".join(
        "-" if v is None else f"{v:.6g}" for v in body["nme_per_landmark"]
    )
    if args.format == "csv":
        lines = [
            f"nme_mean,{body['nme_mean']:.6g}",
            f"nme_per_landmark,{per_landmark}",
            f"failures,{body['failures']}",
            f"samples,{body['n_samples']}",
        ]
    else:
        lines = [
            f"nme_mean: {body['nme_mean']:.6g}",
            f"nme_per_landmark: {per_landmark}",
            f"failures: {body['failures']}",
            f"samples: {body['n_samples']}",
        ]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("heatpoint.service.app:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--server", default=None, help="base URL of a running service (default: in-process)")


def _add_norm(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--normalization",
        type=_normalization,
        default={"kind": "constant", "constant": 256.0},
        help="constant[:D], image-diagonal, or heatmap-width (default constant:256)",
    )
    p.add_argument("--space", choices=["image", "heatmap"], default="image", help="space errors are measured in")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heatpoint", description="Gaussian distance-map keypoint encode/decode toolkit")
    parser.add_argument("--version", action="version", version=f"heatpoint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("bench", help="quantization-error benchmark across resolutions and decoders")
    p.add_argument("--resolutions", type=_int_list, default=[64, 32, 16, 8, 4])
    p.add_argument("--decoder", type=_decoder_list, default=[d.value for d in Decoder],
                   help="comma-separated decoders, or 'all'")
    p.add_argument("--encoding", choices=["unbiased", "biased"], default="unbiased")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--kernel-size", type=int, default=2)
    p.add_argument("--anchors", type=int, default=4, help="anchor count for multilateration")
    p.add_argument("--image-side", type=float, default=256.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", default=None, help="write the NME table here instead of stdout")
    _add_norm(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep-anchors", help="multilateration NME by anchor window size")
    p.add_argument("--resolutions", type=_int_list, default=[64, 32, 16, 8, 4])
    p.add_argument("--kernels", type=_int_list, default=[2, 3, 4, 5, 6])
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--blob-scale", type=float, default=1.1,
                   help="encoded blob width relative to the sigma the decoder assumes")
    p.add_argument("--noise", type=float, default=1e-3, help="additive pixel noise standard deviation")
    p.add_argument("--image-side", type=float, default=256.0)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", default=None)
    _add_norm(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("encode", help="encode an annotation file into a binary heatmap container")
    p.add_argument("annotations", help="annotation JSON (at most one record)")
    p.add_argument("out", help="output .hmap path")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--downsample", type=float, default=4.0, help="image pixels per heatmap pixel")
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--encoding", choices=["unbiased", "biased"], default="unbiased")
    p.add_argument("--amplitude", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a binary heatmap container into annotations")
    p.add_argument("hmap", help="input .hmap path")
    p.add_argument("--decoder", choices=[d.value for d in Decoder], default=Decoder.MULTILATERATION.value)
    p.add_argument("--downsample", type=float, default=None,
                   help="image pixels per heatmap pixel (default image-side / width)")
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--kernel-size", type=int, default=2)
    p.add_argument("--anchors", type=int, default=4)
    p.add_argument("--smoothing", action="store_true")
    p.add_argument("--value-floor", type=float, default=1e-9)
    p.add_argument("--shift-away", action="store_true",
                   help="two-hot: shift away from the second maximum instead of toward it")
    p.add_argument("--image-side", type=float, default=256.0)
    p.add_argument("--id", default="decoded", help="record id for the output annotations")
    p.add_argument("--out", default=None, help="write annotations here instead of stdout")
    _add_common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="NME of predicted annotations against ground truth")
    p.add_argument("gt", help="ground-truth annotation JSON")
    p.add_argument("predictions", help="predicted annotation JSON")
    p.add_argument("--image-size", type=_int_list, default=None, metavar="W,H")
    p.add_argument("--heatmap-width", type=float, default=None)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", default=None)
    _add_norm(p)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve, server=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except HeatpointError as exc:
        print(f"error[{exc.name}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"error[malformed-json]: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except httpx.HTTPError as exc:
        print(f"error[transport]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
