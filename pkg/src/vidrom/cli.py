"""Command line entry points.

Subcommands cover the full pipeline: ``track`` turns a video into a motion
CSV, ``fit`` turns motion CSVs into a model document, ``predict`` runs a
fitted document against held-out data, ``backbone`` tabulates the
amplitude-dependent decay and frequency, and ``render-synthetic`` produces
ground-truth test videos.  Failures from the library surface as one JSON
object on stderr and exit code 1; argparse usage errors exit with 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_snapshot, load_config
from .document import (
    ModelDocument,
    load_document,
    make_provenance,
    reproducibility_hash,
    save_document,
)
from .dynamics import (
    amplitude_map,
    backbone_curves,
    fit_reduced_dynamics,
    normal_form,
    predict_observable,
    to_polar,
)
from .embedding import (
    TimeSeries,
    center,
    delay_embed,
    estimate_derivative,
    leading_components,
    read_series_csv,
    tail_mean_offset,
    write_series_csv,
)
from .errors import (
    ConfigError,
    DivergenceError,
    FitError,
    InputError,
    TrackingLostError,
    VidromError,
)
from .frames import Region, crop, load_frame_sequence, save_frame_directory, save_raw_sequence
from .manifold import fit_manifold, project
from .metrics import cnmte, ermse, nmte
from .synthetic import (
    DoublePendulumParams,
    dp_derivatives,
    dp_tip_position,
    integrate,
    make_textured_marker,
    render_marker_video,
)
from .tracker import SearchConfig, Template, track, write_track_csv

log = logging.getLogger("vidrom")


def _require(value, key: str):
    if not value:
        raise ConfigError(f"missing required config key {key!r}")
    return value


@contextmanager
def _stage(name: str):
    """Label library errors with the pipeline stage that raised them."""
    try:
        yield
    except VidromError as exc:
        if exc.args:
            exc.args = (f"[{name}] {exc.args[0]}",) + exc.args[1:]
        raise


def _resolve_scale(cfg: PipelineConfig) -> np.ndarray:
    if cfg.channel_scale:
        return np.asarray(cfg.channel_scale, dtype=float)
    return np.ones(len(cfg.embed_channels))


def _load_series(path, channels, scale) -> TimeSeries:
    series = read_series_csv(path, channels)
    return TimeSeries(series.dt, series.values * scale)


def run_track(cfg: PipelineConfig, out_dir: Path) -> Path:
    """Track the configured template box through the configured video."""
    _require(cfg.frames, "frames")
    if cfg.template_width < 1 or cfg.template_height < 1:
        raise ConfigError("template_width and template_height must be >= 1")
    seq = load_frame_sequence(cfg.frames, fps=cfg.fps)
    region = Region(
        cfg.template_x0, cfg.template_y0, cfg.template_width, cfg.template_height
    )
    template = Template(crop(seq[0], region))
    search = SearchConfig(
        search_scale=cfg.search_scale,
        theta_min=cfg.theta_min,
        theta_max=cfg.theta_max,
        theta_interval=cfg.theta_interval,
        score_thresh=cfg.score_thresh,
        iou_thresh=cfg.iou_thresh,
        n_match=cfg.n_match,
        d_thresh=cfg.d_thresh,
        background_removal=cfg.background_removal,
    )
    series = track(seq, template, region, search, theta_init=cfg.theta_init)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "track.csv"
    write_track_csv(series, out)
    log.info("tracked %d frames -> %s", len(series), out)
    return out


def run_fit(cfg: PipelineConfig, out_dir: Path) -> Path:
    """Fit manifold, reduced dynamics and normal form from training CSVs."""
    paths = _require(cfg.train_csv, "train_csv")
    scale = _resolve_scale(cfg)
    with _stage("load"):
        raw_series = [_load_series(p, cfg.embed_channels, scale) for p in paths]
        dt = raw_series[0].dt
        for i, s in enumerate(raw_series[1:], start=1):
            if abs(s.dt - dt) > 1e-9 * max(dt, s.dt):
                raise InputError(
                    f"training series 0 and {i} have different sampling steps "
                    f"({dt} vs {s.dt})"
                )
    if cfg.skip_samples:
        raw_series = [
            TimeSeries(s.dt, s.values[cfg.skip_samples :], s.origin_offset)
            for s in raw_series
        ]
    with _stage("embed"):
        if cfg.fixed_point_policy == "supplied":
            offset = np.asarray(cfg.fixed_point_value, dtype=float)
            if offset.shape != (len(cfg.embed_channels),):
                raise ConfigError("fixed_point_value needs one entry per embed channel")
            offset = offset * scale
        else:
            offset = tail_mean_offset(raw_series[0], cfg.tail_window)
        centered = [center(s, offset) for s in raw_series]
        embedded = [
            delay_embed(s, cfg.embed_copies, cfg.embed_lag, target_dim=cfg.manifold_dim)
            for s in centered
        ]

    with _stage("manifold"):
        mm = fit_manifold(
            embedded, cfg.manifold_dim, cfg.manifold_order,
            error_bound=cfg.manifold_error_bound,
        )
        xi = [project(mm.tangent_basis, e.vectors) for e in embedded]
        xi_dot = [estimate_derivative(x, dt) for x in xi]
    with _stage("reduced-dynamics"):
        rm = fit_reduced_dynamics(xi, xi_dot, cfg.dynamics_order)
    with _stage("normal-form"):
        nf = normal_form(
            rm, xi, xi_dot, order=cfg.normalform_order,
            resonance_tol=cfg.resonance_tol, roundtrip_tol=cfg.roundtrip_tol,
        )
    try:
        polar = to_polar(nf)
    except (InputError, FitError) as exc:
        log.warning("no polar model: %s", exc)
        polar = None

    doc = ModelDocument(
        manifold=mm,
        reduced=rm,
        normal_form=nf,
        polar=polar,
        embedding={
            "channels": list(cfg.embed_channels),
            "channel_scale": [float(v) for v in scale],
            "copies": cfg.embed_copies,
            "lag_steps": cfg.embed_lag,
            "skip_samples": cfg.skip_samples,
            "dt": dt,
            "origin_offset": [float(v) for v in offset],
            "fixed_point_policy": cfg.fixed_point_policy,
        },
        metrics={
            "manifold_ermse": mm.training_ermse,
            "reduced_fit_rms": rm.fit_rms,
            "normal_form_roundtrip": nf.roundtrip_error,
        },
        provenance=make_provenance(paths, config_snapshot(cfg)),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "model.json"
    save_document(doc, out)
    log.info(
        "model written -> %s (hash %s)", out, reproducibility_hash(doc.to_dict())[:12]
    )
    return out


def _embed_from_document(doc: ModelDocument, path):
    """Center and embed a CSV exactly the way the document was trained."""
    meta = doc.embedding
    scale = np.asarray(meta["channel_scale"], dtype=float)
    series = _load_series(path, tuple(meta["channels"]), scale)
    skip = int(meta.get("skip_samples", 0))
    if skip:
        series = TimeSeries(series.dt, series.values[skip:], series.origin_offset)
    series = center(series, np.asarray(meta["origin_offset"], dtype=float))
    return delay_embed(series, int(meta["copies"]), int(meta["lag_steps"]))


def run_predict(cfg: PipelineConfig, doc_path, out_dir: Path) -> dict:
    """Predict the test series from its first embedded sample; report errors."""
    doc = load_document(doc_path)
    test_path = _require(cfg.test_csv, "test_csv")
    emb = _embed_from_document(doc, test_path)
    meta = doc.embedding
    dt = emb.dt
    if cfg.duration is not None:
        steps = int(round(cfg.duration / dt))
    else:
        steps = emb.num_samples - 1
    pred = predict_observable(
        doc.manifold, doc.normal_form, emb.vectors[0], steps * dt, dt,
        substeps=cfg.substeps,
    )
    copies = int(meta["copies"])
    lead_cols = np.arange(len(meta["channels"])) * copies
    predicted = pred.observables[:, lead_cols]
    truth = leading_components(emb)
    n = min(predicted.shape[0], truth.shape[0])
    values = {
        "ermse": float(ermse(truth[:n], predicted[:n])),
        "cnmte": float(cnmte(truth[:n], predicted[:n])),
        "nmte": float(nmte(truth[:n], predicted[:n])),
        "compared_samples": n,
        "extrapolated": pred.extrapolated,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    scale = np.asarray(meta["channel_scale"], dtype=float)
    offset = np.asarray(meta["origin_offset"], dtype=float)
    physical = (predicted + offset) / scale
    write_series_csv(
        out_dir / "prediction.csv", pred.times, physical, list(meta["channels"])
    )
    (out_dir / "prediction_metrics.json").write_text(
        json.dumps(values, indent=1) + "\n"
    )
    log.info(
        "prediction written -> %s (ermse %.4g, cnmte %.4g, nmte %.4g)",
        out_dir / "prediction.csv", values["ermse"], values["cnmte"], values["nmte"],
    )
    return values


def run_backbone(cfg: PipelineConfig, doc_path, out_dir: Path) -> Path:
    """Tabulate decay, frequency and observable amplitude against radius."""
    doc = load_document(doc_path)
    if doc.polar is None:
        raise InputError(
            "document has no polar model; the fitted spectrum did not admit one"
        )
    meta = doc.embedding
    copies = int(meta["copies"])
    ch = cfg.amplitude_channel
    if not 0 <= ch < len(meta["channels"]):
        raise ConfigError(f"amplitude_channel {ch} out of range")
    col = ch * copies
    ch_scale = float(meta["channel_scale"][ch])
    nf = doc.normal_form
    trained = None
    if nf.trained_amplitude is not None:
        trained = float(nf.trained_amplitude[0])
    rho_max = cfg.rho_max if cfg.rho_max is not None else trained
    if rho_max is None:
        raise ConfigError("rho_max is required when the document lacks a trained range")

    def amplitude_fn(r):
        return amplitude_map(doc.manifold, nf, col, r) / ch_scale

    curve = backbone_curves(
        doc.polar, amplitude_fn, rho_max, cfg.backbone_samples, trained_max=trained
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "backbone.csv"
    lines = ["rho,decay,frequency,amplitude"]
    for i in range(curve.rho.size):
        lines.append(
            f"{float(curve.rho[i])!r},{float(curve.gamma[i])!r},"
            f"{float(curve.omega[i])!r},{float(curve.amplitude[i])!r}"
        )
    out.write_text("\n".join(lines) + "\n", newline="\n")
    log.info("backbone written -> %s (%d samples)", out, curve.rho.size)
    return out


def _render_scenario(args) -> "tuple[np.ndarray, np.ndarray, np.ndarray, tuple]":
    """Ground-truth marker motion for one scenario: xs, ys, thetas, canvas."""
    n = int(round(args.duration * args.fps)) + 1
    t = np.arange(n) / args.fps
    if args.scenario == "static":
        size = args.size or (160, 120)
        xs = np.full(n, size[0] // 2, dtype=float)
        ys = np.full(n, size[1] // 2, dtype=float)
        thetas = np.zeros(n)
        return xs, ys, thetas, size
    if args.scenario == "damped_cosine":
        size = args.size or (220, 120)
        envelope = args.amplitude * np.exp(args.decay * t)
        xs = np.rint(size[0] / 2 + envelope * np.cos(args.omega * t))
        ys = np.full(n, size[1] // 2, dtype=float)
        thetas = args.spin * np.exp(args.decay * t) * np.cos(args.omega * t)
        return xs, ys, thetas, size
    if args.scenario == "double_pendulum":
        size = args.size or (260, 260)
        params = DoublePendulumParams()
        x0 = np.array(
            [np.deg2rad(args.theta1), np.deg2rad(args.theta2), 0.0, 0.0]
        )
        # integrate on a finer grid than the frame rate for accuracy
        sub = 4
        states = integrate(
            lambda s: dp_derivatives(s, params), x0, 1.0 / (args.fps * sub),
            (n - 1) * sub,
        )[::sub]
        tips = np.array([dp_tip_position(s, params) for s in states])
        cx = size[0] / 2
        cy = size[1] * 0.25  # pivot sits in the upper part, tip hangs below
        xs = np.rint(cx + args.scale * tips[:, 0])
        ys = np.rint(cy - args.scale * tips[:, 1])
        thetas = np.rad2deg(states[:, 1])
        return xs, ys, thetas, size
    raise InputError(f"unknown scenario {args.scenario!r}")


def run_render(args) -> Path:
    """Render a synthetic marker video plus its ground-truth CSV."""
    xs, ys, thetas, size = _render_scenario(args)
    marker = make_textured_marker(args.marker_size, seed=args.seed)
    seq = render_marker_video(xs, ys, thetas, marker, size, args.fps)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.container == "raw":
        save_raw_sequence(seq, out_dir / "video.raw")
        video = out_dir / "video.raw"
    else:
        video = out_dir / "frames"
        save_frame_directory(seq, video)
    write_series_csv(
        out_dir / "truth.csv", np.arange(len(seq)) / args.fps,
        np.column_stack([xs, ys, thetas]), ["x", "y", "theta"],
    )
    log.info("rendered %d frames -> %s", len(seq), video)
    return video


def _parse_size(text: str) -> tuple:
    try:
        w, _, h = text.partition("x")
        return (int(w), int(h))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidrom",
        description="video tracking, invariant-manifold reduction and prediction",
    )
    parser.add_argument(
        "--log-level", default="info",
        choices=("debug", "info", "warning", "error"),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("track", "track a template through a video, write track.csv"),
        ("fit", "fit manifold + dynamics from motion CSVs, write model.json"),
        ("predict", "predict a test CSV from a model document"),
        ("backbone", "tabulate decay/frequency/amplitude curves"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="pipeline config file")
        p.add_argument("--out", default=None, help="output directory override")
        if name in ("predict", "backbone"):
            p.add_argument("--document", required=True, help="model.json from fit")

    render = sub.add_parser("render-synthetic", help="render a ground-truth video")
    render.add_argument(
        "--scenario", required=True,
        choices=("static", "damped_cosine", "double_pendulum"),
    )
    render.add_argument("--out", required=True, help="output directory")
    render.add_argument("--fps", type=float, default=60.0)
    render.add_argument("--duration", type=float, default=8.0)
    render.add_argument("--size", type=_parse_size, default=None, help="canvas WxH")
    render.add_argument("--marker-size", type=int, default=21)
    render.add_argument("--seed", type=int, default=7)
    render.add_argument("--container", choices=("dir", "raw"), default="dir")
    render.add_argument("--amplitude", type=float, default=40.0, help="pixels")
    render.add_argument("--decay", type=float, default=-0.25, help="1/s")
    render.add_argument("--omega", type=float, default=6.0, help="rad/s")
    render.add_argument("--spin", type=float, default=0.0, help="degrees")
    render.add_argument("--theta1", type=float, default=40.0, help="degrees")
    render.add_argument("--theta2", type=float, default=40.0, help="degrees")
    render.add_argument("--scale", type=float, default=250.0, help="pixels per meter")
    return parser


def _error_payload(exc: VidromError) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, TrackingLostError):
        payload["frame_index"] = exc.frame_index
    if isinstance(exc, DivergenceError):
        payload["time"] = exc.time
    return payload


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()), format="%(message)s"
    )
    try:
        if args.command == "render-synthetic":
            run_render(args)
            return 0
        cfg, _ = load_config(args.config)
        out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
        if args.command == "track":
            run_track(cfg, out_dir)
        elif args.command == "fit":
            run_fit(cfg, out_dir)
        elif args.command == "predict":
            run_predict(cfg, args.document, out_dir)
        elif args.command == "backbone":
            run_backbone(cfg, args.document, out_dir)
        return 0
    except VidromError as exc:
        json.dump(_error_payload(exc), sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
