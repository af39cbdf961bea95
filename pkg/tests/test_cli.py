"""End-to-end tests for the command line pipeline."""

import json

import numpy as np
import pytest

from vidrom import (
    Frame,
    FrameSequence,
    load_document,
    load_frame_sequence,
    read_series_csv,
    read_track_csv,
    reproducibility_hash,
    save_frame_directory,
    write_series_csv,
)
from vidrom.cli import main


def render_static(tmp_path):
    """A 16-frame static marker video, 100x80 canvas, marker centered."""
    out = tmp_path / "vid"
    rc = main([
        "render-synthetic", "--scenario", "static", "--out", str(out),
        "--fps", "30", "--duration", "0.5", "--size", "100x80",
        "--marker-size", "13",
    ])
    assert rc == 0
    return out


# marker is 13 px, centered at (50, 40), so the template box anchors at (44, 34)
STATIC_TRACK_CONFIG = """\
frames = {frames}
fps = 30
template_x0 = 44
template_y0 = 34
template_width = 13
template_height = 13
theta_min = 0
theta_max = 0
"""


def write_damped_cosine_csv(path, n=400, dt=1.0 / 60.0, gamma=-0.3, omega=6.0):
    t = np.arange(n) * dt
    x = 100.0 + 30.0 * np.exp(gamma * t) * np.cos(omega * t)
    write_series_csv(path, t, x[:, None], ["x"])


# the rendered oscillator rests at pixel 100; supplying that beats estimating
# it from the tail, which has not fully rung down over the clip
FIT_CONFIG = """\
train_csv = {train}
embed_channels = x
embed_copies = 5
manifold_dim = 2
manifold_order = 3
dynamics_order = 3
normalform_order = 3
fixed_point_policy = supplied
fixed_point_value = 100
test_csv = {test}
backbone_samples = 24
"""

# tracked positions are integer pixels; the derivative noise that quantization
# injects swamps cubic terms, so the video fit stays at linear order
PIPELINE_FIT_CONFIG = """\
train_csv = {train}
embed_channels = x
embed_copies = 5
manifold_dim = 2
manifold_order = 3
dynamics_order = 1
normalform_order = 1
fixed_point_policy = supplied
fixed_point_value = 100
test_csv = {test}
backbone_samples = 24
"""


def test_render_static_layout(tmp_path):
    out = render_static(tmp_path)
    frames = sorted((out / "frames").iterdir())
    assert len(frames) == 16  # 0.5 s at 30 fps, both endpoints included
    assert frames[0].name == "frame_000000.pgm"
    truth = read_series_csv(out / "truth.csv", ("x", "y", "theta"))
    assert truth.values.shape == (16, 3)
    assert np.all(truth.values[:, 0] == 50.0)
    assert np.all(truth.values[:, 1] == 40.0)
    assert np.all(truth.values[:, 2] == 0.0)


def test_track_recovers_static_truth(tmp_path):
    out = render_static(tmp_path)
    cfg = tmp_path / "track.cfg"
    cfg.write_text(STATIC_TRACK_CONFIG.format(frames=out / "frames"))
    run = tmp_path / "run"
    assert main(["track", "--config", str(cfg), "--out", str(run)]) == 0
    series = read_track_csv(run / "track.csv")
    assert series.xs.shape == (16,)
    # reported positions are the template anchor, the box centre by default
    assert np.all(series.xs == 50.0)
    assert np.all(series.ys == 40.0)
    assert np.all(series.thetas == 0.0)
    assert np.all(series.scores < 1e-10)
    assert series.times[1] == pytest.approx(1.0 / 30.0, abs=1e-6)


def test_out_dir_comes_from_config_when_flag_absent(tmp_path, monkeypatch):
    out = render_static(tmp_path)
    cfg = tmp_path / "track.cfg"
    cfg.write_text(
        STATIC_TRACK_CONFIG.format(frames=out / "frames") + "out_dir = results\n"
    )
    monkeypatch.chdir(tmp_path)
    assert main(["track", "--config", str(cfg)]) == 0
    assert (tmp_path / "results" / "track.csv").exists()


def test_render_raw_container_round_trip(tmp_path):
    out = tmp_path / "vid"
    rc = main([
        "render-synthetic", "--scenario", "double_pendulum", "--out", str(out),
        "--fps", "30", "--duration", "1", "--container", "raw",
    ])
    assert rc == 0
    assert (out / "video.raw").exists()
    assert (out / "video.raw.hdr").exists()
    seq = load_frame_sequence(out / "video.raw")
    assert len(seq) == 31
    assert seq.frame_rate == 30.0
    truth = read_series_csv(out / "truth.csv", ("x", "y", "theta"))
    assert truth.values.shape == (31, 3)
    # theta column reports the second link angle, launched at 40 degrees
    assert truth.values[0, 2] == pytest.approx(40.0)


def test_full_pipeline_recovers_damped_oscillator(tmp_path):
    vid = tmp_path / "vid"
    rc = main([
        "render-synthetic", "--scenario", "damped_cosine", "--out", str(vid),
        "--fps", "60", "--duration", "8", "--size", "200x100",
        "--marker-size", "13", "--amplitude", "30", "--decay", "-0.3",
        "--omega", "6",
    ])
    assert rc == 0
    # first marker position is (100 + 30, 50); the box anchor sits 6 px up-left
    track_cfg = tmp_path / "track.cfg"
    track_cfg.write_text(
        "frames = {}\nfps = 60\n"
        "template_x0 = 124\ntemplate_y0 = 44\n"
        "template_width = 13\ntemplate_height = 13\n"
        "theta_min = 0\ntheta_max = 0\n".format(vid / "frames")
    )
    run = tmp_path / "run"
    assert main(["track", "--config", str(track_cfg), "--out", str(run)]) == 0
    series = read_track_csv(run / "track.csv")
    truth = read_series_csv(vid / "truth.csv", ("x", "y"))
    assert series.xs.shape == (481,)
    # the anchor sits at the marker centre; tracking must be pixel-exact here
    assert np.all(series.xs == truth.values[:, 0])
    assert np.all(series.ys == truth.values[:, 1])

    fit_cfg = tmp_path / "fit.cfg"
    fit_cfg.write_text(
        PIPELINE_FIT_CONFIG.format(train=run / "track.csv", test=run / "track.csv")
    )
    assert main(["fit", "--config", str(fit_cfg), "--out", str(run)]) == 0
    doc = load_document(run / "model.json")
    assert doc.embedding["channels"] == ["x"]
    assert doc.polar is not None
    gamma0 = doc.polar.decay[0][0]
    omega0 = doc.polar.frequency[0][0]
    assert gamma0 == pytest.approx(-0.3, rel=0.05)
    assert abs(omega0) == pytest.approx(6.0, rel=0.02)

    assert main([
        "predict", "--config", str(fit_cfg), "--document", str(run / "model.json"),
        "--out", str(run),
    ]) == 0
    values = json.loads((run / "prediction_metrics.json").read_text())
    assert values["cnmte"] < 0.05
    assert values["ermse"] < 0.05
    assert values["compared_samples"] == 477  # 481 samples - 4 delay copies
    pred = read_series_csv(run / "prediction.csv", ("x",))
    assert pred.values.shape == (477, 1)
    # back in pixel units: the motion stays inside the rendered swing
    assert np.all(np.abs(pred.values[:, 0] - 100.0) < 40.0)

    assert main([
        "backbone", "--config", str(fit_cfg), "--document", str(run / "model.json"),
        "--out", str(run),
    ]) == 0
    lines = (run / "backbone.csv").read_text().splitlines()
    assert lines[0] == "rho,decay,frequency,amplitude"
    assert len(lines) == 25  # header + backbone_samples rows
    table = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.all(np.diff(table[:, 0]) > 0)  # rho strictly increasing
    assert table[0, 0] == 0.0
    assert table[0, 1] == pytest.approx(gamma0)
    assert abs(table[0, 2]) == pytest.approx(abs(omega0))
    assert table[0, 3] == 0.0
    assert np.all(np.diff(table[:, 3]) > 0)  # amplitude grows with rho


def test_fit_is_reproducible(tmp_path):
    train = tmp_path / "train.csv"
    write_damped_cosine_csv(train)
    cfg = tmp_path / "fit.cfg"
    cfg.write_text(FIT_CONFIG.format(train=train, test=train))
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    doc_a = load_document(tmp_path / "a" / "model.json")
    doc_b = load_document(tmp_path / "b" / "model.json")
    assert reproducibility_hash(doc_a.to_dict()) == reproducibility_hash(doc_b.to_dict())


def payload_from(capsys):
    err = capsys.readouterr().err
    return json.loads(err.strip().splitlines()[-1])


def test_missing_config_file_reports_json_error(tmp_path, capsys):
    rc = main(["track", "--config", str(tmp_path / "nope.cfg")])
    assert rc == 1
    payload = payload_from(capsys)
    assert payload["error"] == "ConfigError"
    assert "nope.cfg" in payload["message"]


def test_missing_required_key_reports_config_error(tmp_path, capsys):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text("fps = 30\n")
    rc = main(["fit", "--config", str(cfg)])
    assert rc == 1
    payload = payload_from(capsys)
    assert payload["error"] == "ConfigError"
    assert "train_csv" in payload["message"]


def test_load_stage_prefixes_missing_csv(tmp_path, capsys):
    cfg = tmp_path / "fit.cfg"
    cfg.write_text(FIT_CONFIG.format(train=tmp_path / "gone.csv", test="x"))
    rc = main(["fit", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert rc == 1
    payload = payload_from(capsys)
    assert payload["error"] == "InputError"
    assert payload["message"].startswith("[load]")


def test_embed_stage_prefixes_short_series(tmp_path, capsys):
    train = tmp_path / "tiny.csv"
    times = np.arange(3) / 60.0
    write_series_csv(train, times, np.array([[1.0], [2.0], [3.0]]), ["x"])
    cfg = tmp_path / "fit.cfg"
    cfg.write_text(FIT_CONFIG.format(train=train, test=train))
    rc = main(["fit", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert rc == 1
    payload = payload_from(capsys)
    assert payload["error"] == "InputError"
    assert payload["message"].startswith("[embed]")


def test_tracking_lost_payload_carries_frame_index(tmp_path, capsys):
    rng = np.random.default_rng(3)
    textured = Frame(rng.random((40, 50)))
    blank = Frame(np.zeros((40, 50)))
    vid = tmp_path / "frames"
    save_frame_directory(FrameSequence((textured, blank), 30.0), vid)
    cfg = tmp_path / "track.cfg"
    cfg.write_text(
        f"frames = {vid}\nfps = 30\n"
        "template_x0 = 10\ntemplate_y0 = 10\n"
        "template_width = 12\ntemplate_height = 12\n"
        "theta_min = 0\ntheta_max = 0\n"
    )
    rc = main(["track", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert rc == 1
    payload = payload_from(capsys)
    assert payload["error"] == "TrackingLostError"
    assert payload["frame_index"] == 1
    assert "frame 1" in payload["message"]


def test_usage_errors_exit_two(tmp_path):
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["predict", "--config", str(tmp_path / "c.cfg")])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["render-synthetic", "--scenario", "waves", "--out", str(tmp_path)])
    assert err.value.code == 2
