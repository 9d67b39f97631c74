"""Figure rendering against tables produced by the statecloak CLI."""

import csv
import json
import subprocess
import sys

import pytest
from PIL import Image

from statecloak_plots import FigureSpec, FigureSpecError, load_spec, render

EXPECTED_PIXELS = (768, 576)  # 6.4 x 4.8 inches at 120 dpi


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "statecloak.cli", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def tables(tmp_path_factory):
    """CSV inputs emitted once by the primary CLI."""
    root = tmp_path_factory.mktemp("tables")
    profile = root / "profile.csv"
    sweep = root / "sweep.csv"
    dwk = root / "dw_vs_k.csv"
    run_cli("var-profile", "--k", "1", "--theta", "1.76",
            "--z-min", "-6", "--z-max", "6", "--z-step", "0.05",
            "--out", str(profile))
    run_cli("worstcase-sweep", "--k", "1", "--theta-min", "0.5",
            "--theta-max", "3.0", "--theta-step", "0.25",
            "--out", str(sweep))
    run_cli("optimize-theta", "--k", "1", "2", "--out", str(dwk))
    return {"profile": profile, "sweep": sweep, "dw_vs_k": dwk}


def spec_for(kind, inputs, out, **extra):
    return FigureSpec.from_dict(
        {"kind": kind, "inputs": [str(p) for p in inputs],
         "output": str(out), **extra})


def csv_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_var_profile_renders_and_annotates_the_minimum(tables, tmp_path):
    src = tables["profile"]
    before = src.read_bytes()
    result = render(spec_for("var-profile", [src], tmp_path / "fig.png"))
    png, svg = result["outputs"]
    assert png.endswith(".png") and svg.endswith(".svg")
    for path in result["outputs"]:
        assert (tmp_path / path.split("/")[-1]).stat().st_size > 0
    assert src.read_bytes() == before

    header, body = csv_rows(src)
    zi, vi = header.index("z"), header.index("var")
    best = min(body, key=lambda r: float(r[vi]))
    annotated = result["annotations"]["minimum"]
    assert annotated["z"] == float(best[zi])
    assert annotated["var"] == float(best[vi])
    assert annotated["var"] == pytest.approx(0.4477, abs=1e-3)


def test_dw_vs_k_renders(tables, tmp_path):
    src = tables["dw_vs_k"]
    before = src.read_bytes()
    result = render(spec_for("dw-vs-k", [src], tmp_path / "dwk"))
    assert src.read_bytes() == before
    points = result["annotations"]["points"]
    assert [p["k"] for p in points] == [1.0, 2.0]
    assert points[0]["D_W_star"] < points[1]["D_W_star"] < 1.0
    for path in result["outputs"]:
        assert path.endswith((".png", ".svg"))


def test_theta_sweep_renders_and_annotates_the_maximum(tables, tmp_path):
    src = tables["sweep"]
    result = render(spec_for("theta-sweep", [src], tmp_path / "sweep.svg",
                             title="one key bit"))
    header, body = csv_rows(src)
    ti, di = header.index("theta"), header.index("D_W")
    best = max(body, key=lambda r: float(r[di]))
    annotated = result["annotations"]["maximum"]
    assert annotated["theta"] == float(best[ti])
    assert annotated["D_W"] == float(best[di])


def test_png_dimensions_are_deterministic(tables, tmp_path):
    sizes = []
    for name in ("a", "b"):
        result = render(spec_for("var-profile", [tables["profile"]],
                                 tmp_path / f"{name}.png"))
        with Image.open(result["outputs"][0]) as im:
            sizes.append(im.size)
    assert sizes[0] == sizes[1] == EXPECTED_PIXELS


def test_axis_labels_come_from_the_figure_spec(tables, tmp_path):
    spec = spec_for("var-profile", [tables["profile"]], tmp_path / "fig",
                    xlabel="Z", ylabel="Var")
    assert spec.labels() == ("Z", "Var")
    default = spec_for("var-profile", [tables["profile"]], tmp_path / "fig")
    assert default.labels() == ("codeword z", "posterior variance")
    render(spec)


def test_missing_columns_are_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("theta,D_W\n1.0,0.4\n")
    with pytest.raises(FigureSpecError) as err:
        render(spec_for("var-profile", [bad], tmp_path / "fig.png"))
    assert "'var'" in str(err.value) and "'z'" in str(err.value)
    assert not (tmp_path / "fig.png").exists()


def test_empty_csv_is_rejected_without_writing(tmp_path):
    for text in ("", "z,var\n"):
        empty = tmp_path / "empty.csv"
        empty.write_text(text)
        with pytest.raises(FigureSpecError):
            render(spec_for("var-profile", [empty], tmp_path / "fig.png"))
        assert not (tmp_path / "fig.png").exists()
        assert not (tmp_path / "fig.svg").exists()


def test_trajectories_2d(tmp_path):
    states = [[-1.0 + 0.2 * t, 0.5 + 0.1 * t] for t in range(11)]
    traj = tmp_path / "traj.json"
    traj.write_text(json.dumps({"states": states}))
    mirror = tmp_path / "mirror.json"
    mirror.write_text(json.dumps({"S": [[0.0, 1.0]], "b": [0.0]}))
    before = traj.read_bytes(), mirror.read_bytes()
    result = render(spec_for("trajectories", [traj, mirror],
                             tmp_path / "fig2d.png"))
    assert (traj.read_bytes(), mirror.read_bytes()) == before
    assert result["annotations"] == {"states": 11, "mirror_rows": 1}
    with Image.open(result["outputs"][0]) as im:
        assert im.size == EXPECTED_PIXELS


def test_trajectories_3d_with_plane_and_with_axis(tmp_path):
    states = [[-1.0 + 0.25 * t, 0.3 * t, 1.0 - 0.1 * t] for t in range(9)]
    traj = tmp_path / "traj.json"
    traj.write_text(json.dumps({"states": states}))
    for name, S, b in (("plane", [[1.0, 0.0, 0.0]], [0.0]),
                       ("axis", [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                        [0.0, 0.0])):
        mirror = tmp_path / f"mirror_{name}.json"
        mirror.write_text(json.dumps({"S": S, "b": b}))
        result = render(spec_for("trajectories", [traj, mirror],
                                 tmp_path / f"fig_{name}"))
        assert result["annotations"]["mirror_rows"] == len(S)


def test_trajectories_requires_both_inputs(tmp_path):
    traj = tmp_path / "traj.json"
    traj.write_text(json.dumps({"states": [[0.0, 0.0]]}))
    with pytest.raises(FigureSpecError, match="two inputs"):
        render(spec_for("trajectories", [traj], tmp_path / "fig.png"))
    mirror = tmp_path / "mirror.json"
    mirror.write_text(json.dumps({"S": [[1.0, 0.0]]}))
    with pytest.raises(FigureSpecError, match="'b'"):
        render(spec_for("trajectories", [traj, mirror], tmp_path / "f.png"))


def test_figure_spec_validation():
    with pytest.raises(FigureSpecError, match="unknown figure kind"):
        FigureSpec.from_dict({"kind": "pie", "inputs": ["x"], "output": "y"})
    with pytest.raises(FigureSpecError, match="unknown FigureSpec fields"):
        FigureSpec.from_dict({"kind": "dw-vs-k", "inputs": ["x"],
                              "output": "y", "dpi": 300})
    with pytest.raises(FigureSpecError, match="missing FigureSpec fields"):
        FigureSpec.from_dict({"kind": "dw-vs-k"})


def test_script_entry_point(tables, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "kind": "var-profile", "inputs": [str(tables["profile"])],
        "output": str(tmp_path / "cli_fig.png")}))
    proc = subprocess.run(
        [sys.executable, "-m", "statecloak_plots", "--spec", str(spec)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(proc.stdout)
    assert doc["annotations"]["minimum"]["var"] == pytest.approx(0.4477,
                                                                 abs=1e-3)
    assert (tmp_path / "cli_fig.svg").exists()

    bad = tmp_path / "bad_spec.json"
    bad.write_text(json.dumps({"kind": "nope", "inputs": ["x"],
                               "output": "y"}))
    proc = subprocess.run(
        [sys.executable, "-m", "statecloak_plots", "--spec", str(bad)],
        capture_output=True, text=True)
    assert proc.returncode == 2
    assert "unknown figure kind" in proc.stderr

    assert load_spec(str(spec)).kind == "var-profile"
