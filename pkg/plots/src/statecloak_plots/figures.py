"""Render figures from statecloak CLI output tables.

One figure per invocation, described by a JSON FigureSpec:

    {"kind": "var-profile", "inputs": ["profile.csv"],
     "output": "figures/profile.png",
     "xlabel": "codeword z", "ylabel": "Var(X | Z=z)"}

Four kinds are supported; the kind fixes the required input columns:

    var-profile   CSV with columns z, var (from `statecloak var-profile`);
                  annotates the minimum row.
    theta-sweep   CSV with columns theta, D_W (from `statecloak
                  worstcase-sweep`); annotates the maximum row.
    dw-vs-k       CSV with columns k, D_W_star (from `statecloak
                  optimize-theta`); step curve approaching 1.
    trajectories  trajectory JSON {"states": [[...], ...]} plus a mirror
                  JSON {"S": [[...]], "b": [...]}; draws the trajectory,
                  its mirrored image, and the reflection subspace.

Rendering is read-only on its inputs and writes both a PNG and an SVG
next to the requested output path. Output pixel dimensions are fixed by
the FigureSpec alone. Validation problems (missing file, missing
columns, empty table) raise before any image file is created.
"""

import argparse
import csv
import dataclasses
import json
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("var-profile", "dw-vs-k", "theta-sweep", "trajectories")

_FIGSIZE = (6.4, 4.8)
_DPI = 120

_DEFAULT_LABELS = {
    "var-profile": ("codeword z", "posterior variance"),
    "dw-vs-k": ("key bits k", "optimal worst-case distortion"),
    "theta-sweep": ("window half-width theta", "worst-case distortion"),
    "trajectories": ("coordinate 1", "coordinate 2"),
}


class FigureSpecError(ValueError):
    """The FigureSpec or its input files fail validation."""


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    output: str
    xlabel: str = None
    ylabel: str = None
    title: str = None

    _FIELDS = ("kind", "inputs", "output", "xlabel", "ylabel", "title")

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureSpecError(
                f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise FigureSpecError("inputs must name at least one file")
        if not self.output:
            raise FigureSpecError("output image path is required")

    @classmethod
    def from_dict(cls, doc: dict) -> "FigureSpec":
        unknown = sorted(set(doc) - set(cls._FIELDS))
        if unknown:
            raise FigureSpecError(f"unknown FigureSpec fields: {unknown}")
        missing = sorted({"kind", "inputs", "output"} - set(doc))
        if missing:
            raise FigureSpecError(f"missing FigureSpec fields: {missing}")
        inputs = doc["inputs"]
        if isinstance(inputs, str):
            inputs = [inputs]
        return cls(kind=doc["kind"], inputs=tuple(inputs),
                   output=doc["output"], xlabel=doc.get("xlabel"),
                   ylabel=doc.get("ylabel"), title=doc.get("title"))

    def labels(self):
        dx, dy = _DEFAULT_LABELS[self.kind]
        return (self.xlabel or dx, self.ylabel or dy)

    def output_paths(self):
        stem = self.output
        for ext in (".png", ".svg"):
            if stem.endswith(ext):
                stem = stem[: -len(ext)]
        return stem + ".png", stem + ".svg"


def _read_table(path: str, required: tuple) -> dict:
    """Columns of a CSV as float arrays; validates header and non-emptiness."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FigureSpecError(f"cannot read input {path!r}: {exc}") from exc
    if not rows:
        raise FigureSpecError(f"input {path!r} is empty")
    header, body = rows[0], rows[1:]
    missing = sorted(set(required) - set(header))
    if missing:
        raise FigureSpecError(
            f"input {path!r} is missing required columns: {missing}")
    if not body:
        raise FigureSpecError(f"input {path!r} has no data rows")
    cols = {}
    for name in required:
        i = header.index(name)
        try:
            cols[name] = np.array([float(r[i]) for r in body])
        except (IndexError, ValueError) as exc:
            raise FigureSpecError(
                f"input {path!r} column {name!r} is not numeric") from exc
    return cols


def _read_json(path: str, required: tuple) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FigureSpecError(f"cannot read input {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FigureSpecError(f"input {path!r} is not valid JSON") from exc
    missing = sorted(set(required) - set(doc))
    if missing:
        raise FigureSpecError(
            f"input {path!r} is missing required keys: {missing}")
    return doc


def _orthonormal_rows(S: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(S.T)
    return (q * np.sign(np.diag(r))).T


def _mirror_states(states: np.ndarray, S: np.ndarray, b: np.ndarray):
    return states - 2.0 * (states @ S.T - b) @ S


def _new_figure(projection=None):
    fig = plt.figure(figsize=_FIGSIZE, dpi=_DPI)
    ax = fig.add_subplot(111, projection=projection)
    return fig, ax


def _save(fig, spec: FigureSpec):
    png, svg = spec.output_paths()
    fig.savefig(png, dpi=_DPI)
    fig.savefig(svg)
    plt.close(fig)
    return [png, svg]


def _render_var_profile(spec: FigureSpec):
    cols = _read_table(spec.inputs[0], ("z", "var"))
    z, var = cols["z"], cols["var"]
    i = int(np.argmin(var))
    fig, ax = _new_figure()
    ax.plot(z, var, lw=1.2)
    ax.plot([z[i]], [var[i]], "v", ms=7, color="crimson")
    ax.annotate(f"min {var[i]:.4f} at z={z[i]:.3f}", (z[i], var[i]),
                textcoords="offset points", xytext=(8, 10), fontsize=9)
    return fig, ax, {"minimum": {"z": float(z[i]), "var": float(var[i])}}


def _render_theta_sweep(spec: FigureSpec):
    cols = _read_table(spec.inputs[0], ("theta", "D_W"))
    theta, dw = cols["theta"], cols["D_W"]
    i = int(np.argmax(dw))
    fig, ax = _new_figure()
    ax.plot(theta, dw, marker=".", lw=1.2)
    ax.plot([theta[i]], [dw[i]], "^", ms=7, color="crimson")
    ax.annotate(f"max {dw[i]:.4f} at theta={theta[i]:.3f}", (theta[i], dw[i]),
                textcoords="offset points", xytext=(8, -14), fontsize=9)
    return fig, ax, {"maximum": {"theta": float(theta[i]), "D_W": float(dw[i])}}


def _render_dw_vs_k(spec: FigureSpec):
    cols = _read_table(spec.inputs[0], ("k", "D_W_star"))
    order = np.argsort(cols["k"])
    k, dw = cols["k"][order], cols["D_W_star"][order]
    fig, ax = _new_figure()
    ax.step(k, dw, where="post", lw=1.2)
    ax.plot(k, dw, "o", ms=5)
    ax.axhline(1.0, ls="--", lw=0.8, color="gray")
    ax.set_xticks(k)
    ax.set_ylim(0.0, 1.05)
    return fig, ax, {"points": [{"k": float(a), "D_W_star": float(d)}
                                for a, d in zip(k, dw)]}


def _render_trajectories(spec: FigureSpec):
    if len(spec.inputs) != 2:
        raise FigureSpecError(
            "trajectories kind needs two inputs: a trajectory JSON with "
            "'states' and a mirror JSON with 'S' and 'b'")
    traj = _read_json(spec.inputs[0], ("states",))
    mirror = _read_json(spec.inputs[1], ("S", "b"))
    states = np.atleast_2d(np.asarray(traj["states"], dtype=float))
    S = _orthonormal_rows(np.atleast_2d(np.asarray(mirror["S"], dtype=float)))
    b = np.asarray(mirror["b"], dtype=float)
    n = states.shape[1]
    if n not in (2, 3):
        raise FigureSpecError(
            f"trajectories kind draws 2 or 3 coordinates, got {n}")
    if S.shape[1] != n or b.shape != (S.shape[0],):
        raise FigureSpecError(
            f"mirror shapes {S.shape}/{b.shape} do not match state dim {n}")
    mirrored = _mirror_states(states, S, b)

    lo = np.minimum(states.min(axis=0), mirrored.min(axis=0))
    hi = np.maximum(states.max(axis=0), mirrored.max(axis=0))
    pad = 0.1 * np.maximum(hi - lo, 1e-9)
    lo, hi = lo - pad, hi + pad

    fig, ax = _new_figure(projection="3d" if n == 3 else None)
    ax.plot(*states.T, color="black", lw=1.5, label="trajectory")
    ax.plot(*mirrored.T, color="black", lw=1.5, ls="--",
            label="mirrored image")
    _draw_fixed_set(ax, S, b, lo, hi, n)
    ax.legend(loc="best", fontsize=9)
    return fig, ax, {"states": int(states.shape[0]),
                     "mirror_rows": int(S.shape[0])}


def _draw_fixed_set(ax, S, b, lo, hi, n):
    """Draw {x : S x = b}, the set the reflection leaves fixed."""
    x0 = S.T @ b  # the fixed point closest to the origin
    basis = _null_basis(S)
    if n == 2:
        if basis.shape[0] == 1:
            ts = np.linspace(-1.0, 1.0, 2)[:, None] * np.abs(hi - lo).max()
            line = x0 + ts * basis[0]
            ax.plot(line[:, 0], line[:, 1], color="steelblue", lw=1.0,
                    label="reflection axis")
        else:
            ax.plot([x0[0]], [x0[1]], "o", color="steelblue",
                    label="reflection point")
        ax.set_xlim(lo[0], hi[0])
        ax.set_ylim(lo[1], hi[1])
        return
    if basis.shape[0] == 2:
        g = np.linspace(-1.0, 1.0, 8) * np.abs(hi - lo).max()
        uu, vv = np.meshgrid(g, g)
        pts = x0 + uu[..., None] * basis[0] + vv[..., None] * basis[1]
        ax.plot_surface(pts[..., 0], pts[..., 1], pts[..., 2],
                        alpha=0.25, color="steelblue", linewidth=0)
    elif basis.shape[0] == 1:
        ts = np.linspace(-1.0, 1.0, 2)[:, None] * np.abs(hi - lo).max()
        line = x0 + ts * basis[0]
        ax.plot(line[:, 0], line[:, 1], line[:, 2], color="steelblue",
                lw=1.2, label="reflection axis")
    else:
        ax.plot([x0[0]], [x0[1]], [x0[2]], "o", color="steelblue",
                label="reflection point")
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_zlim(lo[2], hi[2])


def _null_basis(S: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the nullspace of S."""
    _, sing, vt = np.linalg.svd(S, full_matrices=True)
    rank = int((sing > 1e-12).sum())
    return vt[rank:]


_RENDERERS = {
    "var-profile": _render_var_profile,
    "theta-sweep": _render_theta_sweep,
    "dw-vs-k": _render_dw_vs_k,
    "trajectories": _render_trajectories,
}


def render(spec: FigureSpec) -> dict:
    """Validate, draw, and write PNG + SVG.

    Returns {"outputs": [png, svg], "annotations": {...}} where the
    annotations echo whatever the figure highlights (e.g. the minimum
    row of a var-profile), so callers can check the figure against the
    data without parsing the image.
    """
    fig, ax, annotations = _RENDERERS[spec.kind](spec)
    xl, yl = spec.labels()
    ax.set_xlabel(xl)
    ax.set_ylabel(yl)
    if spec.title:
        ax.set_title(spec.title)
    outputs = _save(fig, spec)
    return {"outputs": outputs, "annotations": annotations}


def load_spec(path: str) -> FigureSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FigureSpecError(f"cannot read spec {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FigureSpecError(f"spec {path!r} is not valid JSON") from exc
    if not isinstance(doc, dict):
        raise FigureSpecError("spec must be a JSON object")
    return FigureSpec.from_dict(doc)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="statecloak-plots",
        description="render one figure from a JSON FigureSpec")
    parser.add_argument("--spec", required=True,
                        help="path to the FigureSpec JSON document")
    args = parser.parse_args(argv)
    try:
        result = render(load_spec(args.spec))
    except FigureSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
