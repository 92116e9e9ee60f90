"""Versioned structured-text serialization for trained models.

One line-oriented format covers all three model families: a header with a
``format_version`` that gates loading, a config echo, the normalizer, and
the model's matrices written row-major in decimal with 17 significant
digits (lossless float64 round trip). Identical models serialize to
identical bytes, which is what the determinism contracts are tested
against.
"""

from __future__ import annotations

import ast
from pathlib import Path

import numpy as np

from .ann import AnnModel, AnnTrainConfig
from .dataset import Normalizer
from .errors import ToolkitError
from .numerics import AdmmConfig
from .pln import PlnConfig, PlnLayer, PlnModel
from .svm import SvmModel, SvmTrainConfig

FORMAT_VERSION = 1
MAGIC = "abdetect-model"


class ModelFormatError(ToolkitError):
    """Model file is missing, malformed, or from an unsupported version."""


def _fmt(x: float) -> str:
    return f"{float(x):.17e}"


def _fmt_vector(v: np.ndarray) -> str:
    return " ".join(_fmt(x) for x in np.asarray(v, dtype=float).ravel())


def _emit_matrix(lines: list[str], name: str, M: np.ndarray) -> None:
    M = np.asarray(M, dtype=float)
    lines.append(f"[matrix {name} {M.shape[0]} {M.shape[1]}]")
    for row in M:
        lines.append(_fmt_vector(row))


def _emit_vector(lines: list[str], name: str, v: np.ndarray) -> None:
    v = np.asarray(v, dtype=float).ravel()
    lines.append(f"[vector {name} {v.size}]")
    lines.append(_fmt_vector(v))


def _emit_config(lines: list[str], pairs: dict) -> None:
    lines.append("[config]")
    for key, value in pairs.items():
        lines.append(f"{key}: {value!r}")


def _emit_normalizer(lines: list[str], norm: Normalizer) -> None:
    _emit_vector(lines, "normalizer_mean", norm.mean)
    _emit_vector(lines, "normalizer_scale", norm.scale)


def dumps_model(model) -> str:
    """Serialize a PlnModel, AnnModel, or SvmModel to text."""
    lines = [MAGIC, f"format_version: {FORMAT_VERSION}"]
    if isinstance(model, PlnModel):
        cfg = model.config
        admm = cfg.effective_admm
        lines.append("model_type: pln")
        _emit_config(
            lines,
            {
                "lam": cfg.lam,
                "mu": cfg.mu,
                "alpha": cfg.alpha,
                "delta_nodes": cfg.delta_nodes,
                "n_max": cfg.n_max,
                "l_max": cfg.l_max,
                "eta_node": cfg.eta_node,
                "eta_layer": cfg.eta_layer,
                "val_fraction": cfg.val_fraction,
                "admm_mu": admm.mu,
                "admm_max_iters": admm.max_iters,
                "admm_tol_primal": admm.tol_primal,
                "admm_tol_dual": admm.tol_dual,
                "seed": cfg.seed,
            },
        )
        _emit_normalizer(lines, model.normalizer)
        _emit_matrix(lines, "base_map", model.base_map)
        _emit_vector(lines, "costs", np.array(model.costs))
        _emit_vector(lines, "val_scores", np.array(model.val_scores))
        lines.append(f"n_layers: {model.depth}")
        for i, layer in enumerate(model.layers):
            _emit_matrix(lines, f"layer{i}_R", layer.R)
            _emit_matrix(lines, f"layer{i}_O", layer.O)
    elif isinstance(model, AnnModel):
        cfg = model.config
        lines.append("model_type: ann")
        _emit_config(
            lines,
            {
                "learning_rate": cfg.learning_rate,
                "batch_size": cfg.batch_size,
                "epochs": cfg.epochs,
                "seed": cfg.seed,
                "hidden": model.hidden_width,
            },
        )
        _emit_normalizer(lines, model.normalizer)
        _emit_matrix(lines, "W1", model.W1)
        _emit_vector(lines, "b1", model.b1)
        _emit_matrix(lines, "W2", model.W2)
        _emit_vector(lines, "b2", model.b2)
        _emit_vector(lines, "loss_trace", np.array(model.loss_trace))
    elif isinstance(model, SvmModel):
        cfg = model.config
        lines.append("model_type: svm")
        _emit_config(
            lines,
            {
                "C": cfg.C,
                "gamma": cfg.gamma,
                "kkt_tol": cfg.kkt_tol,
                "max_passes": cfg.max_passes,
                "max_train_points": cfg.max_train_points,
                "seed": cfg.seed,
            },
        )
        _emit_normalizer(lines, model.normalizer)
        _emit_matrix(lines, "support_vectors", model.support_vectors)
        _emit_vector(lines, "coeffs", model.coeffs)
        lines.append(f"bias: {_fmt(model.bias)}")
        lines.append(f"gamma: {_fmt(model.gamma)}")
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    lines.append("end")
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.pos = 0

    def next_line(self) -> str:
        if self.pos >= len(self.lines):
            raise ModelFormatError("unexpected end of model file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, prefix: str) -> str:
        line = self.next_line()
        if not line.startswith(prefix):
            raise ModelFormatError(f"expected {prefix!r}, found {line!r}")
        return line[len(prefix) :].strip()

    def read_config(self) -> dict:
        if self.next_line() != "[config]":
            raise ModelFormatError("missing [config] section")
        out = {}
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            if line.startswith("[") or ":" not in line:
                break
            key, _, raw = self.next_line().partition(":")
            try:
                out[key.strip()] = ast.literal_eval(raw.strip())
            except (ValueError, SyntaxError) as exc:
                raise ModelFormatError(f"bad config entry {line!r}") from exc
        return out

    def read_floats(self, expected: int, what: str) -> np.ndarray:
        line = self.next_line()
        parts = line.split() if line else []
        if len(parts) != expected:
            raise ModelFormatError(f"{what}: expected {expected} values, found {len(parts)}")
        try:
            v = np.array([float(p) for p in parts])
        except ValueError as exc:
            raise ModelFormatError(f"{what}: {exc}") from exc
        if not np.isfinite(v).all():
            raise ModelFormatError(f"{what} contains non-finite entries")
        return v

    def read_matrix(self, name: str) -> np.ndarray:
        header = self.expect(f"[matrix {name} ")
        try:
            rows, cols = (int(p) for p in header.rstrip("]").split())
        except ValueError as exc:
            raise ModelFormatError(f"bad matrix header for {name}") from exc
        M = np.empty((rows, cols))
        for r in range(rows):
            M[r] = self.read_floats(cols, f"matrix {name} row {r}")
        return M

    def read_vector(self, name: str) -> np.ndarray:
        header = self.expect(f"[vector {name} ")
        try:
            size = int(header.rstrip("]"))
        except ValueError as exc:
            raise ModelFormatError(f"bad vector header for {name}") from exc
        return self.read_floats(size, f"vector {name}")

    def read_normalizer(self) -> Normalizer:
        mean = self.read_vector("normalizer_mean")
        scale = self.read_vector("normalizer_scale")
        return Normalizer(mean=mean, scale=scale)


def loads_model(text: str):
    """Parse a serialized model; the inverse of :func:`dumps_model`."""
    r = _Reader(text)
    if r.next_line() != MAGIC:
        raise ModelFormatError("not an abdetect model file")
    version = r.expect("format_version:")
    if version != str(FORMAT_VERSION):
        raise ModelFormatError(
            f"unsupported format_version {version}; this build reads version {FORMAT_VERSION}"
        )
    model_type = r.expect("model_type:")
    cfg = r.read_config()
    try:
        return _reconstruct(r, model_type, cfg)
    except KeyError as exc:
        raise ModelFormatError(f"missing config entry {exc}") from exc


def _reconstruct(r: _Reader, model_type: str, cfg: dict):
    if model_type == "pln":
        config = PlnConfig(
            lam=cfg["lam"],
            mu=cfg["mu"],
            alpha=cfg["alpha"],
            delta_nodes=cfg["delta_nodes"],
            n_max=cfg["n_max"],
            l_max=cfg["l_max"],
            eta_node=cfg["eta_node"],
            eta_layer=cfg["eta_layer"],
            val_fraction=cfg["val_fraction"],
            admm=AdmmConfig(
                mu=cfg["admm_mu"],
                max_iters=cfg["admm_max_iters"],
                tol_primal=cfg["admm_tol_primal"],
                tol_dual=cfg["admm_tol_dual"],
            ),
            seed=cfg["seed"],
        )
        norm = r.read_normalizer()
        base = r.read_matrix("base_map")
        costs = list(r.read_vector("costs"))
        val_scores = list(r.read_vector("val_scores"))
        n_layers = int(r.expect("n_layers:"))
        layers = []
        for i in range(n_layers):
            R = r.read_matrix(f"layer{i}_R")
            O = r.read_matrix(f"layer{i}_O")
            layers.append(PlnLayer(R=R, O=O))
        return PlnModel(norm, base, layers, config, costs=costs, val_scores=val_scores)

    if model_type == "ann":
        config = AnnTrainConfig(
            learning_rate=cfg["learning_rate"],
            batch_size=cfg["batch_size"],
            epochs=cfg["epochs"],
            seed=cfg["seed"],
        )
        norm = r.read_normalizer()
        W1 = r.read_matrix("W1")
        b1 = r.read_vector("b1")
        W2 = r.read_matrix("W2")
        b2 = r.read_vector("b2")
        losses = list(r.read_vector("loss_trace"))
        return AnnModel(norm, W1, b1, W2, b2, config=config, loss_trace=losses)

    if model_type == "svm":
        config = SvmTrainConfig(
            C=cfg["C"],
            gamma=cfg["gamma"],
            kkt_tol=cfg["kkt_tol"],
            max_passes=cfg["max_passes"],
            max_train_points=cfg["max_train_points"],
            seed=cfg["seed"],
        )
        norm = r.read_normalizer()
        sv = r.read_matrix("support_vectors")
        coeffs = r.read_vector("coeffs")
        bias = float(r.expect("bias:"))
        gamma = float(r.expect("gamma:"))
        return SvmModel(
            normalizer=norm,
            support_vectors=sv,
            coeffs=coeffs,
            bias=bias,
            gamma=gamma,
            config=config,
        )

    raise ModelFormatError(f"unknown model_type {model_type!r}")


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8", newline="\n")


def load_model(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"no such model file: {path}")
    return loads_model(path.read_text(encoding="utf-8"))
