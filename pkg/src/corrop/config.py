"""Experiment configuration: an INI file of key = value sections, plus
command-line "--set section.key=value" overrides and an output-directory
override through the CORROP_OUTDIR environment variable.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

DEFAULTS = {
    "problem": {"id": "p1"},
    "mesh": {
        "kind": "unit_square",   # unit_square | voided_square | msh
        "n": "32",
        "h": "0.03",
        "msh_path": "",
        "centers": "0.2,0.8;0.7,0.3",
        "radii": "0.1,0.2",
    },
    "prior": {
        "gamma": "0.08",
        "delta": "2.0",
        "eta_robin": str(1.0 / 1.42),
        "seed": "1",
    },
    "data": {"n_samples": "256"},
    "reduction": {"r_m": "50", "r_u": "25"},
    "training": {
        "epochs": "500",
        "batch_size": "32",
        "learning_rate": "0.001",
        "init_seed": "2",
        "shuffle_seed": "3",
    },
    "topopt": {
        "eta": "0.4",
        "m_lower": "0.001",
        "m_tol": "0.005",
        "gamma_tol": "0.001",
        "n_max": "200",
        "lambda0": "1.0",
        "m0": "0.1",
        "forward_mode": "fem",
    },
    "probe": {"eps": "0.1,0.03,0.01,0.003", "seed": "4"},
    "eval": {"n_samples": "20"},
    "output": {"dir": "out"},
}


@dataclass
class ExperimentConfig:
    """Typed view of one experiment's resolved configuration."""

    problem_id: str
    mesh_kind: str
    mesh_n: int
    mesh_h: float
    msh_path: str
    centers: tuple
    radii: tuple
    prior_gamma: float
    prior_delta: float
    prior_eta_robin: float
    data_seed: int
    n_samples: int
    r_m: int
    r_u: int
    epochs: int
    batch_size: int
    learning_rate: float
    init_seed: int
    shuffle_seed: int
    topopt_eta: float
    topopt_m_lower: float
    topopt_m_tol: float
    topopt_gamma_tol: float
    topopt_n_max: int
    topopt_lambda0: float
    topopt_m0: float
    forward_mode: str
    probe_eps: tuple
    probe_seed: int
    eval_samples: int
    out_dir: Path
    raw: dict = field(default_factory=dict, repr=False)

    def manifest(self) -> str:
        """Resolved key = value dump, one section per block; reruns are byte-stable."""
        lines = []
        for section in sorted(self.raw):
            lines.append(f"[{section}]")
            for key in sorted(self.raw[section]):
                lines.append(f"{key} = {self.raw[section][key]}")
            lines.append("")
        return "\n".join(lines)


def _parse_points(text: str) -> tuple:
    pts = []
    for chunk in text.split(";"):
        xy = chunk.split(",")
        pts.append((float(xy[0]), float(xy[1])))
    return tuple(pts)


def load_config(path=None, overrides: list[str] | None = None) -> ExperimentConfig:
    table = {section: dict(values) for section, values in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            if section not in table:
                raise ValueError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in table[section]:
                    raise ValueError(f"unknown config key {section}.{key}")
                table[section][key] = value
    for item in overrides or []:
        target, _, value = item.partition("=")
        section, _, key = target.partition(".")
        if not value or section not in table or key not in table[section]:
            raise ValueError(f"bad override {item!r}; expected section.key=value")
        table[section][key] = value

    out_dir = os.environ.get("CORROP_OUTDIR") or table["output"]["dir"]
    return ExperimentConfig(
        problem_id=table["problem"]["id"],
        mesh_kind=table["mesh"]["kind"],
        mesh_n=int(table["mesh"]["n"]),
        mesh_h=float(table["mesh"]["h"]),
        msh_path=table["mesh"]["msh_path"],
        centers=_parse_points(table["mesh"]["centers"]),
        radii=tuple(float(v) for v in table["mesh"]["radii"].split(",")),
        prior_gamma=float(table["prior"]["gamma"]),
        prior_delta=float(table["prior"]["delta"]),
        prior_eta_robin=float(table["prior"]["eta_robin"]),
        data_seed=int(table["prior"]["seed"]),
        n_samples=int(table["data"]["n_samples"]),
        r_m=int(table["reduction"]["r_m"]),
        r_u=int(table["reduction"]["r_u"]),
        epochs=int(table["training"]["epochs"]),
        batch_size=int(table["training"]["batch_size"]),
        learning_rate=float(table["training"]["learning_rate"]),
        init_seed=int(table["training"]["init_seed"]),
        shuffle_seed=int(table["training"]["shuffle_seed"]),
        topopt_eta=float(table["topopt"]["eta"]),
        topopt_m_lower=float(table["topopt"]["m_lower"]),
        topopt_m_tol=float(table["topopt"]["m_tol"]),
        topopt_gamma_tol=float(table["topopt"]["gamma_tol"]),
        topopt_n_max=int(table["topopt"]["n_max"]),
        topopt_lambda0=float(table["topopt"]["lambda0"]),
        topopt_m0=float(table["topopt"]["m0"]),
        forward_mode=table["topopt"]["forward_mode"],
        probe_eps=tuple(float(v) for v in table["probe"]["eps"].split(",")),
        probe_seed=int(table["probe"]["seed"]),
        eval_samples=int(table["eval"]["n_samples"]),
        out_dir=Path(out_dir),
        raw=table,
    )
