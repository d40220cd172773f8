"""Command-line drivers for the full pipeline.

Subcommands: gen-mesh, gen-data, svd, train, eval, correct, probe, topopt,
render, report. Each reads one INI config (see config.DEFAULTS for the keys)
plus optional --set section.key=value overrides, and writes its artifacts
into the configured output directory. Exit codes: 0 success, 1 user error,
2 internal failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import corrector, fem, grf, network, reduction, render, storage, topopt
from .config import ExperimentConfig, load_config
from .mesh import classify_boundary, import_gmsh_ascii
from .mesh import build_unit_square_quad, build_voided_square_tri
from .solvers import NewtonConfig, newton_solve


class UserError(Exception):
    """Bad input from the caller: wrong flags, missing files, bad config."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UserError(message)


def _build_mesh(cfg: ExperimentConfig):
    if cfg.mesh_kind == "unit_square":
        return build_unit_square_quad(cfg.mesh_n)
    if cfg.mesh_kind == "voided_square":
        return build_voided_square_tri(cfg.mesh_h, cfg.centers, cfg.radii)
    if cfg.mesh_kind == "msh":
        if not cfg.msh_path:
            raise UserError("mesh.kind=msh needs mesh.msh_path")
        mesh = import_gmsh_ascii(Path(cfg.msh_path).read_text())
        return classify_boundary(mesh, cfg.problem_id)
    raise UserError(f"unknown mesh.kind {cfg.mesh_kind!r}")


def _problem(cfg: ExperimentConfig):
    if cfg.problem_id == "p1":
        return fem.problem1()
    if cfg.problem_id == "p2":
        return fem.problem2()
    raise UserError(f"unknown problem.id {cfg.problem_id!r}")


def _load_mesh_and_space(cfg: ExperimentConfig):
    path = cfg.out_dir / "mesh.txt"
    if not path.exists():
        raise UserError(f"{path} not found; run gen-mesh first")
    mesh = storage.load_mesh(path)
    problem = _problem(cfg)
    return mesh, problem, fem.make_space(mesh, problem)


def _prior_config(cfg: ExperimentConfig) -> grf.PriorConfig:
    return grf.PriorConfig(
        gamma=cfg.prior_gamma,
        delta=cfg.prior_delta,
        eta_robin=cfg.prior_eta_robin,
        seed=cfg.data_seed,
    )


def cmd_gen_mesh(cfg: ExperimentConfig) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    mesh = _build_mesh(cfg)
    storage.save_mesh(cfg.out_dir / "mesh.txt", mesh)
    print(f"mesh: {mesh.num_nodes} nodes, {mesh.num_elements} {mesh.kind} elements")


def _solve_samples(cfg, problem, space, indices):
    prior = _prior_config(cfg)
    m_cols, u_cols = [], []
    for j, w in zip(indices, grf.sample_indices(space, prior, indices)):
        m = grf.transform_parameter(w, cfg.problem_id)
        try:
            u, _ = newton_solve(problem, m, fem.Field.zeros(space))
        except Exception as exc:
            raise RuntimeError(
                f"forward solve failed for draw {j} of seed {cfg.data_seed}: {exc}"
            ) from exc
        m_cols.append(m.coeffs)
        u_cols.append(u.coeffs)
    return np.column_stack(m_cols), np.column_stack(u_cols)


def cmd_gen_data(cfg: ExperimentConfig) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    mesh, problem, space = _load_mesh_and_space(cfg)
    n = cfg.n_samples
    n_test = n // 4

    m_data, u_data = _solve_samples(cfg, problem, space, range(n))
    ds = reduction.DataSet.from_columns(m_data, u_data, cfg.problem_id, cfg.data_seed)
    storage.save_dataset(cfg.out_dir / "dataset.bin", ds)

    m_t, u_t = _solve_samples(cfg, problem, space, range(n, n + n_test))
    ds_test = reduction.DataSet.from_columns(m_t, u_t, cfg.problem_id, cfg.data_seed)
    storage.save_dataset(cfg.out_dir / "dataset_test.bin", ds_test)

    (cfg.out_dir / "manifest.txt").write_text(cfg.manifest())
    print(f"dataset: {n} samples + {n_test} test samples on {space.ndof} dofs")


def _spectrum_csvs(cfg, name, proj):
    curve = reduction.normalized_spectrum(proj)
    storage.write_csv(
        cfg.out_dir / f"singular_{name}.csv",
        ["index", "sigma_normalized"],
        [(j, float(v)) for j, v in enumerate(curve)],
    )
    marks = []
    for target in (0.1, 0.01):
        j = int(np.argmin(np.abs(curve - target)))
        marks.append((name, target, j, float(curve[j])))
    return marks


def cmd_svd(cfg: ExperimentConfig) -> None:
    ds = storage.load_dataset(cfg.out_dir / "dataset.bin", cfg.problem_id, cfg.data_seed)
    train_idx, _ = network.split_indices(ds.n_samples, cfg.shuffle_seed)
    marks = []
    for name, data, r in (("m", ds.m_data, cfg.r_m), ("u", ds.u_data, cfg.r_u)):
        cols = data[:, train_idx]
        mean = cols.mean(axis=1)
        proj = reduction.truncate(reduction.compute_svd(cols - mean[:, None]), mean, r)
        storage.save_projector(cfg.out_dir / f"proj_{name}.txt", proj)
        marks += _spectrum_csvs(cfg, name, proj)
    storage.write_csv(
        cfg.out_dir / "singular_marks.csv",
        ["data", "target", "index", "sigma_normalized"],
        marks,
    )
    print(f"projectors: r_m={cfg.r_m}, r_u={cfg.r_u} from {len(train_idx)} training columns")


def _load_projectors(cfg):
    for name in ("proj_m", "proj_u"):
        if not (cfg.out_dir / f"{name}.txt").exists():
            raise UserError(f"{cfg.out_dir / name}.txt not found; run svd first")
    return (
        storage.load_projector(cfg.out_dir / "proj_m.txt"),
        storage.load_projector(cfg.out_dir / "proj_u.txt"),
    )


def cmd_train(cfg: ExperimentConfig) -> None:
    ds = storage.load_dataset(cfg.out_dir / "dataset.bin", cfg.problem_id, cfg.data_seed)
    proj_m, proj_u = _load_projectors(cfg)
    net_cfg = network.NetConfig(r_m=cfg.r_m, r_u=cfg.r_u)
    train_cfg = network.TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        init_seed=cfg.init_seed,
        shuffle_seed=cfg.shuffle_seed,
    )
    weights, history = network.train(net_cfg, train_cfg, ds, proj_m, proj_u)
    storage.save_model(cfg.out_dir / "model.txt", weights, proj_m, proj_u)
    storage.write_csv(
        cfg.out_dir / "history.csv",
        ["epoch", "train_loss", "val_loss"],
        [(k, float(tr), float(vl)) for k, (tr, vl) in enumerate(history)],
    )
    print(f"trained {cfg.epochs} epochs; final train loss {history[-1][0]:.6g}")


def cmd_eval(cfg: ExperimentConfig) -> None:
    mesh, problem, space = _load_mesh_and_space(cfg)
    proj_m, proj_u = _load_projectors(cfg)
    weights = storage.load_model(cfg.out_dir / "model.txt", proj_m, proj_u)
    ds_test = storage.load_dataset(cfg.out_dir / "dataset_test.bin", cfg.problem_id, cfg.data_seed)

    k = min(cfg.eval_samples, ds_test.n_samples)
    m_cols = ds_test.m_data[:, :k]
    u_cols = ds_test.u_data[:, :k]
    plain = network.evaluate(weights, m_cols, u_cols)

    corrected = []
    for j in range(k):
        m = fem.Field(space, m_cols[:, j])
        u_nn = fem.Field(space, network.forward(weights, m_cols[:, j]))
        u_c = corrector.correct(problem, m, u_nn).u_corrected
        corrected.append(100.0 * np.linalg.norm(u_cols[:, j] - u_c.coeffs) / np.linalg.norm(u_cols[:, j]))
    corrected = np.asarray(corrected)

    row = (
        1,
        cfg.r_m,
        cfg.r_u,
        cfg.n_samples,
        plain.min,
        plain.max,
        plain.mean,
        float(corrected.min()),
        float(corrected.max()),
        float(corrected.mean()),
    )
    storage.write_csv(
        cfg.out_dir / "eval.csv",
        ["number", "r_m", "r_u", "N", "enn_min", "enn_max", "enn_mean", "ecnn_min", "ecnn_max", "ecnn_mean"],
        [row],
    )
    print(f"eval over {k} samples: mean {plain.mean:.4f}% plain, {corrected.mean():.4f}% corrected")


def cmd_correct(cfg: ExperimentConfig, index: int) -> None:
    mesh, problem, space = _load_mesh_and_space(cfg)
    proj_m, proj_u = _load_projectors(cfg)
    weights = storage.load_model(cfg.out_dir / "model.txt", proj_m, proj_u)
    ds_test = storage.load_dataset(cfg.out_dir / "dataset_test.bin", cfg.problem_id, cfg.data_seed)
    if not 0 <= index < ds_test.n_samples:
        raise UserError(f"sample index {index} outside the test set (size {ds_test.n_samples})")

    m = fem.Field(space, ds_test.m_data[:, index])
    u_ref = ds_test.u_data[:, index]
    u_nn = fem.Field(space, network.forward(weights, m.coeffs))
    res = corrector.correct(problem, m, u_nn)
    storage.save_field(cfg.out_dir / f"sample{index}_u_nn.txt", u_nn)
    storage.save_field(cfg.out_dir / f"sample{index}_u_corrected.txt", res.u_corrected)
    e_nn = 100.0 * np.linalg.norm(u_ref - u_nn.coeffs) / np.linalg.norm(u_ref)
    e_c = 100.0 * np.linalg.norm(u_ref - res.u_corrected.coeffs) / np.linalg.norm(u_ref)
    print(f"sample {index}: {e_nn:.4f}% plain, {e_c:.6f}% corrected")


def cmd_probe(cfg: ExperimentConfig) -> None:
    mesh, problem, space = _load_mesh_and_space(cfg)
    prior = _prior_config(cfg)
    m = grf.transform_parameter(grf.sample(space, prior, 1)[0], cfg.problem_id)

    rng = np.random.default_rng(cfg.probe_seed)
    w = rng.standard_normal(space.ndof)
    w[space.dirichlet_dofs] = 0.0
    w /= np.linalg.norm(w)
    rows = corrector.error_scaling_probe(problem, m, fem.Field(space, w), cfg.probe_eps)
    storage.write_csv(cfg.out_dir / "probe.csv", ["eps", "err_before", "err_after"], rows)
    logs = np.log([(r[1], r[2]) for r in rows])
    slope = np.polyfit(logs[:, 0], logs[:, 1], 1)[0]
    print(f"probe slope {slope:.3f} over eps {cfg.probe_eps}")


def cmd_topopt(cfg: ExperimentConfig) -> None:
    mesh, problem, space = _load_mesh_and_space(cfg)
    if cfg.problem_id != "p2":
        raise UserError("topopt needs problem.id = p2")
    top_cfg = topopt.TopOptConfig(
        eta=cfg.topopt_eta,
        m_lower=cfg.topopt_m_lower,
        m_tol=cfg.topopt_m_tol,
        gamma_tol=cfg.topopt_gamma_tol,
        n_max=cfg.topopt_n_max,
        lambda0=cfg.topopt_lambda0,
        m0=cfg.topopt_m0,
        forward_mode=cfg.forward_mode,
    )
    weights = None
    if cfg.forward_mode in ("nn", "nn_corrected"):
        proj_m, proj_u = _load_projectors(cfg)
        weights = storage.load_model(cfg.out_dir / "model.txt", proj_m, proj_u)
    forward = topopt.make_forward(cfg.forward_mode, problem, space, weights)
    result = topopt.outer_iteration(problem, space, top_cfg, forward)

    subdir = cfg.out_dir / f"topopt_{cfg.forward_mode}"
    subdir.mkdir(parents=True, exist_ok=True)
    storage.write_csv(
        subdir / "history.csv",
        ["iter", "J", "mbar", "lambda"],
        [(k, *map(float, row)) for k, row in enumerate(result.history)],
    )
    storage.save_field(subdir / "m.txt", result.m)
    storage.save_field(subdir / "u.txt", result.u)
    state = "converged" if result.converged else "hit the iteration cap"
    print(
        f"topopt[{cfg.forward_mode}] {state} after {result.iterations} steps; "
        f"J={result.history[-1][0]:.6g}, mbar={result.history[-1][1]:.4f}"
    )


def cmd_render(cfg: ExperimentConfig, field_path: str) -> None:
    mesh_path = cfg.out_dir / "mesh.txt"
    if not mesh_path.exists():
        raise UserError(f"{mesh_path} not found; run gen-mesh first")
    mesh = storage.load_mesh(mesh_path)
    values = storage.load_field_coeffs(field_path)
    if len(values) != mesh.num_nodes:
        raise UserError("field length does not match the mesh")
    stem = Path(field_path).with_suffix("")
    render.render_field(mesh, values, f"{stem}.svg", f"{stem}.csv")
    print(f"rendered {field_path} -> {stem}.svg, {stem}.csv")


def cmd_report(cfg: ExperimentConfig) -> None:
    eval_rows = []
    for path in sorted(cfg.out_dir.glob("**/eval.csv")):
        lines = path.read_text().splitlines()
        eval_rows += lines[1:]
    if eval_rows:
        header = "number,r_m,r_u,N,enn_min,enn_max,enn_mean,ecnn_min,ecnn_max,ecnn_mean"
        body = [",".join([str(k + 1)] + row.split(",")[1:]) for k, row in enumerate(eval_rows)]
        (cfg.out_dir / "table_accuracy.csv").write_text("\n".join([header] + body) + "\n")

    dumps = {mode: cfg.out_dir / f"topopt_{mode}" for mode in ("fem", "nn", "nn_corrected")}
    if all((d / "m.txt").exists() for d in dumps.values()):
        mesh, problem, space = _load_mesh_and_space(cfg)
        fields = {
            mode: (
                storage.load_field(d / "m.txt", space),
                storage.load_field(d / "u.txt", space),
            )
            for mode, d in dumps.items()
        }
        errs = topopt.minimizer_errors(
            fields["fem"][0],
            fields["nn"][0],
            fields["nn_corrected"][0],
            fields["fem"][1],
            fields["nn"][1],
            fields["nn_corrected"][1],
        )
        storage.write_csv(
            cfg.out_dir / "table_minimizers.csv",
            ["eps_m_nn", "eps_m_nn_corr", "e_u_nn", "e_u_nn_corr"],
            [tuple(float(v) for v in errs)],
        )
        print("minimizer errors (%):", ", ".join(f"{v:.4f}" for v in errs))
    elif not eval_rows:
        raise UserError("nothing to report: no eval.csv and no complete topopt trio")


def make_parser() -> _Parser:
    parser = _Parser(prog="corrop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("-c", "--config", default=None, help="INI config file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        return p

    add("gen-mesh", help="build or import the mesh")
    add("gen-data", help="sample the prior and solve the forward problem")
    add("svd", help="build truncated projectors from the training split")
    add("train", help="train the reduced-space surrogate")
    add("eval", help="test-set accuracy of the surrogate and its correction")
    p = add("correct", help="correct one test sample and dump the fields")
    p.add_argument("--index", type=int, default=0)
    add("probe", help="error-contraction probe of the correction")
    add("topopt", help="run the topology optimization in the configured mode")
    p = add("render", help="render a field dump to SVG + CSV")
    p.add_argument("--field", required=True)
    add("report", help="collect evaluation and minimizer-error tables")
    return parser


_COMMANDS = {
    "gen-mesh": cmd_gen_mesh,
    "gen-data": cmd_gen_data,
    "svd": cmd_svd,
    "train": cmd_train,
    "eval": cmd_eval,
    "probe": cmd_probe,
    "topopt": cmd_topopt,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        parser = make_parser()
        args = parser.parse_args(argv)
        cfg = load_config(args.config, args.set)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "correct":
            cmd_correct(cfg, args.index)
        elif args.command == "render":
            cmd_render(cfg, args.field)
        else:
            _COMMANDS[args.command](cfg)
        return 0
    except (UserError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
