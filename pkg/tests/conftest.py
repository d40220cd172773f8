"""Shared fixtures; the expensive trained pipelines are session-scoped."""

import numpy as np
import pytest

from corrop import corrector, fem, grf, mesh, network, reduction, solvers, topopt


@pytest.fixture(scope="session")
def p1_space():
    problem = fem.problem1()
    space = fem.make_space(mesh.build_unit_square_quad(16), problem)
    return problem, space


@pytest.fixture(scope="session")
def p2_space():
    problem = fem.problem2()
    space = fem.make_space(mesh.build_voided_square_tri(0.05), problem)
    return problem, space


@pytest.fixture(scope="session")
def p1_state(p1_space):
    """One prior draw with its tightly converged solution."""
    problem, space = p1_space
    w = grf.sample(space, grf.PriorConfig(seed=7), 1)[0]
    m = grf.transform_parameter(w, "p1")
    u_star, _ = solvers.newton_solve(
        problem, m, fem.Field.zeros(space), solvers.NewtonConfig(residual_tol=1e-13)
    )
    return problem, space, m, u_star


def build_pipeline(problem_id, mesh_obj, n_samples, n_test, r_m, r_u, data_seed, epochs=2000):
    """Generate data, fit projectors on the training split, train the surrogate."""
    problem = fem.problem1() if problem_id == "p1" else fem.problem2()
    space = fem.make_space(mesh_obj, problem)
    prior = grf.PriorConfig(seed=data_seed)

    m_cols, u_cols = [], []
    for w in grf.sample_indices(space, prior, range(n_samples + n_test)):
        m = grf.transform_parameter(w, problem_id)
        u, _ = solvers.newton_solve(problem, m, fem.Field.zeros(space))
        m_cols.append(m.coeffs)
        u_cols.append(u.coeffs)
    dataset = reduction.DataSet.from_columns(
        np.column_stack(m_cols[:n_samples]), np.column_stack(u_cols[:n_samples]), problem_id, data_seed
    )
    m_test = np.column_stack(m_cols[n_samples:]) if n_test else None
    u_test = np.column_stack(u_cols[n_samples:]) if n_test else None

    train_idx, _ = network.split_indices(n_samples, seed=3)
    projectors = {}
    for name, data, r in (("m", dataset.m_data, r_m), ("u", dataset.u_data, r_u)):
        cols = data[:, train_idx]
        mean = cols.mean(axis=1)
        projectors[name] = reduction.truncate(reduction.compute_svd(cols - mean[:, None]), mean, r)

    train_cfg = network.TrainConfig(epochs=epochs, init_seed=5, shuffle_seed=3)
    weights, history = network.train(
        network.NetConfig(r_m=r_m, r_u=r_u), train_cfg, dataset, projectors["m"], projectors["u"]
    )
    return {
        "problem": problem,
        "space": space,
        "dataset": dataset,
        "projectors": projectors,
        "weights": weights,
        "history": history,
        "m_test": m_test,
        "u_test": u_test,
    }


@pytest.fixture(scope="session")
def trained_p1():
    """The accuracy-comparison configuration: 32x32 grid, 256 + 64 samples, (50, 25)."""
    return build_pipeline("p1", mesh.build_unit_square_quad(32), 256, 64, 50, 25, data_seed=11)


@pytest.fixture(scope="session")
def trained_p2():
    """Voided-domain surrogate for the optimization comparison."""
    return build_pipeline("p2", mesh.build_voided_square_tri(0.03), 256, 0, 50, 25, data_seed=21)


@pytest.fixture(scope="session")
def topopt_runs(trained_p2):
    """Topology optimization in all three forward modes on the trained surrogate."""
    problem, space, weights = trained_p2["problem"], trained_p2["space"], trained_p2["weights"]
    out = {}
    for mode in ("fem", "nn", "nn_corrected"):
        cfg = topopt.TopOptConfig(forward_mode=mode)
        forward = topopt.make_forward(mode, problem, space, weights)
        out[mode] = topopt.outer_iteration(problem, space, cfg, forward)
    return out


def corrected_errors(pipeline, count):
    """Percentage errors of the surrogate and of its corrected prediction."""
    problem, space, weights = pipeline["problem"], pipeline["space"], pipeline["weights"]
    m_test, u_test = pipeline["m_test"][:, :count], pipeline["u_test"][:, :count]
    plain = network.evaluate(weights, m_test, u_test)
    corrected = []
    for j in range(m_test.shape[1]):
        m = fem.Field(space, m_test[:, j])
        u_nn = fem.Field(space, network.forward(weights, m_test[:, j]))
        u_c = corrector.correct(problem, m, u_nn).u_corrected
        corrected.append(
            100.0 * np.linalg.norm(u_test[:, j] - u_c.coeffs) / np.linalg.norm(u_test[:, j])
        )
    return plain, np.asarray(corrected)
