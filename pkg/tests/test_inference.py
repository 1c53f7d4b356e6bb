import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpmap.errors import InitializationError, ValidationError
from vpmap.gmrf import rw_structure, scale_structure
from vpmap.graph import AdjacencyGraph, lattice_graph
from vpmap.inference import (
    MIXING,
    McmcConfig,
    PosteriorDraws,
    SliceShrinkageWarning,
    diagnostics,
    dic_waic,
    effective_sample_size,
    ess_latent_update,
    from_unconstrained,
    run_mcmc,
    split_rhat,
    to_unconstrained,
    vp_table,
)
from vpmap.model import Dataset, Hyperparameters, ModelSpec, simulate_dataset
from vpmap.priors import PriorSpec, TauPCPrior, default_priors


def small_problem(seed=0, itype="IV", iid=False, family="binomial", n1=4, graph=None):
    spec = ModelSpec(family, 1, itype, iid, n1, graph or lattice_graph(2, 2))
    h = Hyperparameters(1.0, 0.3, 0.5, *((0.3, 0.3) if iid else ()))
    exposure = np.full(spec.n2, 200.0) if family == "binomial" else np.full(spec.n_cells, 20.0)
    data = simulate_dataset(h, "prior", exposure, spec, np.random.default_rng(seed), alpha=-1.0)
    return data, spec


def fake_draws(gamma, phi=None):
    gamma = np.atleast_2d(np.asarray(gamma, float))
    hyper = {"tau": np.ones_like(gamma), "gamma": gamma, "phi": gamma if phi is None else np.atleast_2d(phi)}
    return PosteriorDraws(
        hyper_names=("tau", "gamma", "phi"), hyper=hyper, iterations=np.arange(gamma.shape[1]),
        loglik=np.zeros_like(gamma), latent={}, eta_mean=np.zeros(1), acceptance=[], constraint_residual=0.0,
    )


# ---------------------------------------------------------------------------
# elliptical slice step
# ---------------------------------------------------------------------------

def test_ess_preserves_prior_under_flat_likelihood(rng):
    spec = scale_structure(rw_structure(5, 1)).spectrum
    x, ll = np.zeros(5), 0.0
    samples = np.empty((100_000, 5))
    for k in range(samples.shape[0]):
        x, ll = ess_latent_update(x, spec, lambda v: 0.0, rng, ll)
        samples[k] = x
    emp = samples.T @ samples / samples.shape[0]
    scale = np.sqrt(np.outer(np.diag(spec.pinv), np.diag(spec.pinv)))
    assert np.max(np.abs(emp - spec.pinv) / scale) < 0.05


def test_ess_stays_in_subspace(rng):
    spec = scale_structure(rw_structure(6, 2)).spectrum
    target = np.linspace(-1, 1, 6)
    target = spec.project(target)
    x, ll = np.zeros(6), None
    for _ in range(10_000):
        x, ll = ess_latent_update(x, spec, lambda v: -0.5 * np.sum((v - target) ** 2), rng, ll)
        assert spec.null_residual(x) < 1e-10


def test_ess_concentrates_at_peak(rng):
    spec = scale_structure(rw_structure(5, 1)).spectrum
    x_star = spec.project(np.array([1.0, -0.5, 0.3, 0.2, -1.0]))
    s2 = 0.01**2
    x, ll = np.zeros(5), None
    samples = []
    for k in range(20_000):
        x, ll = ess_latent_update(x, spec, lambda v: -0.5 * np.sum((v - x_star) ** 2) / s2, rng, ll)
        if k >= 2_000:
            samples.append(x)
    # posterior mode by direct minimization on the row space
    V = spec.row_basis
    A = V.T @ spec.matrix @ V + np.eye(spec.rank) / s2
    mode = V @ np.linalg.solve(A, V.T @ x_star / s2)
    assert np.max(np.abs(np.mean(samples, axis=0) - mode)) < 2e-3
    assert np.max(np.abs(mode - x_star)) < 1e-3


def test_ess_iid_block(rng):
    x, ll = np.zeros(3), 0.0
    out = np.empty((20_000, 3))
    for k in range(out.shape[0]):
        x, ll = ess_latent_update(x, None, lambda v: 0.0, rng, ll)
        out[k] = x
    np.testing.assert_allclose(np.cov(out.T), np.eye(3), atol=0.05)


def test_ess_shrinkage_warning(rng):
    # every proposal rejected: the bracket collapses and the state is kept
    start = np.array([0.3, -0.3])
    with pytest.warns(SliceShrinkageWarning):
        x, ll = ess_latent_update(start, None, lambda v: -math.inf, rng, 0.0)
    assert np.array_equal(x, start) and ll == 0.0


# ---------------------------------------------------------------------------
# transforms and config
# ---------------------------------------------------------------------------

@given(st.floats(1e-3, 1e3), st.floats(1e-4, 1 - 1e-4), st.floats(1e-4, 1 - 1e-4))
def test_transform_round_trip(tau, gamma, phi):
    names = ("tau", "gamma", "phi")
    h = {"tau": tau, "gamma": gamma, "phi": phi}
    back = from_unconstrained(to_unconstrained(h, names), names)
    for k in names:
        assert abs(back[k] - h[k]) <= 1e-14 * max(1.0, abs(h[k]))


@pytest.mark.parametrize(
    "kwargs", [dict(n_iterations=0), dict(burn_in=100, n_iterations=100), dict(thin=0), dict(n_chains=0), dict(n_iterations=10, burn_in=5, thin=10)]
)
def test_invalid_mcmc_config(kwargs):
    with pytest.raises(ValidationError):
        McmcConfig(**kwargs)


# ---------------------------------------------------------------------------
# full sampler
# ---------------------------------------------------------------------------

CFG = McmcConfig(n_iterations=1500, burn_in=500, thin=2, n_chains=2, seed=11, latent_thin=5)


def test_run_shapes_and_domains():
    data, spec = small_problem()
    d = run_mcmc(data, spec, default_priors(), CFG)
    assert d.n_chains == 2 and d.n_keep == 500
    assert d.iterations[0] == 502 and d.iterations[-1] == 1500
    for n in MIXING[:2]:
        assert np.all((d.hyper[n] > 0) & (d.hyper[n] < 1))
    assert np.all(d.hyper["tau"] > 0)
    assert d.constraint_residual < 1e-9
    assert d.latent["delta"].shape == (2, 100, 16)
    assert d.pointwise_loglik.shape == (2, 500, 16)
    np.testing.assert_allclose(d.pointwise_loglik.sum(axis=2), d.loglik, rtol=1e-12)


def test_determinism_and_seed_sensitivity():
    data, spec = small_problem()
    cfg = replace(CFG, n_chains=1, n_iterations=600, burn_in=100)
    a = run_mcmc(data, spec, default_priors(), cfg)
    b = run_mcmc(data, spec, default_priors(), cfg)
    c = run_mcmc(data, spec, default_priors(), replace(cfg, seed=12))
    for n in a.hyper_names:
        assert a.hyper[n].tobytes() == b.hyper[n].tobytes()
    assert a.latent["delta"].tobytes() == b.latent["delta"].tobytes()
    assert a.hyper["gamma"].tobytes() != c.hyper["gamma"].tobytes()


def test_parallel_chains_match_sequential():
    data, spec = small_problem()
    cfg = replace(CFG, n_iterations=400, burn_in=100)
    a = run_mcmc(data, spec, default_priors(), cfg, jobs=1)
    b = run_mcmc(data, spec, default_priors(), cfg, jobs=2)
    assert a.hyper["gamma"].tobytes() == b.hyper["gamma"].tobytes()


def test_iid_poisson_missing_and_disconnected():
    g = AdjacencyGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
    data, spec = small_problem(iid=True, family="poisson", graph=g, itype="III")
    obs = np.ones(spec.n_cells, bool)
    obs[[0, 7]] = False
    data = Dataset(data.y, data.exposure, data.n1, data.n2, obs, "poisson")
    d = run_mcmc(data, spec, default_priors(include_iid=True), replace(CFG, n_chains=1))
    assert set(d.hyper_names) == {"tau", "gamma", "phi", "psi1", "psi2"}
    assert d.latent["alpha"].shape[-1] == 2
    assert len(vp_table(d).rows) == 8


def test_mismatched_inputs():
    data, spec = small_problem()
    other = ModelSpec("binomial", 1, "IV", False, 5, lattice_graph(2, 2))
    with pytest.raises(ValidationError):
        run_mcmc(data, other, default_priors(), CFG)
    iid_spec = ModelSpec("binomial", 1, "IV", True, 4, lattice_graph(2, 2))
    with pytest.raises(ValidationError):
        run_mcmc(data, iid_spec, default_priors(), CFG)


def test_initialization_error():
    data, spec = small_problem()
    priors = PriorSpec(gamma=default_priors().gamma, tau=TauPCPrior(1e-200), psi1=None, psi2=None)
    with pytest.raises(InitializationError, match="prior medians"):
        run_mcmc(data, spec, priors, CFG)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def test_vp_table_degenerate():
    t = vp_table(fake_draws(np.full(50, 0.3)))
    r = t.row("gamma")
    assert (r.mean, r.q025, r.q975) == pytest.approx((0.3, 0.3, 0.3), abs=1e-15)


def test_vp_table_complements(rng):
    g = rng.uniform(size=(2, 300))
    t = vp_table(fake_draws(g))
    assert t.row("1-gamma").mean == 1.0 - t.row("gamma").mean
    for r in t.rows:
        assert r.q025 <= r.mean <= r.q975
    assert [r.estimator for r in t.rows] == ["1-gamma", "gamma", "phi", "1-phi"]
    assert "psi1 not in model; rows omitted" in t.notes
    lo, hi = np.quantile(g.ravel(), [0.025, 0.975])
    assert t.row("gamma").q025 == lo and t.row("1-gamma").q975 == 1 - lo


def test_vp_table_empty():
    with pytest.raises(ValidationError):
        vp_table(fake_draws(np.zeros((1, 0))))


def test_dic_identical_draws():
    data, spec = small_problem()
    d = run_mcmc(data, spec, default_priors(), replace(CFG, n_chains=1))
    pw = np.broadcast_to(d.pointwise_loglik[:, :1, :], d.pointwise_loglik.shape).copy()
    eta0 = d.eta_mean
    from vpmap.model import log_likelihood

    pw[:] = log_likelihood(data, eta0, pointwise=True)
    d.pointwise_loglik = pw
    ic = dic_waic(d, data, spec)
    assert abs(ic.p_d) < 1e-9 and math.isclose(ic.dic, ic.deviance, rel_tol=1e-12)
    assert abs(ic.p_waic) < 1e-12


def test_dic_waic_sanity():
    data, spec = small_problem()
    d = run_mcmc(data, spec, default_priors(), replace(CFG, n_chains=1))
    ic = dic_waic(d, data, spec)
    assert ic.p_waic >= 0 and ic.p_d > 0
    assert ic.waic >= -2 * ic.lppd


def test_dic_warns_for_few_draws():
    data, spec = small_problem()
    d = run_mcmc(data, spec, default_priors(), McmcConfig(n_iterations=100, burn_in=10, thin=2, seed=1))
    with pytest.warns(RuntimeWarning, match="unstable"):
        dic_waic(d, data, spec)


def test_rhat_and_effective_size(rng):
    x = rng.standard_normal((4, 2000))
    assert abs(split_rhat(x) - 1) < 0.01
    assert 1500 < effective_sample_size(x[0]) < 2600
    ar = np.empty(5000)
    ar[0] = 0
    for k in range(1, 5000):
        ar[k] = 0.9 * ar[k - 1] + rng.standard_normal()
    assert effective_sample_size(ar) < 600
    shifted = x + np.array([[0], [0], [0], [3]])
    assert split_rhat(shifted) > 1.1


def test_diagnostics_keys():
    data, spec = small_problem()
    d = run_mcmc(data, spec, default_priors(), CFG)
    diag = diagnostics(d)
    assert set(diag["rhat"]) == set(d.hyper_names)
    assert diag["constraint_residual"] < 1e-9
    acc = d.acceptance[0]
    assert 0 < acc["hyper"] < 1 and 0 < acc["hyper_centered"] < 1 and 0 < acc["alpha"] < 1
