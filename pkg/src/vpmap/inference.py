"""MCMC for the variance-partitioning model.

Each iteration runs

1. an elliptical slice update for every latent block (the block priors carry
   no hyperparameters, so the same fixed constrained Gaussian serves as the
   ellipse generator throughout the run);
2. an adaptive random-walk Metropolis update of the intercepts;
3. a joint random-walk Metropolis update of the transformed hyperparameters
   (log tau, logit of every mixing proportion) with the latent blocks held
   fixed;
4. a second joint update of the transformed hyperparameters in which every
   latent block is rescaled so that its contribution to the predictor is
   unchanged. The likelihood cancels and the acceptance ratio involves only
   the hyperparameter prior, the latent priors and the rescaling Jacobian.
   This move keeps the hyperparameters mixing when the data pin down the
   predictor.

Proposal scales adapt during burn-in only.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, gammaln, logit, logsumexp

from .errors import InitializationError, ValidationError
from .gmrf import SpectralDecomposition, sample_igmrf
from .model import Dataset, Hyperparameters, LatentField, ModelSpec, block_weights
from .priors import PriorSpec

log = logging.getLogger(__name__)

MIXING = ("gamma", "phi", "psi1", "psi2")
MAX_SHRINK = 100


class SliceShrinkageWarning(RuntimeWarning):
    pass


@dataclass
class McmcConfig:
    n_iterations: int = 20_000
    burn_in: int = 5_000
    thin: int = 10
    n_chains: int = 1
    seed: int = 0
    target_accept_joint: float = 0.25
    target_accept_scalar: float = 0.44
    latent_thin: int = 10
    centered_moves: bool = True
    alpha_prior_sd: float = 10.0
    store_pointwise: bool = True

    def __post_init__(self):
        for name in ("n_iterations", "thin", "n_chains", "latent_thin"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValidationError("burn_in must be nonnegative and smaller than n_iterations")
        if (self.n_iterations - self.burn_in) // self.thin < 1:
            raise ValidationError("no retained iterations; lower burn_in or thin")

    @property
    def n_keep(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thin


def ess_latent_update(
    block: np.ndarray,
    prior_spec: Optional[SpectralDecomposition],
    loglik: Callable[[np.ndarray], float],
    rng: np.random.Generator,
    current_loglik: Optional[float] = None,
    max_shrink: int = MAX_SHRINK,
) -> tuple[np.ndarray, float]:
    """One elliptical slice step for a block with prior N(0, R⁻) (or N(0, I)
    when ``prior_spec`` is None).

    Returns the new block and its log likelihood. The proposal ellipse is
    spanned by the current state and a fresh prior draw, so the result stays
    in the prior's row space.
    """
    if current_loglik is None:
        current_loglik = loglik(block)
    if prior_spec is None:
        nu = rng.standard_normal(block.shape[0])
    else:
        nu = sample_igmrf(prior_spec, rng)
    threshold = current_loglik + math.log(rng.uniform())
    angle = rng.uniform(0.0, 2.0 * math.pi)
    lo, hi = angle - 2.0 * math.pi, angle
    for _ in range(max_shrink):
        proposal = block * math.cos(angle) + nu * math.sin(angle)
        ll = loglik(proposal)
        if ll > threshold:
            return proposal, ll
        if angle < 0:
            lo = angle
        else:
            hi = angle
        angle = rng.uniform(lo, hi)
    warnings.warn(
        f"elliptical slice exceeded {max_shrink} contractions; keeping current state",
        SliceShrinkageWarning,
        stacklevel=2,
    )
    return block, current_loglik


# ---------------------------------------------------------------------------
# hyperparameter transforms
# ---------------------------------------------------------------------------

def to_unconstrained(h: dict, names) -> np.ndarray:
    return np.array([math.log(h[n]) if n == "tau" else float(logit(h[n])) for n in names])


def from_unconstrained(u: np.ndarray, names) -> dict:
    return {n: math.exp(v) if n == "tau" else float(expit(v)) for n, v in zip(names, u)}


def log_prior_unconstrained(u: np.ndarray, names, priors: PriorSpec) -> float:
    """Hyperparameter log prior on the transformed scale, Jacobian included."""
    total = 0.0
    for n, v in zip(names, u):
        if n == "tau":
            if not -700.0 < v < 700.0:
                return -math.inf
            total += priors.tau.logpdf(math.exp(v)) + v
        else:
            # log p + log(1 - p), evaluated stably
            lj = -math.log1p(math.exp(-abs(v))) * 2 - abs(v)
            p = float(expit(v))
            if not 0 < p < 1:
                return -math.inf
            try:
                total += priors.for_parameter(n).logpdf(p) + lj
            except ValueError:
                return -math.inf
    return float(total)


# ---------------------------------------------------------------------------
# posterior container
# ---------------------------------------------------------------------------

@dataclass
class PosteriorDraws:
    hyper_names: tuple
    hyper: dict  # name -> (n_chains, n_keep)
    iterations: np.ndarray
    loglik: np.ndarray  # (n_chains, n_keep)
    latent: dict  # block -> (n_chains, n_latent, size)
    eta_mean: np.ndarray
    acceptance: list
    constraint_residual: float
    pointwise_loglik: Optional[np.ndarray] = None  # (n_chains, n_keep, n_cells)
    latent_mean: dict = field(default_factory=dict)
    config: Optional[dict] = None

    @property
    def n_chains(self) -> int:
        return self.loglik.shape[0]

    @property
    def n_keep(self) -> int:
        return self.loglik.shape[1]

    def pooled(self, name: str) -> np.ndarray:
        return self.hyper[name].reshape(-1)

    def hyper_rows(self):
        for c in range(self.n_chains):
            for k, it in enumerate(self.iterations):
                row = {"chain": c, "iteration": int(it)}
                row.update({n: float(self.hyper[n][c, k]) for n in self.hyper_names})
                row["loglik"] = float(self.loglik[c, k])
                yield row


# ---------------------------------------------------------------------------
# single chain
# ---------------------------------------------------------------------------

class _Chain:
    def __init__(self, data: Dataset, spec: ModelSpec, priors: PriorSpec, cfg: McmcConfig, seed_seq):
        self.data, self.spec, self.priors, self.cfg = data, spec, priors, cfg
        self.rng = np.random.Generator(np.random.PCG64(seed_seq))
        self.names = spec.hyper_names
        self.blocks = spec.blocks
        self.spectra = {b: spec.block_spectrum(b) for b in self.blocks}
        self.dof = {b: spec.block_dof(b) for b in self.blocks}
        self.prec = {
            b: (None if s is None else s.matrix) for b, s in self.spectra.items()
        }

        obs = data.observed
        self.all_observed = bool(obs.all())
        self.obs_idx = np.flatnonzero(obs)
        self.y = data.y[obs]
        self.e = data.exposure[obs]
        self.binomial = spec.family == "binomial"
        self.log_e = np.log(self.e)
        if self.binomial:
            const = gammaln(data.exposure + 1) - gammaln(data.y + 1) - gammaln(data.exposure - data.y + 1)
        else:
            const = -gammaln(data.y + 1) + data.y * np.log(data.exposure)
        self.pointwise_const = np.where(obs, const, 0.0)
        self.groups_cells = spec.intercept_groups[spec.area_index]

    # likelihood kernel without normalizing constants
    def kernel(self, eta: np.ndarray) -> float:
        if self.obs_idx.size == 0:
            return 0.0
        eo = eta if self.all_observed else eta[self.obs_idx]
        if self.binomial:
            return float(np.dot(self.y, eo) - np.dot(self.e, np.logaddexp(0.0, eo)))
        return float(np.dot(self.y, eo) - np.dot(self.e, np.exp(eo)))

    def pointwise(self, eta: np.ndarray) -> np.ndarray:
        y, e = self.data.y, self.data.exposure
        if self.binomial:
            k = y * eta - e * np.logaddexp(0.0, eta)
        else:
            k = y * eta - e * np.exp(eta)
        return np.where(self.data.observed, k + self.pointwise_const, 0.0)

    def _init_alpha(self) -> np.ndarray:
        alpha = np.zeros(self.spec.n_intercepts)
        if self.obs_idx.size == 0:
            return alpha
        for g in range(alpha.size):
            m = (self.groups_cells == g) & self.data.observed
            ys, es = self.data.y[m].sum(), self.data.exposure[m].sum()
            if es <= 0:
                continue
            if self.binomial:
                rate = min(max((ys + 0.5) / (es + 1.0), 1e-12), 1 - 1e-12)
                alpha[g] = float(logit(rate))
            else:
                alpha[g] = math.log((ys + 0.5) / es)
        return alpha

    def _quad(self, b: str, x: np.ndarray) -> float:
        p = self.prec[b]
        return float(x @ x) if p is None else float(x @ (p @ x))

    def _eta(self) -> np.ndarray:
        eta = self.alpha[self.groups_cells].copy()
        for b in self.blocks:
            eta += self.w[b] * self.cells[b]
        return eta

    def _weights(self, u: np.ndarray) -> dict:
        return block_weights(Hyperparameters(**from_unconstrained(u, self.names)))

    def run(self) -> dict:
        cfg, spec, rng = self.cfg, self.spec, self.rng
        names, d = self.names, len(self.names)
        medians = {n: self.priors.for_parameter(n).median() for n in names}
        try:
            self.u = to_unconstrained(medians, names)
            self.lp = log_prior_unconstrained(self.u, names, self.priors)
            self.w = self._weights(self.u)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise InitializationError(f"cannot initialize hyperparameters at prior medians {medians}: {exc}") from None
        self.x = {b: np.zeros(spec.block_size(b)) for b in self.blocks}
        self.cells = {b: np.zeros(spec.n_cells) for b in self.blocks}
        self.q = {b: 0.0 for b in self.blocks}
        self.alpha = self._init_alpha()
        self.eta = self._eta()
        self.ll = self.kernel(self.eta)
        if not (math.isfinite(self.ll) and math.isfinite(self.lp)):
            raise InitializationError(
                "non-finite log posterior at initialization: "
                f"loglik={self.ll}, logprior={self.lp}, hyper={medians}, alpha={self.alpha.tolist()}"
            )

        # adaptation state
        log_scale_nc = math.log(2.38 / math.sqrt(d))
        log_scale_c = log_scale_nc
        coord_sd = np.ones(d)
        run_mean, run_m2, n_seen = self.u.copy(), np.zeros(d), 1
        alpha_log_sd = np.full(self.alpha.size, math.log(0.1))
        acc = {"hyper": 0, "hyper_centered": 0, "alpha": 0}
        tries = {"hyper": 0, "hyper_centered": 0, "alpha": 0}
        slice_evals = {b: 0 for b in self.blocks}

        n_keep, n_cells = cfg.n_keep, spec.n_cells
        hyper_out = {n: np.empty(n_keep) for n in names}
        ll_out = np.empty(n_keep)
        pw_out = np.empty((n_keep, n_cells)) if cfg.store_pointwise else None
        iters = np.empty(n_keep, dtype=int)
        n_lat = (n_keep + cfg.latent_thin - 1) // cfg.latent_thin
        lat_out = {b: np.empty((n_lat, spec.block_size(b))) for b in self.blocks}
        lat_out["alpha"] = np.empty((n_lat, self.alpha.size))
        lat_sum = {b: np.zeros(spec.block_size(b)) for b in self.blocks}
        lat_sum["alpha"] = np.zeros(self.alpha.size)
        eta_sum = np.zeros(n_cells)
        max_resid = 0.0
        keep = 0

        for it in range(cfg.n_iterations):
            adapting = it < cfg.burn_in
            rate = min(0.5, 1.0 / math.sqrt(it + 1)) if adapting else 0.0

            # 1. latent blocks
            for b in self.blocks:
                wb = self.w[b]
                rest = self.eta - wb * self.cells[b]
                to_cells = (lambda v, b=b: spec.block_to_cells(b, v))
                counter = [0]

                def block_ll(v, rest=rest, wb=wb, to_cells=to_cells, counter=counter):
                    counter[0] += 1
                    return self.kernel(rest + wb * to_cells(v))

                new, self.ll = ess_latent_update(self.x[b], self.spectra[b], block_ll, rng, self.ll)
                slice_evals[b] += counter[0]
                self.x[b] = new
                self.cells[b] = to_cells(new)
                self.eta = rest + wb * self.cells[b]
                self.q[b] = self._quad(b, new)

            # 2. intercepts
            for g in range(self.alpha.size):
                step = math.exp(alpha_log_sd[g]) * rng.standard_normal()
                mask = self.groups_cells == g
                eta_new = self.eta + step * mask
                ll_new = self.kernel(eta_new)
                a_old, a_new = self.alpha[g], self.alpha[g] + step
                sd0 = cfg.alpha_prior_sd
                log_r = ll_new - self.ll - 0.5 * (a_new**2 - a_old**2) / sd0**2
                p_acc = math.exp(min(0.0, log_r))
                tries["alpha"] += 1
                if rng.uniform() < p_acc:
                    self.alpha[g], self.eta, self.ll = a_new, eta_new, ll_new
                    acc["alpha"] += 1
                if adapting:
                    alpha_log_sd[g] += rate * (p_acc - cfg.target_accept_scalar)

            # 3. non-centred hyperparameter move
            prop_sd = math.exp(log_scale_nc) * coord_sd
            u_new = self.u + prop_sd * rng.standard_normal(d)
            lp_new = log_prior_unconstrained(u_new, names, self.priors)
            p_acc = 0.0
            if math.isfinite(lp_new):
                w_new = self._weights(u_new)
                eta_new = self.alpha[self.groups_cells].copy()
                for b in self.blocks:
                    eta_new += w_new[b] * self.cells[b]
                ll_new = self.kernel(eta_new)
                log_r = ll_new - self.ll + lp_new - self.lp
                p_acc = math.exp(min(0.0, log_r)) if math.isfinite(log_r) else 0.0
                if rng.uniform() < p_acc:
                    self.u, self.lp, self.w, self.eta, self.ll = u_new, lp_new, w_new, eta_new, ll_new
                    acc["hyper"] += 1
            else:
                rng.uniform()
            tries["hyper"] += 1
            if adapting:
                log_scale_nc += rate * (p_acc - cfg.target_accept_joint)

            # 4. centred hyperparameter move (predictor unchanged)
            if cfg.centered_moves:
                prop_sd = math.exp(log_scale_c) * coord_sd
                u_new = self.u + prop_sd * rng.standard_normal(d)
                lp_new = log_prior_unconstrained(u_new, names, self.priors)
                p_acc = 0.0
                if math.isfinite(lp_new):
                    w_new = self._weights(u_new)
                    log_r = lp_new - self.lp
                    ratios = {}
                    for b in self.blocks:
                        c = self.w[b] / w_new[b]
                        ratios[b] = c
                        log_r += -0.5 * (c * c - 1.0) * self.q[b] + self.dof[b] * math.log(c)
                    p_acc = math.exp(min(0.0, log_r)) if math.isfinite(log_r) else 0.0
                    if rng.uniform() < p_acc:
                        for b, c in ratios.items():
                            self.x[b] = self.x[b] * c
                            self.cells[b] = self.cells[b] * c
                            self.q[b] *= c * c
                        self.u, self.lp, self.w = u_new, lp_new, w_new
                        acc["hyper_centered"] += 1
                else:
                    rng.uniform()
                tries["hyper_centered"] += 1
                if adapting:
                    log_scale_c += rate * (p_acc - cfg.target_accept_joint)

            if adapting:
                n_seen += 1
                delta = self.u - run_mean
                run_mean = run_mean + delta / n_seen
                run_m2 = run_m2 + delta * (self.u - run_mean)
                if n_seen > 200 and n_seen % 50 == 0:
                    coord_sd = np.sqrt(run_m2 / (n_seen - 1)) + 1e-3

            # store
            if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == cfg.thin - 1 and keep < n_keep:
                h = from_unconstrained(self.u, names)
                for n in names:
                    hyper_out[n][keep] = h[n]
                iters[keep] = it + 1
                pw = self.pointwise(self.eta)
                ll_out[keep] = float(pw.sum())
                if pw_out is not None:
                    pw_out[keep] = pw
                eta_sum += self.eta
                for b in self.blocks:
                    lat_sum[b] += self.x[b]
                    s = self.spectra[b]
                    if s is not None:
                        max_resid = max(max_resid, s.null_residual(self.x[b]))
                lat_sum["alpha"] += self.alpha
                if keep % cfg.latent_thin == 0:
                    k = keep // cfg.latent_thin
                    for b in self.blocks:
                        lat_out[b][k] = self.x[b]
                    lat_out["alpha"][k] = self.alpha
                keep += 1

        acceptance = {k: acc[k] / tries[k] if tries[k] else float("nan") for k in acc}
        acceptance["slice_evals_per_iteration"] = {b: slice_evals[b] / cfg.n_iterations for b in self.blocks}
        acceptance["proposal_scale"] = {
            "hyper": (math.exp(log_scale_nc) * coord_sd).tolist(),
            "hyper_centered": (math.exp(log_scale_c) * coord_sd).tolist(),
            "alpha": np.exp(alpha_log_sd).tolist(),
        }
        return {
            "hyper": hyper_out,
            "loglik": ll_out,
            "pointwise": pw_out,
            "iterations": iters,
            "latent": lat_out,
            "latent_sum": lat_sum,
            "eta_sum": eta_sum,
            "acceptance": acceptance,
            "max_resid": max_resid,
        }


def _run_chain(args):
    data, spec, priors, cfg, seed_seq = args
    return _Chain(data, spec, priors, cfg, seed_seq).run()


def run_mcmc(
    data: Dataset,
    spec: ModelSpec,
    priors: PriorSpec,
    cfg: McmcConfig,
    jobs: int = 1,
) -> PosteriorDraws:
    """Run ``cfg.n_chains`` independent chains; deterministic given ``cfg.seed``."""
    if (data.n1, data.n2) != (spec.n1, spec.n2):
        raise ValidationError(
            f"dataset grid {data.n1}x{data.n2} does not match model {spec.n1}x{spec.n2}"
        )
    if data.family != spec.family:
        raise ValidationError(f"dataset family {data.family} differs from model family {spec.family}")
    if spec.include_iid_main and (priors.psi1 is None or priors.psi2 is None):
        raise ValidationError("priors for psi1 and psi2 are required with iid main effects")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    tasks = [(data, spec, priors, cfg, s) for s in seeds]
    if jobs > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, cfg.n_chains)) as pool:
            results = list(pool.map(_run_chain, tasks))
    else:
        results = [_run_chain(t) for t in tasks]

    names = spec.hyper_names
    n_total = cfg.n_keep * cfg.n_chains
    latent_keys = list(results[0]["latent"])
    return PosteriorDraws(
        hyper_names=names,
        hyper={n: np.stack([r["hyper"][n] for r in results]) for n in names},
        iterations=results[0]["iterations"],
        loglik=np.stack([r["loglik"] for r in results]),
        latent={k: np.stack([r["latent"][k] for r in results]) for k in latent_keys},
        latent_mean={k: sum(r["latent_sum"][k] for r in results) / n_total for k in latent_keys},
        eta_mean=sum(r["eta_sum"] for r in results) / n_total,
        acceptance=[r["acceptance"] for r in results],
        constraint_residual=max(r["max_resid"] for r in results),
        pointwise_loglik=(
            np.stack([r["pointwise"] for r in results]) if cfg.store_pointwise else None
        ),
        config=asdict(cfg),
    )


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VpRow:
    level1: str
    level2: str
    estimator: str
    mean: float
    q025: float
    q975: float


@dataclass
class VpTable:
    rows: list
    notes: list = field(default_factory=list)

    def as_records(self) -> list[dict]:
        return [asdict(r) for r in self.rows]

    def row(self, estimator: str) -> VpRow:
        for r in self.rows:
            if r.estimator == estimator:
                return r
        raise KeyError(estimator)


def _summary(x: np.ndarray) -> tuple[float, float, float]:
    lo, hi = np.quantile(x, [0.025, 0.975], method="linear")
    return float(np.mean(x)), float(lo), float(hi)


def vp_table(draws: PosteriorDraws) -> VpTable:
    """Posterior means and 95% intervals of the mixing proportions, two rows per split."""
    if draws.n_keep == 0:
        raise ValidationError("no posterior draws")
    layout = [
        ("gamma", "main+int", ("main", "1-gamma"), ("int", "gamma")),
        ("phi", "main", ("space", "phi"), ("time", "1-phi")),
        ("psi1", "time", ("iid", "psi1"), ("str", "1-psi1")),
        ("psi2", "space", ("iid", "psi2"), ("str", "1-psi2")),
    ]
    rows, notes = [], []
    for name, level1, first, second in layout:
        if name not in draws.hyper:
            notes.append(f"{name} not in model; rows omitted")
            continue
        m, lo, hi = _summary(draws.pooled(name))
        direct = (m, lo, hi)
        complement = (1.0 - m, 1.0 - hi, 1.0 - lo)
        for level2, est in (first, second):
            vals = complement if est.startswith("1-") else direct
            rows.append(VpRow(level1, level2, est, *vals))
    return VpTable(rows, notes)


@dataclass(frozen=True)
class InformationCriteria:
    dic: float
    deviance: float
    p_d: float
    waic: float
    p_waic: float
    lppd: float
    warnings: tuple = ()


def dic_waic(draws: PosteriorDraws, data: Dataset, spec: Optional[ModelSpec] = None) -> InformationCriteria:
    """DIC (mean deviance plus p_D at the posterior-mean predictor) and WAIC."""
    from .model import log_likelihood

    if draws.pointwise_loglik is None:
        raise ValidationError("pointwise log likelihood was not stored")
    pw = draws.pointwise_loglik.reshape(-1, draws.pointwise_loglik.shape[-1])
    notes = []
    if pw.shape[0] < 100:
        msg = f"only {pw.shape[0]} retained draws; DIC/WAIC may be unstable"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    dev = -2.0 * pw.sum(axis=1)
    mean_dev = float(np.mean(dev))
    dev_at_mean = -2.0 * log_likelihood(data, draws.eta_mean, spec.family if spec else None)
    p_d = mean_dev - dev_at_mean
    s = pw.shape[0]
    lppd = float(np.sum(logsumexp(pw, axis=0) - math.log(s)))
    p_waic = float(np.sum(np.var(pw, axis=0, ddof=1))) if s > 1 else 0.0
    return InformationCriteria(
        dic=mean_dev + p_d,
        deviance=mean_dev,
        p_d=p_d,
        waic=-2.0 * (lppd - p_waic),
        p_waic=p_waic,
        lppd=lppd,
        warnings=tuple(notes),
    )


def split_rhat(chains: np.ndarray) -> float:
    """Split-R-hat for an array of shape (n_chains, n_draws)."""
    x = np.atleast_2d(np.asarray(chains, dtype=float))
    n = x.shape[1] // 2
    if n < 2:
        return float("nan")
    halves = np.concatenate([x[:, :n], x[:, -n:]], axis=0)
    within = np.mean(np.var(halves, axis=1, ddof=1))
    between = n * np.var(np.mean(halves, axis=1), ddof=1)
    var_hat = (n - 1) / n * within + between / n
    return float(math.sqrt(var_hat / within)) if within > 0 else float("nan")


def effective_sample_size(x: np.ndarray) -> float:
    """Effective number of draws of a single chain (Geyer initial monotone sequence)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.var(x) == 0:
        return float(n)
    xc = x - x.mean()
    f = np.fft.rfft(xc, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * np.var(x))
    pairs = acf[0:-1:2] + acf[1::2]
    tau = -1.0
    prev = math.inf
    for p in pairs:
        if p <= 0:
            break
        p = min(p, prev)
        tau += 2.0 * p
        prev = p
    return float(n / max(tau, 1e-12))


def diagnostics(draws: PosteriorDraws) -> dict:
    out = {"constraint_residual": draws.constraint_residual, "acceptance": draws.acceptance}
    out["rhat"] = {n: split_rhat(draws.hyper[n]) for n in draws.hyper_names}
    out["n_effective"] = {
        n: float(sum(effective_sample_size(c) for c in draws.hyper[n])) for n in draws.hyper_names
    }
    return out
