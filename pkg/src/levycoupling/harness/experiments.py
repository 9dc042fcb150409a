"""The experiments behind ``levycoupling run``.

Each experiment maps an :class:`ExperimentConfig` to a :class:`Report` of
named verdicts.  Monte Carlo work is split into fixed-size chunks whose RNG
streams depend only on (seed, experiment, N, chunk index); chunks may run in
worker processes and are always reduced in chunk order.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..coupling import (
    DyadicSet,
    GuardConfig,
    build_Gr,
    build_HE,
    build_Mr,
    conditional_matrices,
    couple_children,
    coupling_error,
    make_subcoupler,
    run_trees,
    tail_statistics,
)
from ..coupling.dyadic import SQRT2, gram, random_W
from ..coupling.walk import aggregate, simulate_leaves
from ..levyarea import d2_of, load_cumulants, normalize_to_X, pairs, sample_surrogate, simulate_increments
from ..perturb import PerturbationSeries, smap_forward, smap_inverse, validate_expansion
from ..polyalg import (
    Poly,
    VecPoly,
    gaussian_expectation,
    hermite_poly,
    lsigma_apply,
    lsigma_invert,
    multi_indices,
)
from ..wasserstein import EmpiricalMeasure, density_diff_bound, wp_assignment, wp_quantile_1d
from .config import EXPERIMENTS, ExperimentConfig
from .ratefit import fit_rate
from .report import Report, at_least, at_most, in_range, small, within

MC_CHUNK = 10_000
_TAG = {name: i for i, name in enumerate(EXPERIMENTS)}


def stream(cfg: ExperimentConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(100 + _TAG[cfg.experiment],) + key))


def pmap(fn, jobs, workers: int) -> list:
    """Order-preserving map, optionally over worker processes."""
    jobs = list(jobs)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def _var_se(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = (x - x.mean(axis=0)) ** 2
    return s.mean(axis=0) * x.shape[0] / (x.shape[0] - 1), s.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


def _cov_se(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    s = (x - x.mean()) * (y - y.mean())
    return float(s.mean()), float(s.std(ddof=1) / math.sqrt(x.size))


def _k4_se(x: np.ndarray) -> tuple[float, float]:
    """Fourth cumulant of a standardised-ish sample with a batch-means stderr."""
    def k4(a):
        a = a - a.mean()
        m2 = np.mean(a**2)
        return float(np.mean(a**4) - 3 * m2**2)

    est = k4(x)
    batches = np.array_split(x, 20)
    se = float(np.std([k4(b) for b in batches], ddof=1) / math.sqrt(len(batches)))
    return est, se


# --- lemma1-moments ------------------------------------------------------------


def _lemma_chunk(job) -> np.ndarray:
    d, N, n_sub, count, seed, tag, idx = job
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, N, idx)))
    inc = simulate_increments(d, 1.0 / N, n_sub, count, rng)
    sur = sample_surrogate(d, N, inc.W, rng)
    return np.hstack([inc.W, inc.zeta, inc.K, inc.A, sur.B])


def lemma1_moments(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    d, d2 = cfg.d, d2_of(cfg.d)
    names = [f"W{k + 1}" for k in range(d)] + [f"zeta{k + 1}" for k in range(d)] + [f"K{k + 1}{l + 1}" for k, l in pairs(d)]
    area = [f"{k + 1}{l + 1}" for k, l in pairs(d)]
    tag = 100 + _TAG[cfg.experiment]
    for N in cfg.N:
        sizes = [min(MC_CHUNK, cfg.M - s) for s in range(0, cfg.M, MC_CHUNK)]
        jobs = [(d, N, cfg.n_sub, c, cfg.seed, tag, i) for i, c in enumerate(sizes)]
        data = np.vstack(pmap(_lemma_chunk, jobs, cfg.workers))
        W, zeta, K = data[:, :d], data[:, d : 2 * d], data[:, 2 * d : 2 * d + d2]
        A, B = data[:, 2 * d + d2 : 2 * d + 2 * d2], data[:, 2 * d + 2 * d2 :]
        for label, x, target in (("W", W, 1.0 / N), ("zeta", zeta, 1 / (12 * N)), ("K", K, 1 / (12 * N**2))):
            v, se = _var_se(x)
            cols = [n for n in names if n.startswith(label)]
            for j, col in enumerate(cols):
                rep.add(within(f"N{N}.var_{col}", v[j], se[j], target, N=N))
        V = np.hstack([W, zeta, K])
        for i, j in itertools.combinations(range(V.shape[1]), 2):
            c, se = _cov_se(V[:, i], V[:, j])
            rep.add(within(f"N{N}.cov_{names[i]}_{names[j]}", c, se, 0.0, N=N))
        target = 1 / (4 * N**2)
        vA, sA = _var_se(A)
        vB, sB = _var_se(B)
        dev = (A - A.mean(axis=0)) ** 2 - (B - B.mean(axis=0)) ** 2
        for j, lab in enumerate(area):
            rep.add(within(f"N{N}.var_A{lab}", vA[j], sA[j], target, N=N))
            rep.add(within(f"N{N}.var_B{lab}", vB[j], sB[j], target, N=N))
            rep.add(within(f"N{N}.var_A{lab}_minus_var_B{lab}", vA[j] - vB[j], dev[:, j].std(ddof=1) / math.sqrt(len(dev)), 0.0, N=N))
    return rep


# --- matrix-identities -----------------------------------------------------------


def _op_norm(D: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(D, ord=2, axis=(-2, -1)))) if D.size else 0.0


def matrix_identities(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    d, d2 = cfg.d, d2_of(cfg.d)
    I = np.eye(d2)
    for N in cfg.N:
        rng = stream(cfg, N, 0)
        W = random_W(rng, cfg.M, d, N)
        G, Mr = build_Gr(W, N), build_Mr(W, N)
        GG = gram(G)
        rep.add(small(f"N{N}.GGt_minus_block_formula", _op_norm(GG - (I + gram(Mr)) / 12), N=N))
        eigmin = float(np.linalg.eigvalsh(GG)[:, 0].min())
        rep.add(at_least(f"N{N}.eigmin_GGt", eigmin, 1 / 12 - 1e-9, N=N))

        inc = simulate_increments(d, 1.0 / N, 64, min(cfg.M, 1000), rng)
        Y = np.einsum("nij,nj->ni", build_Gr(inc.W, N), normalize_to_X(inc, N))
        rep.add(small(f"N{N}.leaf_reconstruction", float(np.abs(Y / N - inc.A).max()), tol=1e-12, N=N))

        # H_F, H_G from random G pairs; the split identities
        HF = gram(build_Gr(random_W(rng, cfg.M, d, N), N))
        HG = gram(build_Gr(random_W(rng, cfg.M, d, N), N))
        HE, J, H = conditional_matrices(HF, HG)
        rep.add(small(f"N{N}.J_HE_minus_HF_over_sqrt2", _op_norm(J @ HE - HF / SQRT2), N=N))
        rep.add(small(f"N{N}.H_conditional_covariance", _op_norm(H - (HF - 0.5 * HF @ np.linalg.solve(HE, HF))), N=N))
        YF, YE, ZE, noise = (rng.standard_normal((cfg.M, d2)) for _ in range(4))
        ZF, ZG, _ = couple_children(YF, YE, ZE, HF, HG, make_subcoupler("independent"), np.ones(cfg.M, bool), noise)
        rep.add(small(f"N{N}.ZF_plus_ZG_minus_sqrt2_ZE", float(np.abs(ZF + ZG - SQRT2 * ZE).max()), N=N))

    # random dyadic sets of random trees
    rng = stream(cfg, 0, 1)
    worst_inv, worst_sym, worst_j, worst_h = 0.0, 0.0, 0.0, 0.0
    for _ in range(cfg.dyadic_sets):
        m = int(rng.integers(1, 11))
        n = int(rng.integers(0, m + 1))
        k = int(rng.integers(0, 2 ** (m - n)))
        node = DyadicSet(m, n, k)
        N = 2**m
        Gs = build_Gr(random_W(rng, node.size, d, N), N)
        nm = build_HE(node, Gs)
        worst_inv = max(worst_inv, nm.HE_inv_norm)
        worst_sym = max(worst_sym, float(np.abs(nm.H_E - nm.H_E.T).max()))
        if n >= 1:
            grams = gram(Gs)
            HF, HG = grams[: node.size // 2].mean(0), grams[node.size // 2 :].mean(0)
            worst_j = max(worst_j, _op_norm(nm.J @ nm.H_E - HF / SQRT2))
            worst_h = max(worst_h, _op_norm(nm.H - 0.5 * HF @ np.linalg.solve(nm.H_E, HG)))
    rep.add(at_most("dyadic.max_HE_inverse_norm", worst_inv, 12 + 1e-9))
    rep.add(small("dyadic.HE_asymmetry", worst_sym))
    rep.add(small("dyadic.J_identity", worst_j))
    rep.add(small("dyadic.H_identity", worst_h))

    zero = build_HE(DyadicSet.root(3), build_Gr(np.zeros((8, d)), 8))
    rep.add(small("zero_W.HE_minus_I_over_12", _op_norm(zero.H_E - I / 12)))
    rep.add(small("zero_W.J_minus_I_over_sqrt2", _op_norm(zero.J - I / SQRT2)))
    rep.add(small("zero_W.H_minus_I_over_24", _op_norm(zero.H - I / 24)))

    # aggregation Y_E = 2^{-n/2} sum_{r in E} G_r X_r
    N = max(cfg.N)
    m = N.bit_length() - 1
    if 2**m == N:
        rngs = [stream(cfg, N, 2, t) for t in range(4)]
        leaves = simulate_leaves(d, N, 16, rngs)
        lev, _ = aggregate(leaves, None)
        direct = lev.Y[0].sum(axis=1) / math.sqrt(N)
        rep.add(small(f"N{N}.root_aggregation", float(np.abs(lev.Y[m][:, 0] - direct).max()), N=N))
    return rep


# --- lsigma-roundtrip ---------------------------------------------------------------


def _random_poly(rng, dim: int, degree: int) -> Poly:
    return Poly(dim, {a: rng.uniform(-1, 1) for a in multi_indices(dim, degree)})


def lsigma_roundtrip(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    for dim in (1, 2, 3):
        worst = 0.0
        for alpha in multi_indices(dim, 8, min_degree=0):
            H = hermite_poly(alpha)
            lhs = lsigma_apply(H.grad()) if sum(alpha) else Poly.zero(dim)
            worst = max(worst, lhs.max_abs_diff(H * (-float(sum(alpha)))))
        rep.add(small(f"d{dim}.L_grad_hermite_eigen", worst, tol=1e-10))
    rng = stream(cfg, 0)
    fwd = back = 0.0
    for _ in range(cfg.cases):
        dim = int(rng.integers(1, 4))
        deg = int(rng.integers(1, 7))
        g = _random_poly(rng, dim, deg)
        g = g - gaussian_expectation(g)
        _, grad = lsigma_invert(g)
        fwd = max(fwd, lsigma_apply(grad).max_abs_diff(g))
        u0 = _random_poly(rng, dim, deg)
        u0 = u0 - u0.constant_term()
        p0 = u0.grad()
        _, p1 = lsigma_invert(lsigma_apply(p0))
        back = max(back, p1.max_abs_diff(p0))
    rep.add(small("apply_after_invert", fwd))
    rep.add(small("invert_after_apply", back))
    return rep


# --- smap-roundtrip -----------------------------------------------------------------


def random_gradient(rng, dim: int, degree: int) -> VecPoly:
    """Gradient field of the given degree with coefficients in [-1, 1]."""
    return Poly(dim, {a: rng.uniform(-1, 1) / max(a) for a in multi_indices(dim, degree + 1, min_degree=2)}).grad()


def smap_roundtrip(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    rng = stream(cfg, 0)
    worst_rt = worst_c = 0.0
    for _ in range(cfg.cases):
        n = int(rng.integers(1, 4))
        dim = int(rng.integers(1, 3))
        p = [random_gradient(rng, dim, int(rng.integers(1, 5))) for _ in range(n)]
        S = smap_forward(p, n)
        worst_c = max(worst_c, max(abs(gaussian_expectation(s)) for s in S))
        q = smap_inverse(S, n)
        worst_rt = max(worst_rt, max(a.max_abs_diff(b) for a, b in zip(p, q)))
    rep.add(small("inverse_after_forward", worst_rt, tol=1e-8))
    rep.add(small("S_centering", worst_c))
    S1, S2 = smap_forward([VecPoly([Poly.variable(1, 0)])], 2)
    rep.add(small("scaling.S1_minus_y2_minus_1", S1.max_abs_diff(Poly(1, {(2,): 1.0, (0,): -1.0}))))
    rep.add(small("scaling.S2_closed_form", S2.max_abs_diff(Poly(1, {(4,): 0.5, (2,): -2.5, (0,): 1.0}))))
    return rep


# --- expansion-moments ----------------------------------------------------------------


def expansion_moments(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    if len(cfg.eps) != 2 or not cfg.eps[0] > cfg.eps[1] > 0:
        raise ValueError("expansion-moments needs eps = big, small")
    big, small_eps = cfg.eps
    x = VecPoly([Poly.variable(1, 0)])
    for n in cfg.orders:
        reports = [validate_expansion(PerturbationSeries(e, [x], 1), n, cfg.M, stream(cfg, n, i)) for i, e in enumerate(cfg.eps)]
        k = reports[0].worst()
        a, b = reports[0].discrepancy[k], reports[1].discrepancy[k]
        sa, sb = reports[0].stderr[k], reports[1].stderr[k]
        ratio = a / b
        ratio_se = abs(ratio) * math.hypot(sa / a, sb / b)
        expected = (big / small_eps) ** (n + 1)
        mono = "y^" + str(reports[0].monomials[k][0])
        v = in_range(f"n{n}.ratio_{mono}", ratio, 0.75 * expected, 1.25 * expected, ratio_se)
        v.target = expected
        rep.add(v)
        for e, r in zip(cfg.eps, reports):
            rep.note(f"n{n}.eps{e}.discrepancy_{mono}", float(r.discrepancy[k]), float(r.stderr[k]))
    return rep


# --- tail-stats ---------------------------------------------------------------------


def tail_stats(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    d = cfg.d
    curves = {}
    for N in cfg.N:
        G = build_Gr(random_W(stream(cfg, N), cfg.M, d, N), N)
        alpha = None if cfg.alpha < 0 else cfg.alpha
        full = tail_statistics(G, alpha)
        half = tail_statistics(G[: cfg.M // 2], alpha)
        a = full.alpha
        # |G|^2 = (1 + N |W|^2)/12 with N |W|^2 ~ chi^2_d
        exact = math.exp(a / 12) * (1 - a / 6) ** (-d / 2)
        rep.add(at_least(f"N{N}.finite", float(full.finite), 1.0, N=N))
        rep.add(within(f"N{N}.mgf_vs_chi2", full.estimate, full.stderr, exact, N=N))
        rep.add(within(f"N{N}.mgf_batch_doubling", half.estimate, half.stderr, full.estimate, N=N))
        rep.add(at_most(f"N{N}.top_decile_log_survival_slope", full.top_decile_slope, 0.0, N=N))
        rep.add(small(f"N{N}.alpha_zero_is_one", abs(tail_statistics(G[:1000], 0.0).estimate - 1.0), N=N))
        curves[str(N)] = {"x": full.survival_x.tolist(), "log_survival": full.survival_logp.tolist()}
    rep.notes["log_survival"] = curves
    return rep


# --- wasserstein-sanity -----------------------------------------------------------------


def wasserstein_sanity(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    rng = stream(cfg, 0)
    M = cfg.M
    x, y = rng.standard_normal(M), rng.standard_normal(M) + 3.0
    for p in sorted({1.0, cfg.p}):
        w = wp_quantile_1d(x, y, p)
        rep.add(in_range(f"shift3.W{p:g}", w, 3 * 0.99, 3 * 1.01))
    u = wp_quantile_1d(rng.uniform(0, 1, M), rng.uniform(0, 2, M), 1)
    rep.add(in_range("uniform_stretch.W1", u, 0.5 * 0.99, 0.5 * 1.01))

    worst = 0.0
    for _ in range(20):
        a, b = rng.standard_normal(128), rng.exponential(size=128)
        for p in (1.0, 2.0):
            worst = max(worst, abs(wp_assignment(EmpiricalMeasure(a), EmpiricalMeasure(b), p) - wp_quantile_1d(a, b, p)))
    rep.add(small("assignment_vs_quantile_1d", worst, tol=1e-10))

    sym = tri = mono = 0.0
    for _ in range(20):
        A, B, C = (EmpiricalMeasure(rng.standard_normal((64, 2))) for _ in range(3))
        ab, ba = wp_assignment(A, B, 1), wp_assignment(B, A, 1)
        sym = max(sym, abs(ab - ba))
        tri = max(tri, ab - wp_assignment(A, C, 1) - wp_assignment(C, B, 1))
        mono = max(mono, ab - wp_assignment(A, B, 2))
    rep.add(small("assignment_symmetry", sym, tol=1e-10))
    rep.add(at_most("assignment_triangle_excess", tri, 1e-8))
    rep.add(at_most("assignment_W1_minus_W2", mono, 1e-12))

    grid = np.linspace(-10, 10, 4001)
    f = np.exp(-grid**2 / 2) / math.sqrt(2 * math.pi)
    g = np.exp(-((grid - 0.1) ** 2) / 2) / math.sqrt(2 * math.pi)
    bound = density_diff_bound(f, g, 1, grid)
    z = rng.standard_normal(M)
    w_crn = wp_quantile_1d(z, z + 0.1, 1)
    rep.add(at_least("density_bound_minus_W1_common_numbers", bound - w_crn, 0.0))
    xi, yi = rng.standard_normal(M), rng.standard_normal(M) + 0.1
    w_ind = wp_quantile_1d(xi, yi, 1)
    se = float(np.abs(np.sort(xi) - np.sort(yi)).std(ddof=1) / math.sqrt(M))
    rep.add(at_least("density_bound_minus_W1_independent_plus_3se", bound - w_ind + 3 * se, 0.0, se))
    rep.note("density_bound_W1", bound)
    rep.note("empirical_W1_common_numbers", w_crn)
    rep.note("empirical_W1_independent", w_ind, se)
    return rep


# --- coupling experiments ----------------------------------------------------------------


def _guards(cfg: ExperimentConfig) -> GuardConfig:
    return GuardConfig(eta=cfg.eta, kappa=cfg.kappa, g_scale=cfg.g_scale, max_residual=cfg.max_residual)


def _couplers(cfg: ExperimentConfig, names):
    return [make_subcoupler(n, kappa=cfg.kappa, max_residual=cfg.max_residual, group=cfg.group) for n in names]


def _cumulants(cfg: ExperimentConfig, names):
    if "edgeworth" not in names:
        return None
    ce = load_cumulants(cfg.d)
    if cfg.kappa > ce.order:
        raise ValueError(f"frozen cumulants for d = {cfg.d} stop at order {ce.order}")
    return ce


def coupling_rate(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    names = list(cfg.subcoupler)
    couplers = _couplers(cfg, names)
    ce = _cumulants(cfg, names)
    other = "lp_of_max" if cfg.metric == "max_of_lp" else "max_of_lp"
    errors = {n: [] for n in names}
    for N in cfg.N:
        res = run_trees(cfg.d, N, cfg.trees, cfg.seed, couplers, _guards(cfg), cfg.n_sub, ce, cfg.chunk, cfg.workers)
        for name, r in zip(names, res):
            dev = np.concatenate(r.dev)
            est, se = coupling_error(dev, cfg.p, cfg.metric, cfg.n_boot, cfg.seed)
            alt, alt_se = coupling_error(dev, cfg.p, other, cfg.n_boot, cfg.seed)
            errors[name].append((N, est, se))
            rep.plot.append((name, N, est, se))
            rep.note(f"{name}.N{N}.error_{cfg.metric}", est, se, N)
            rep.note(f"{name}.N{N}.error_{other}", alt, alt_se, N)
            rep.note(f"{name}.N{N}.fallback_fraction", 1.0 - float(np.mean(r.coupled_frac)), N=N)
            rep.note(f"{name}.N{N}.guard_fired_fraction", float(np.mean(r.fired_frac)), N=N)
    fits = {}
    if len(cfg.N) >= 4:
        for name in names:
            fit = fit_rate(errors[name])
            fits[name] = fit
            rep.note(f"{name}.slope_stderr_ols", fit.slope_stderr_ols)
            rep.note(f"{name}.slope_stderr_points", fit.slope_stderr_points)
            rep.note(f"{name}.intercept", fit.intercept)
            rep.notes[f"{name}.fit"] = {"slope": fit.slope, "slope_stderr": fit.slope_stderr, "intercept": fit.intercept}
    lo, hi = cfg.slope_independent
    if "independent" in fits:
        f = fits["independent"]
        rep.add(in_range("independent.slope", f.slope, lo, hi, f.slope_stderr))
    if "edgeworth" in fits:
        f = fits["edgeworth"]
        rep.add(at_most("edgeworth.slope", f.slope, cfg.slope_edgeworth_max, f.slope_stderr))
        rep.add(at_most("edgeworth.slope_stderr", f.slope_stderr, cfg.slope_stderr_max))
    if "assignment" in fits:
        f = fits["assignment"]
        rep.note("assignment.slope", f.slope, f.slope_stderr)
    if "edgeworth" in errors and "independent" in errors:
        for (N, e, se), (_, e0, se0) in zip(errors["edgeworth"], errors["independent"]):
            rep.add(at_most(f"N{N}.edgeworth_below_independent", e, e0 * (1 - 1e-12), se, N=N))
    return rep


def z_fidelity(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.experiment)
    N = cfg.N[0]
    if 2 ** (N.bit_length() - 1) != N:
        raise ValueError("z-fidelity needs N a power of two")
    trees = -(-cfg.M // N)
    names = ["edgeworth"]
    ce = _cumulants(cfg, names)
    (res,) = run_trees(cfg.d, N, trees, cfg.seed, _couplers(cfg, names), _guards(cfg), cfg.n_sub, ce, cfg.chunk, cfg.workers, keep_leaves=True)
    d2 = d2_of(cfg.d)
    Z = np.concatenate(res.Z_white).reshape(-1, d2)
    Y = np.concatenate(res.Y_white).reshape(-1, d2)
    n = Z.shape[0]
    rep.note("pooled_leaves", n)
    rep.note("fallback_fraction", 1.0 - float(np.mean(res.coupled_frac)))
    for i in range(d2):
        rep.add(within(f"mean_Z{i + 1}", float(Z[:, i].mean()), float(Z[:, i].std(ddof=1) / math.sqrt(n)), 0.0, N=N))
    for i, j in itertools.combinations_with_replacement(range(d2), 2):
        s = Z[:, i] * Z[:, j]
        rep.add(within(f"cov_Z{i + 1}{j + 1}", float(s.mean()), float(s.std(ddof=1) / math.sqrt(n)), 1.0 if i == j else 0.0, N=N))
    for i in range(d2):
        kz, sz = _k4_se(Z[:, i])
        ky, sy = _k4_se(Y[:, i])
        rep.note(f"k4_Y{i + 1}", ky, sy, N)
        rep.note(f"k4_Z{i + 1}_truncation_deviation", kz, sz, N)
        rep.add(at_most(f"abs_k4_Z{i + 1}_below_abs_k4_Y{i + 1}", abs(kz), abs(ky), sz, N=N))
        k3z = float(np.mean((Z[:, i] - Z[:, i].mean()) ** 3))
        k3y = float(np.mean((Y[:, i] - Y[:, i].mean()) ** 3))
        rep.note(f"k3_Z{i + 1}", k3z, N=N)
        rep.note(f"k3_Y{i + 1}", k3y, N=N)
    return rep


RUNNERS = {
    "lemma1-moments": lemma1_moments,
    "matrix-identities": matrix_identities,
    "lsigma-roundtrip": lsigma_roundtrip,
    "smap-roundtrip": smap_roundtrip,
    "expansion-moments": expansion_moments,
    "tail-stats": tail_stats,
    "wasserstein-sanity": wasserstein_sanity,
    "coupling-rate": coupling_rate,
    "z-fidelity": z_fidelity,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    return RUNNERS[cfg.experiment](cfg)
