"""Verification suites evaluated at one sweep point."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .. import bkm, dyson, models, norms
from ..gibbs import DEFAULT_N_LIST, ClassMembershipReport, GibbsState, gibbs, schatten_membership
from ..linalg import as_matrix, holder_product_bound, operator_norm
from .config import ExperimentSpec

CATALOG = {
    'norms': 'relative norms: form-norm domination by the omega-norm, '
             'interpolation bound over a 21-point delta grid, perturbed resolvent '
             'identity and bound, norm-equivalence sandwich',
    'bkm': 'BKM geometry: closed-form metric against quadrature, symmetry and '
           'positivity on centered frames, regularized mean equal to the true '
           'mean, third cumulant against the third derivative of psi',
    'series': 'Fréchet derivative + Duhamel remainder (first and second '
              'derivatives of psi, difference-quotient remainder bound, Taylor '
              'series against the exact partition function)',
    'radius': 'empirical convergence radius against (1 - beta_eff)/||V||_w, '
              'trace-class membership of the family, blow-up along V = -H',
    'bounds': 'n-point functions against the cumulant bound (flag only), '
              'positivity of M_2, trace Hölder inequality',
}

SUITE_ORDER = ('norms', 'bkm', 'series', 'radius', 'bounds')
BLOWUP_LAMBDAS = tuple(np.round(np.arange(1, 21) * 0.05, 10))


@dataclass
class Check:
    """One verified relation ``lhs <= rhs``.

    ``margin = rhs - lhs`` plus the absolute slack the check allows, so a
    passing check always has ``margin >= 0``.  ``hard`` checks fail the run;
    the others can only be flagged.
    """

    name: str
    lhs: float
    rhs: float
    margin: float
    status: str
    hard: bool = True
    note: str = ''

    @classmethod
    def leq(cls, name: str, lhs: float, rhs: float, slack: float = 0.0, *,
            hard: bool = True, note: str = '') -> 'Check':
        lhs, rhs = float(lhs), float(rhs)
        margin = rhs - lhs + slack * max(1.0, abs(rhs))
        ok = margin >= 0
        status = 'pass' if ok else ('fail' if hard else 'flag')
        return cls(name, lhs, rhs, margin, status, hard, note)

    @classmethod
    def skip(cls, name: str, note: str) -> 'Check':
        return cls(name, math.nan, math.nan, math.nan, 'skip', True, note)

    def renamed(self, prefix: str) -> 'Check':
        return replace(self, name=f'{prefix}/{self.name}')


@dataclass
class PointResult:
    metrics: dict[str, float] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    budget_exhausted: bool = False


@lru_cache(maxsize=32)
def _membership(family: str, s: float, beta0: float) -> ClassMembershipReport:
    spec = models.ModelSpec(family=family, s=s, beta0=beta0)
    return schatten_membership(models.truncation_family(spec))


def membership(model: models.ModelSpec) -> ClassMembershipReport | None:
    """Trace-class diagnostics of the model's truncation family, if it has one."""
    if model.family == 'random_dense':
        return None
    return _membership(model.family, float(model.s), float(model.beta0))


def effective_beta(model: models.ModelSpec) -> float:
    report = membership(model)
    return math.nan if report is None else report.effective_beta


@dataclass
class Context:
    model: models.ModelSpec
    lam: float
    order: int
    spec: ExperimentSpec
    base: GibbsState = field(init=False)
    direction: norms.PerturbationDirection = field(init=False)
    beta_eff: float = field(init=False)

    def __post_init__(self):
        self.base, self.direction = models.build(self.model)
        self.beta_eff = effective_beta(self.model)

    @property
    def v(self) -> np.ndarray:
        return as_matrix(self.direction.operator)

    def tol(self, key: str) -> float:
        return self.spec.tolerance(key)

    def psi(self, lam: float) -> float:
        return dyson.direct_free_energy(self.base, self.direction.operator, lam)

    def step(self, order: int) -> float:
        beta = 0.0 if math.isnan(self.beta_eff) else self.beta_eff
        return dyson.fd_step(beta, self.direction.omega_norm, order)


def _rel(a: float, b: float, scale: float) -> float:
    """``|a - b|`` relative to ``|b|``, floored at ``scale``.

    The floor keeps derivative checks meaningful when the exact value
    vanishes (e.g. a perturbation proportional to the identity).
    """
    return abs(a - b) / max(abs(b), scale, np.finfo(float).tiny)


def run_norms(ctx: Context, out: PointResult):
    base, d, v = ctx.base, ctx.direction, ctx.v
    slack = ctx.tol('slack')
    out.checks.append(Check.leq('domination', d.form_norm, d.omega_norm, slack))
    worst = max((norms.interpolation_bound_check(base, v, delta)
                 for delta in np.linspace(0.0, 1.0, 21)),
                key=lambda pair: pair[0] - pair[1])
    out.checks.append(Check.leq('interpolation', *worst, slack))

    y = v * (0.9 / d.omega_norm)
    res = norms.resolvent_identity_check(base, y)
    out.checks.append(Check.leq('resolvent_residual', res.product_residual,
                                ctx.tol('residual')))
    out.checks.append(Check.leq('resolvent_bound', res.bound_lhs, res.bound_rhs, slack))

    rho_x = gibbs(as_matrix(base.hamiltonian) + v, normalize=True)
    constants = norms.equivalence_constants(base, rho_x)
    for label, y in (('v', v), ('h', as_matrix(base.hamiltonian))):
        s = norms.equivalence_sandwich(base, rho_x, y, constants)
        out.checks.append(Check.leq(f'sandwich_lower_{label}', s['lower'], s['middle'], slack))
        out.checks.append(Check.leq(f'sandwich_upper_{label}', s['middle'], s['upper'], slack))
    out.metrics.update(omega_norm=d.omega_norm, form_norm=d.form_norm,
                       form_to_omega=d.form_norm / d.omega_norm,
                       resolvent_residual=res.product_residual,
                       equivalence_m=constants[0], equivalence_M=constants[1])


def run_bkm(ctx: Context, out: PointResult):
    base, v = ctx.base, ctx.v
    closed = bkm.bkm_metric(base, v, v, centered=True)
    quad = bkm.bkm_metric_quadrature(base, v, v, centered=True)
    out.checks.append(Check.leq('metric_vs_quadrature', abs(closed - quad),
                                ctx.tol('quadrature')))
    w = v @ v
    gvw, gwv = bkm.bkm_metric(base, v, w), bkm.bkm_metric(base, w, v)
    out.checks.append(Check.leq('metric_symmetry', abs(gvw - gwv),
                                1e-12 * max(1.0, abs(gvw))))

    frame = [v, w]
    flat = np.array([np.eye(base.dim).ravel()] + [f.ravel() for f in frame])
    if np.linalg.matrix_rank(flat, tol=1e-8 * np.abs(flat).max()) == len(frame) + 1:
        gmin = float(np.linalg.eigvalsh(bkm.gram_matrix(base, frame))[0])
        out.checks.append(Check('gram_positive', 0.0, gmin, gmin,
                                'pass' if gmin > 0 else 'fail',
                                note='smallest Gram eigenvalue must be positive'))
    else:
        gmin = math.nan
        out.checks.append(Check.skip('gram_positive',
                                     'frame is linearly dependent modulo the identity'))

    true = bkm.true_mean(base, v)
    spread = max(abs(bkm.regularized_mean(base, v, lam) - true)
                 for lam in np.linspace(0.1, 0.9, 9))
    out.checks.append(Check.leq('regularized_mean', spread,
                                ctx.tol('mean') * max(1.0, abs(true))))

    t = bkm.third_cumulant(base, v, v, v)
    fd3 = dyson.central_difference(ctx.psi, 3, ctx.step(3))
    out.checks.append(Check.leq('third_cumulant', _rel(-2.0 * t, fd3, operator_norm(v) ** 3), ctx.tol('fd_third')))
    out.metrics.update(bkm_metric=closed, bkm_quadrature=quad, gram_min=gmin,
                       true_mean=true, third_cumulant=t, psi_third_fd=fd3)


def run_series(ctx: Context, out: PointResult):
    base, d, lam = ctx.base, ctx.direction, ctx.lam
    ex = dyson.expand(base, d, ctx.order, beta_eff=ctx.beta_eff)
    err, nxt = ex.error(lam)
    factor = ctx.tol('series_factor')
    out.checks.append(Check.leq('series_vs_direct', err, factor * nxt,
                                note=f'|series - direct| <= {factor:g} x next-term estimate'))

    mean = bkm.true_mean(base, d.operator)
    fd1 = dyson.central_difference(ctx.psi, 1, ctx.step(1))
    out.checks.append(Check.leq('first_derivative', _rel(fd1, -mean, operator_norm(d.operator)), ctx.tol('fd_first')))
    g = bkm.bkm_metric(base, d.operator, d.operator, centered=True)
    fd2 = dyson.central_difference(ctx.psi, 2, ctx.step(2))
    out.checks.append(Check.leq('second_derivative', _rel(fd2, g, operator_norm(d.operator) ** 2), ctx.tol('fd_second')))

    duh = dyson.duhamel_remainder_check(base, d.operator, lam)
    out.checks.append(Check.leq('duhamel_remainder', duh.difference_quotient_error,
                                duh.remainder_trace_norm * abs(lam), 1e-12))
    out.metrics.update(series=ex.evaluate(lam),
                       direct=dyson.direct_partition(base, d.operator, lam),
                       series_error=err, next_term=nxt, psi_first_fd=fd1,
                       minus_mean=-mean, psi_second_fd=fd2, bkm_metric=g,
                       difference_quotient_error=duh.difference_quotient_error,
                       remainder_trace_norm=duh.remainder_trace_norm)
    grid = np.sign(lam) * abs(lam) * np.logspace(-2, 0, 13)
    curve = [ex.error(x) for x in grid]
    out.extras['error_curve'] = {
        'lambda': [float(x) for x in grid],
        'error': [e for e, _ in curve],
        'next_term': [t for _, t in curve],
    }
    out.extras['coefficients'] = {
        'order': list(range(ctx.order + 1)),
        'c': [float(c) for c in ex.coefficients],
        'next_coefficient': ex.next_coefficient,
        'next_coefficient_exact': ex.next_coefficient_exact,
    }


def run_radius(ctx: Context, out: PointResult):
    report = membership(ctx.model)
    if report is None:
        out.checks.append(Check.skip('radius', 'random_dense has no truncation family'))
        out.checks.append(Check.skip('blowup', 'random_dense has no truncation family'))
        return
    out.extras['membership'] = {
        'beta_grid': [float(b) for b in report.beta_grid],
        'n_list': [int(n) for n in report.n_list],
        'trace_values': report.trace_values.tolist(),
        'cauchy': [bool(c) for c in report.cauchy],
        'effective_beta': report.effective_beta,
    }
    ex = dyson.expand(ctx.base, ctx.direction, ctx.order, beta_eff=ctx.beta_eff,
                      next_term=False)
    try:
        rr = dyson.radius_report(ex)
    except dyson.InsufficientDataError as exc:
        out.checks.append(Check.skip('radius', str(exc)))
    else:
        out.checks.append(Check.leq('radius', rr.radius_bound, rr.radius_empirical,
                                    note='empirical radius >= (1 - beta_eff)/||V||_w'))
        for k, ratio in zip(range(1, ctx.order + 1), rr.bound_ratios):
            out.checks.append(Check.leq(f'bound_ratio_{k}', ratio, 1.0, hard=False))
        out.metrics.update(radius_empirical=rr.radius_empirical)
        out.extras['radius'] = {
            'ratio_estimates': [float(x) for x in rr.ratio_estimates],
            'root_estimates': [float(x) for x in rr.root_estimates],
            'radius_empirical': rr.radius_empirical,
            'radius_bound': rr.radius_bound,
            'entire_like': rr.entire_like,
            'bound_ratios': [float(x) for x in rr.bound_ratios],
        }
    scan = dyson.divergent_direction_scan(models.truncation_family(ctx.model),
                                          BLOWUP_LAMBDAS, DEFAULT_N_LIST)
    out.checks.append(Check.leq('blowup', scan.blowup_lambda, 1.0,
                                note='psi_N(lambda) along V = -H diverges by lambda = 1'))
    out.metrics.update(beta_eff=ctx.beta_eff, radius_bound=ex.radius_bound,
                       blowup_lambda=scan.blowup_lambda)


def run_bounds(ctx: Context, out: PointResult):
    base, v = ctx.base, ctx.v
    beta = ctx.beta_eff if 0.0 < ctx.beta_eff < 1.0 else 0.5
    table = bkm.cumulant_table(base, v, ctx.order, beta)
    if ctx.order >= 2:
        out.checks.append(Check.leq('m2_nonnegative', 0.0, table.m_values[1]))
    for k, ratio in zip(table.orders, table.bound_ratios):
        out.checks.append(Check.leq(f'bound_ratio_{k}', ratio, 1.0, hard=False))
    n = min(ctx.order, 6)
    factor = base.power(1.0 / n) @ v @ base.resolvent_power(1.0)
    lhs, rhs = holder_product_bound([factor] * n, [1.0 / n] * n)
    out.checks.append(Check.leq('holder', lhs, rhs, ctx.tol('slack')))
    out.metrics.update(beta=beta, max_bound_ratio=float(np.nanmax(table.bound_ratios)))
    out.extras['cumulants'] = {
        'order': [int(k) for k in table.orders],
        'm': [float(x) for x in table.m_values],
        'bound': [float(x) for x in table.bound_values],
        'bound_ratio': [float(x) for x in table.bound_ratios],
        'beta': beta,
    }


RUNNERS = {'norms': run_norms, 'bkm': run_bkm, 'series': run_series,
           'radius': run_radius, 'bounds': run_bounds}


def evaluate_point(spec: ExperimentSpec, model: models.ModelSpec, lam: float,
                   order: int) -> PointResult:
    """Run the configured suite(s) at one point; budget trips become skips."""
    suites = SUITE_ORDER if spec.suite == 'all' else (spec.suite,)
    ctx = Context(model, lam, order, spec)
    out = PointResult()
    for name in suites:
        part = PointResult()
        try:
            RUNNERS[name](ctx, part)
        except bkm.BudgetError as exc:
            part.checks.append(Check.skip('budget', str(exc)))
            part.budget_exhausted = True
        out.checks.extend(c.renamed(name) for c in part.checks)
        out.metrics.update({f'{name}.{k}': v for k, v in part.metrics.items()})
        out.extras.update(part.extras)
        out.budget_exhausted |= part.budget_exhausted
    return out

