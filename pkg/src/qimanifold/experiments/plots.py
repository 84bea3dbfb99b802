"""Static SVG line charts with byte-stable output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {'svg.hashsalt': 'qimanifold', 'svg.fonttype': 'none',
          'figure.figsize': (6.0, 4.0)}


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)


def _positive(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys) if y is not None and y > 0]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def series_error_plot(curve: dict, path: Path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        lam = [abs(x) for x in curve['lambda']]
        ax.loglog(*_positive(lam, curve['error']), 'o-', label='|series - direct|')
        ax.loglog(*_positive(lam, curve['next_term']), 's--', label='next-term estimate')
        ax.set_xlabel('|lambda|')
        ax.set_ylabel('absolute error of Z(lambda)')
        ax.legend()
        _save(fig, path)


def bound_ratio_plot(orders, ratios, path: Path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(*_positive(orders, ratios), 'o-')
        ax.axhline(1.0, color='grey', lw=0.8)
        ax.set_xlabel('n')
        ax.set_ylabel('M_n / bound')
        _save(fig, path)


def membership_plot(membership: dict, path: Path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        n_list = membership['n_list']
        for beta, row in zip(membership['beta_grid'], membership['trace_values']):
            ax.loglog(n_list, row, marker='.', label=f'beta = {beta:g}')
        ax.set_xlabel('N')
        ax.set_ylabel('Tr rho_N^beta')
        ax.legend(fontsize='x-small', ncol=2)
        _save(fig, path)
