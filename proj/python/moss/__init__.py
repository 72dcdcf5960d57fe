"""Counterfactual survival curve estimation.

Right-censored observational data on a discrete time grid; estimators for
the treatment-specific marginal survival curve: Kaplan-Meier, G-computation
plug-in, IPCW, the estimating-equations estimator, classic iterative TMLE,
and the one-step TMLE that targets the whole curve at once and is monotone
by construction. Pointwise Wald intervals and simultaneous confidence bands
come from the efficient influence function.
"""

try:
    from ._moss import *  # noqa: F401,F403  (installed package layout)
    from ._moss import __version__  # noqa: F401
except ImportError:  # pragma: no cover - in-tree build layout
    from _moss import *  # noqa: F401,F403
    from _moss import __version__  # noqa: F401
