"""Betting strategies that gamble against uniform p-values.

A betting strategy here is a nonnegative function of finite p-value
sequences with value 1 on the empty sequence whose integral over the next
p-value returns the current value; feeding a stream of p-values through one
yields a test martingale (capital process started at 1). Capital is tracked
in log10 so trajectories that climb dozens of orders of magnitude stay
finite, with per-step share normalization for the Jumper strategies.

Strategies
----------
simple-jumper
    Three capital shares ride the linear bets f_eps(p) = 1 + eps*(p - 1/2)
    for eps in {-1, 0, +1}. Before each bet a fraction ``jump_rate`` of the
    total capital is redistributed equally across the shares, so the
    strategy can re-commit after the stream changes character.
sleepy-jumper
    Accepted as a separate tag with an additional ``reluctance`` parameter,
    recorded in the state but currently inert: the dynamics are those of the
    simple jumper with the eps = 0 share playing the asleep state. (The
    original sleeper automaton's sleep/wake transitions are not reproduced
    here; see the README.)
mixture-power
    Capital after p_1..p_n is the uniform mixture over e in (0, 1] of the
    power bets prod_i e * p_i**(e-1), evaluated by 64-point Gauss-Legendre
    quadrature in e with p-values clamped to >= 1e-12.

``product_martingale`` multiplies two trajectories (adds them in log10);
this is only a valid martingale when the legs were randomized from disjoint
substreams, which is checked via the recorded provenance unless explicitly
overridden. ``check_betting_validity`` verifies the integral-to-one betting
contract numerically for a strategy over sampled prefixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

STRATEGY_TAGS = ("simple-jumper", "sleepy-jumper", "mixture-power")
JUMPER_EPSILONS = (-1.0, 0.0, 1.0)

_MIXTURE_CLAMP = 1e-12
_LOG10 = math.log(10.0)

# 64-point Gauss-Legendre rule mapped onto (0, 1); exponents of the power
# mixture and their weights.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
_MIX_EPS = 0.5 * (_GL_X + 1.0)
_MIX_W = 0.5 * _GL_W
_MIX_LOG_EPS = np.log(_MIX_EPS)
_MIX_LOG_W = np.log(_MIX_W)


@dataclass(frozen=True)
class BettingState:
    """Capital state of one betting strategy.

    ``shares`` (Jumper strategies) are ordered as JUMPER_EPSILONS and stored
    relative to the running total, which itself lives in ``log10_capital``;
    ``p_history`` is the p-value list the mixture strategy integrates over.
    A fresh state has capital 1.
    """

    strategy_tag: str
    jump_rate: float = 0.001
    reluctance: float = 0.01
    shares: tuple[float, ...] = ()
    p_history: tuple[float, ...] = ()
    log10_capital: float = 0.0


def initial_state(
    strategy_tag: str, jump_rate: float = 0.001, reluctance: float = 0.01
) -> BettingState:
    """Fresh state (capital exactly 1) for one of the strategy tags."""
    if strategy_tag not in STRATEGY_TAGS:
        raise ValueError(f"unknown strategy tag {strategy_tag!r}")
    if not 0.0 < jump_rate <= 1.0:
        raise ValueError(f"jump_rate must lie in (0, 1], got {jump_rate}")
    shares = (1.0 / 3.0,) * 3 if strategy_tag != "mixture-power" else ()
    return BettingState(
        strategy_tag=strategy_tag,
        jump_rate=float(jump_rate),
        reluctance=float(reluctance),
        shares=shares,
    )


def _jumper_step(shares, jump_rate, p):
    """One Jumper transition: mix shares, apply the linear bets, renormalize.

    Returns (new relative shares, growth factor of the total capital). The
    bets satisfy f_eps(p) >= 1/2 for eps in {-1, 0, +1}, so the growth factor
    is always positive.
    """
    c_down, c_hold, c_up = shares
    total = c_down + c_hold + c_up
    jump = jump_rate / 3.0 * total
    keep = 1.0 - jump_rate
    c_down = keep * c_down + jump
    c_hold = keep * c_hold + jump
    c_up = keep * c_up + jump
    edge = p - 0.5
    c_down *= 1.0 - edge
    c_up *= 1.0 + edge
    growth = c_down + c_hold + c_up
    return (c_down / growth, c_hold / growth, c_up / growth), growth


def _mixture_log10_capital(p_history) -> float:
    """log10 of the mixture-power capital over the stored p-values."""
    if not len(p_history):
        return 0.0
    p = np.clip(np.asarray(p_history, dtype=np.float64), _MIXTURE_CLAMP, 1.0)
    log_p_total = np.log(p).sum()
    terms = _MIX_LOG_W + len(p) * _MIX_LOG_EPS + (_MIX_EPS - 1.0) * log_p_total
    return float(logsumexp(terms)) / _LOG10


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value must lie in [0, 1], got {p}")
    return p


def bet_step(state: BettingState, p: float) -> BettingState:
    """Advance one strategy state by one p-value."""
    p = _check_p(p)
    if state.strategy_tag == "mixture-power":
        history = state.p_history + (p,)
        return replace(
            state, p_history=history, log10_capital=_mixture_log10_capital(history)
        )
    shares, growth = _jumper_step(state.shares, state.jump_rate, p)
    return replace(
        state,
        shares=shares,
        log10_capital=state.log10_capital + math.log10(growth),
    )


@dataclass(frozen=True, eq=False)
class MartingaleTrajectory:
    """Capital path S_0..S_n in log10 (S_0 = 1, so the path starts at 0)."""

    log10_values: np.ndarray
    provenance: str | None = None

    def __len__(self) -> int:
        return self.log10_values.size

    @property
    def final(self) -> float:
        return float(self.log10_values[-1])


def run_martingale(
    state: BettingState, p_values, provenance: str | None = None
) -> MartingaleTrajectory:
    """Feed p-values through a strategy, recording the capital after each one.

    Entry k of the trajectory is the log10 capital after k p-values; with a
    fresh state the trajectory starts at exactly 0. ``provenance`` names the
    randomization substream behind the p-values, consulted by
    ``product_martingale``.
    """
    p_values = list(p_values)
    out = np.empty(len(p_values) + 1)
    out[0] = state.log10_capital
    if state.strategy_tag == "mixture-power":
        history = state.p_history
        for k, p in enumerate(p_values):
            history = history + (_check_p(p),)
            out[k + 1] = _mixture_log10_capital(history)
    else:
        shares = state.shares
        log10_capital = state.log10_capital
        for k, p in enumerate(p_values):
            shares, growth = _jumper_step(shares, state.jump_rate, _check_p(p))
            log10_capital += math.log10(growth)
            out[k + 1] = log10_capital
    return MartingaleTrajectory(out, provenance)


def product_martingale(
    a: MartingaleTrajectory, b: MartingaleTrajectory, allow_shared: bool = False
) -> MartingaleTrajectory:
    """Pointwise product of two trajectories (sum in the log10 domain).

    The product is a valid exchangeability martingale only when the two legs
    used independent tie-breaking randomizations, so trajectories carrying
    identical provenance are refused unless ``allow_shared`` is set (the
    documented shared-seed approximation).
    """
    if len(a) != len(b):
        raise ValueError(f"trajectory lengths differ: {len(a)} vs {len(b)}")
    if (
        not allow_shared
        and a.provenance is not None
        and a.provenance == b.provenance
    ):
        raise ValueError(
            "refusing product of trajectories with shared randomization "
            f"({a.provenance}); pass allow_shared=True to override"
        )
    if a.provenance is None and b.provenance is None:
        provenance = None
    else:
        provenance = f"product({a.provenance},{b.provenance})"
    return MartingaleTrajectory(a.log10_values + b.log10_values, provenance)


@dataclass(frozen=True)
class QuadratureSpec:
    """How to integrate a strategy over its next p-value.

    ``gauss-legendre`` evaluates the strategy as a black box at the rule's
    nodes; it is exact for strategies polynomial in the next p-value (the
    Jumper step is affine, so order 2 already is). ``power-moments`` is the
    rule adapted to the power mixture: each quadrature component e*u**(e-1)
    is integrated in closed form, which no sampling rule can do because for
    small exponents almost all of the component's mass sits below the
    smallest representable float.
    """

    rule: str = "gauss-legendre"
    order: int = 2


def _default_grid(strategy) -> QuadratureSpec:
    if isinstance(strategy, str) and strategy == "mixture-power":
        return QuadratureSpec("power-moments", _MIX_EPS.size)
    if isinstance(strategy, str):
        return QuadratureSpec("gauss-legendre", 2)
    return QuadratureSpec("gauss-legendre", 8)


def _capital_fn(strategy, jump_rate, reluctance):
    """Turn a strategy tag or callable into F: p-sequence -> capital."""
    if callable(strategy):
        return strategy
    if strategy == "mixture-power":
        return lambda ps: 10.0 ** _mixture_log10_capital(ps)

    def capital(ps):
        state = initial_state(strategy, jump_rate, reluctance)
        for p in ps:
            state = bet_step(state, p)
        return 10.0 ** state.log10_capital

    return capital


def check_betting_validity(
    strategy,
    prefixes,
    grid: QuadratureSpec | None = None,
    jump_rate: float = 0.001,
    reluctance: float = 0.01,
) -> float:
    """Max deviation from the betting contract over the given prefixes.

    For each prefix the integral of F(prefix + [u]) over u in [0, 1] is
    compared against F(prefix); a valid betting strategy makes every such
    difference zero. ``strategy`` is a tag from STRATEGY_TAGS or a callable
    mapping a p-value sequence to a capital. Returns the maximum absolute
    error; anything persistently above quadrature roundoff flags an invalid
    strategy.
    """
    if grid is None:
        grid = _default_grid(strategy)
    if grid.rule == "power-moments" and strategy != "mixture-power":
        raise ValueError("power-moments quadrature applies to mixture-power only")
    capital = _capital_fn(strategy, jump_rate, reluctance)

    if grid.rule == "gauss-legendre":
        nodes, weights = np.polynomial.legendre.leggauss(grid.order)
        nodes = 0.5 * (nodes + 1.0)
        weights = 0.5 * weights
    elif grid.rule != "power-moments":
        raise ValueError(f"unknown quadrature rule {grid.rule!r}")

    worst = 0.0
    for prefix in prefixes:
        prefix = [float(p) for p in prefix]
        reference = capital(prefix)
        if grid.rule == "gauss-legendre":
            integral = sum(
                w * capital(prefix + [u]) for u, w in zip(nodes, weights)
            )
        else:
            # Closed-form u-moment per mixture component: the integral of
            # u**(e-1) over [0, 1] is 1/e. Evaluated in the linear domain,
            # an arithmetic path independent of the logsumexp evaluation of
            # F itself.
            n0 = len(prefix)
            if n0:
                p = np.clip(np.asarray(prefix), _MIXTURE_CLAMP, 1.0)
                log_p_total = np.log(p).sum()
            else:
                log_p_total = 0.0
            moments = 1.0 / _MIX_EPS
            integral = float(
                np.sum(
                    _MIX_W
                    * _MIX_EPS ** (n0 + 1)
                    * np.exp((_MIX_EPS - 1.0) * log_p_total)
                    * moments
                )
            )
        worst = max(worst, abs(integral - reference))
    return worst
