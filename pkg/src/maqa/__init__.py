"""Quantitative analysis of Markov automata."""

from .model import (
    TAU,
    Distribution,
    GoalSet,
    MABuilder,
    MarkovAutomaton,
    ModelError,
    close_maximal_progress,
    embedded_probs,
    exit_rate,
    hide_all_actions,
    validate,
)

__version__ = "0.1.0"
