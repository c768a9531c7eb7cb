"""Interval-state controller that maps a running error level to a growth action.

The automaton keeps an ordered list of states, one per growth amount, each
owning an error interval [lb, ub). All intervals start as [0, inf); while
several states contain an error, the lowest index (smallest action) wins.
Above-threshold errors penalize the selected state: its memory accumulates
sigma * (error - threshold), and once the memory reaches 1 the state commits
the best (lowest) error it has seen as its upper bound and as the next
state's lower bound, then resets its memory. Errors landing above a
committed bound therefore escalate to states with larger actions.
"""

import math
from dataclasses import dataclass

INF = math.inf

__all__ = ["AutomatonState", "GrowthAutomaton", "INF"]


@dataclass
class AutomatonState:
    """One controller state: interval, smoothing memory, best error, action."""

    action_ell: int
    lb: float = 0.0
    ub: float = INF
    memory: float = 0.5
    best_err: float = INF


class GrowthAutomaton:
    """Deterministic variable-structure automaton over error intervals."""

    def __init__(self, actions, threshold: float, sigma: float, memory_init: float = 0.5):
        actions = [int(a) for a in actions]
        if not actions:
            raise ValueError("actions must be non-empty")
        if any(b <= a for a, b in zip(actions, actions[1:])):
            raise ValueError("actions must be strictly increasing")
        if not 0.0 < sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")
        if threshold <= 0.0:
            raise ValueError("threshold must be positive")
        self.sigma = float(sigma)
        self.threshold = float(threshold)
        self.memory_init = float(memory_init)
        self.states = [
            AutomatonState(action_ell=a, memory=self.memory_init) for a in actions
        ]

    def __len__(self) -> int:
        return len(self.states)

    def classify(self, e: float) -> int:
        """Index of the lowest state whose interval [lb, ub) contains ``e``."""
        if e < 0.0:
            raise ValueError("error must be non-negative")
        for i, st in enumerate(self.states):
            if st.lb <= e < st.ub:
                return i
        raise RuntimeError("state intervals no longer cover the error axis")

    def act(self, i: int) -> int:
        """Growth amount attached to state ``i``; does not mutate anything."""
        if not 0 <= i < len(self.states):
            raise IndexError(f"state index {i} out of range 0..{len(self.states) - 1}")
        return self.states[i].action_ell

    def penalize(self, i: int, e: float) -> None:
        """Record an above-threshold error against state ``i``.

        Updates the state's best-error record, accumulates memory, and on a
        memory commit moves the state's upper bound (and the next state's
        lower bound) to the best recorded error. The last state keeps
        ub = inf so the intervals always cover [0, inf).
        """
        if e <= self.threshold:
            raise ValueError("penalize requires an error above the threshold")
        if not 0 <= i < len(self.states):
            raise IndexError(f"state index {i} out of range 0..{len(self.states) - 1}")
        st = self.states[i]
        if e < st.best_err:
            st.best_err = e
        st.memory += self.sigma * (e - self.threshold)
        if st.memory >= 1.0:
            st.memory = self.memory_init
            if i + 1 < len(self.states):
                st.ub = st.best_err
                self.states[i + 1].lb = st.best_err

    def step(self, e: float):
        """Full controller tick.

        Below-threshold errors are ignored (returns None); otherwise the
        matching state is penalized and its growth amount returned.
        """
        if e <= self.threshold:
            return None
        i = self.classify(e)
        ell = self.act(i)
        self.penalize(i, e)
        return ell
