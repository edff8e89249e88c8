"""Python bindings for the virel toolkit."""

from ._virel import (
    DiscreteMdp,
    __version__,
    boltzmann_probs,
    boltzmann_table,
    counterexample_mdp,
    em_policy_iteration,
    em_q_learning,
    optimal_p1_closed,
    optimal_p1_numeric,
    random_mdp,
    run_cli,
    train,
    value_iteration,
    verify,
)

__all__ = [
    "DiscreteMdp",
    "__version__",
    "boltzmann_probs",
    "boltzmann_table",
    "counterexample_mdp",
    "em_policy_iteration",
    "em_q_learning",
    "optimal_p1_closed",
    "optimal_p1_numeric",
    "random_mdp",
    "run_cli",
    "train",
    "value_iteration",
    "verify",
]
