"""Imitation-learning benchmark: dataset aggregation and its predecessors
over pluggable learners and environments, plus exact tabular analytics."""

try:
    # installed layout: the extension lives inside the package
    from ._ilb import *  # noqa: F401,F403
    from ._ilb import __doc__ as _core_doc  # noqa: F401
except ImportError:
    # development layout: the extension sits on PYTHONPATH next to the build
    from _ilb import *  # noqa: F401,F403

__all__ = [
    "ConfigError",
    "DistributionReport",
    "IoError",
    "SchemaError",
    "TabularMDP",
    "TabularPolicy",
    "beta_schedule",
    "build_gap_family_instance",
    "build_kaariainen_chain",
    "build_quadratic_gap_example",
    "disagreement_rate",
    "exact_dagger_squared",
    "expected_cost",
    "kaariainen_expected_mistakes",
    "mix_policies",
    "q_value",
    "recoverability_u",
    "run_experiment",
    "searn_greedy_weights",
    "smile_renormalized_weights",
    "smile_weights",
    "state_distributions",
    "tv_distance",
    "verify_bounds",
]
