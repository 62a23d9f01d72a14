"""Shared test configuration.

Numerical tests can be slow on cold caches; disable the hypothesis
deadline so tabulation warm-up does not produce flaky failures.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")
