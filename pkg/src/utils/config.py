"""
Default configuration for gramian assembly, reduction and the benchmark.
"""
import copy
import logging
import os

logger = logging.getLogger(__name__)

JOBS_ENV_VAR = 'EMGRAM_JOBS'

# --- Default Configuration ---
DEFAULT_CONFIG = {
    'time': {
        't0': 0.0,
        'dt': 0.01,
        'tf': 1.0,
    },
    'perturbation': {
        'rotation_kind': 'single',
        'scale_kind': 'linear',
        'scale_count': 1,
        'input_scale': 1.0,    # per-channel maximum, broadcast to all inputs
        'state_scale': 1.0,    # per-state maximum
        'param_scale': 1.0,    # per-parameter maximum
    },
    'centering': 'steady',
    'pod_rank': 1,
    'integrator': 'euler',
    'tolerances': {
        'schur': 1e-12,
        'steady_state': 1e-8,
        'rank': 1e-14,
    },
    'benchmark': {
        'n': 100,
        'm': 10,
        'seed': 1,
        'order': None,          # defaults to m
        'param_order': None,    # defaults to order
        'param_range': (0.0, 0.1),
        'ordering': 'params_first',
        'perturbation_scale': 0.1,  # state and parameter perturbation maximum
    },
    'validate': {
        'n': 6,
        'm': 2,
        'o': 2,
        'seed': 1,
        'dt': 1e-4,
        'tf': None,             # defaults to 10 slowest time constants
        'tol': 5e-2,
    },
}


def _deep_merge(base, overrides):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


def get_config(overrides=None):
    """
    Returns a fresh copy of the default configuration with overrides merged in.

    Args:
        overrides (dict): Nested dictionary; keys present here replace the defaults.

    Returns:
        dict: The merged configuration.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    if overrides:
        _deep_merge(config, overrides)
    return config


def default_jobs():
    """Number of parallel simulation workers from EMGRAM_JOBS (1 if unset or invalid)."""
    raw = os.environ.get(JOBS_ENV_VAR, '').strip()
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        logger.warning("Ignoring invalid %s=%r", JOBS_ENV_VAR, raw)
        return 1
    return max(1, jobs)
