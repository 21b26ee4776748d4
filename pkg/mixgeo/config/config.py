import os
from typing import Any, Dict


def _env_int(name: str, default: int) -> int:
    """Read an integer setting, falling back to the default on junk values."""
    raw = os.environ.get(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        return default


class Config:
    """Base configuration."""
    ENV_NAME = 'base'

    # Logging
    DEFAULT_LOG_LEVEL = 'INFO'

    # Grids
    BINARY_RESOLUTION = 1001
    LATTICE_RESOLUTION = {3: 61, 4: 21}
    LATTICE_RESOLUTION_FALLBACK = 11
    MARGIN = 1e-4

    # Tolerances
    TOL_ALIGN = 1e-8
    TOL_PD_FACTOR = 1e-10
    TOL_FAIR = 1e-6
    TOL_ROUTE = 1e-6
    TOL_SPECTRUM = 1e-8
    TOL_WEIGHT = 1e-8
    TOL_LINK = 1e-6
    TOL_PSD_FACTOR = 1e-9

    # Boundary extrapolation and refinement
    BOUNDARY_STEPS = 7
    BOUNDARY_GROWTH = 0.10
    RICHARDSON_ORDER = 3
    GOLDEN_XTOL = 1e-10

    # Sampled checks
    SEED = 20240601
    RANDOM_DIRECTIONS = 50
    RANDOM_SEGMENTS = 24

    # Parallelism
    DEFAULT_THREADS = 1
    PIN_THREADS = False

    def __init__(self):
        # environment read per instance, after any .env files have loaded
        self.LOG_LEVEL = os.environ.get('LOG_LEVEL', self.DEFAULT_LOG_LEVEL)
        self.THREADS = self.DEFAULT_THREADS
        if not self.PIN_THREADS:
            self.THREADS = max(1, _env_int('MIXGEO_THREADS', self.DEFAULT_THREADS))

    def resolution_for(self, n: int) -> int:
        """Default points per axis for an n-outcome grid."""
        if n == 2:
            return self.BINARY_RESOLUTION
        return self.LATTICE_RESOLUTION.get(n, self.LATTICE_RESOLUTION_FALLBACK)

    def as_dict(self) -> Dict[str, Any]:
        """Echo of every default, embedded into reports."""
        return {
            'env': self.ENV_NAME,
            'binary_resolution': self.BINARY_RESOLUTION,
            'lattice_resolution': {str(k): v for k, v in self.LATTICE_RESOLUTION.items()},
            'margin': self.MARGIN,
            'tol_align': self.TOL_ALIGN,
            'tol_pd_factor': self.TOL_PD_FACTOR,
            'tol_fair': self.TOL_FAIR,
            'tol_route': self.TOL_ROUTE,
            'tol_spectrum': self.TOL_SPECTRUM,
            'tol_weight': self.TOL_WEIGHT,
            'tol_link': self.TOL_LINK,
            'tol_psd_factor': self.TOL_PSD_FACTOR,
            'boundary_steps': self.BOUNDARY_STEPS,
            'golden_xtol': self.GOLDEN_XTOL,
            'seed': self.SEED,
            'threads': self.THREADS,
        }


class DevelopmentConfig(Config):
    """Development configuration."""
    ENV_NAME = 'development'
    DEFAULT_LOG_LEVEL = 'DEBUG'


class TestingConfig(Config):
    """Testing configuration."""
    ENV_NAME = 'testing'
    # Coarser grids keep the suite fast
    BINARY_RESOLUTION = 401
    LATTICE_RESOLUTION = {3: 31, 4: 13}
    LATTICE_RESOLUTION_FALLBACK = 7
    PIN_THREADS = True


class ProductionConfig(Config):
    """Production configuration."""
    ENV_NAME = 'production'
    DEFAULT_LOG_LEVEL = 'WARNING'


# Configuration dictionary
config_by_name = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': DevelopmentConfig
}


# Get configuration based on environment
def get_config() -> Config:
    env = os.environ.get('MIXGEO_ENV', 'default')
    return config_by_name.get(env, config_by_name['default'])()
