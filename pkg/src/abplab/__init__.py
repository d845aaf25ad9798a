"""Numerical laboratory for adaptively biased sampling dynamics on the torus.

Grid flows, interacting-particle simulations, and the shared smoothing,
free-energy, and diagnostic machinery behind them.  Submodules load
lazily so that entry points can configure threading before numpy comes
in.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "config",
    "density",
    "dynamics",
    "exceptions",
    "equilibria",
    "grids",
    "kernels",
    "particles",
    "potentials",
    "schedules",
    "trace",
)

# name -> home submodule for the package-level API
_EXPORTS = {
    "PeriodicGrid": "grids",
    "integrate": "grids",
    "spectral_gradient": "grids",
    "wrap_coordinates": "grids",
    "spectral_derivative": "grids",
    "WrappedGaussianKernel": "kernels",
    "convolve": "kernels",
    "smoothing_gap": "kernels",
    "log_smoothing_gap": "kernels",
    "GridDensity": "density",
    "entropy": "density",
    "relative_entropy": "density",
    "fisher_information": "density",
    "Distances": "density",
    "distances": "density",
    "save_density": "density",
    "load_density": "density",
    "save_grid_values": "density",
    "load_grid_values": "density",
    "Potential": "potentials",
    "cosine_1d": "potentials",
    "double_well_1d": "potentials",
    "coupled_2d": "potentials",
    "smoothed_cosine_1d": "potentials",
    "BiasParams": "equilibria",
    "bias_potential": "equilibria",
    "smoothed_marginal": "equilibria",
    "expand_profile": "equilibria",
    "default_damping": "equilibria",
    "free_energy": "equilibria",
    "local_equilibrium": "equilibria",
    "closed_form_minimizer": "equilibria",
    "minimizer_marginal_profile": "equilibria",
    "fixed_point_solve": "equilibria",
    "PicardReport": "equilibria",
    "SandwichBounds": "equilibria",
    "sandwich_bounds": "equilibria",
    "strong_bias_entropy_gap": "equilibria",
    "GaussianModel": "equilibria",
    "OverdampedState": "dynamics",
    "KineticState": "dynamics",
    "mechanical_potential": "dynamics",
    "default_overdamped_dt": "dynamics",
    "default_v_max": "dynamics",
    "overdamped_step": "dynamics",
    "kinetic_step": "dynamics",
    "kinetic_equilibrium": "dynamics",
    "extended_free_energy": "dynamics",
    "evolve": "dynamics",
    "dissipation_identity_check": "dynamics",
    "ParticleEnsemble": "particles",
    "kde_marginal": "particles",
    "bias_force": "particles",
    "interpolate_field": "particles",
    "save_snapshot": "particles",
    "load_snapshot": "particles",
    "overdamped_particle_step": "particles",
    "kinetic_particle_step": "particles",
    "ensemble_diagnostics": "particles",
    "particle_evolve": "particles",
    "sample_from_density": "particles",
    "uniform_ensemble": "particles",
    "maxwell_velocities": "particles",
    "AlphaSchedule": "schedules",
    "alpha_at": "schedules",
    "envelope_statistic": "schedules",
    "burn_in_time": "schedules",
    "OdeComparison": "schedules",
    "ode_comparison_solve": "schedules",
    "RateFit": "schedules",
    "fit_exponential_rate": "schedules",
    "holley_stroock_bound": "schedules",
    "DiagnosticsTrace": "trace",
    "GRID_TRACE_COLUMNS": "trace",
    "PARTICLE_TRACE_COLUMNS": "trace",
    "format_float": "trace",
    "ExperimentConfig": "config",
    "RunSummary": "config",
    "load_config": "config",
    "parse_config": "config",
    "ParameterError": "exceptions",
    "DomainError": "exceptions",
    "ConfigError": "exceptions",
    "NumericsError": "exceptions",
    "StepSizeError": "exceptions",
    "TruncationError": "exceptions",
    "FitError": "exceptions",
    "FlowAborted": "exceptions",
}

__all__ = sorted(set(_SUBMODULES) | set(_EXPORTS))


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
