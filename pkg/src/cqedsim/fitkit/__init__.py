"""Least-squares fitting of transmission spectra and related data."""
from .engine import Dataset, FitProblem, FitResult, Parameter, fit
from .models import REGISTRY, get_model
from .procedures import (bare_initial_guess, coulomb_peak_fwhm, fit_2d_joint, fit_bare,
                         fit_g0_law, fit_thermometry, map_dataset, map_label, synthesize)

__all__ = ["Dataset", "FitProblem", "FitResult", "Parameter", "fit", "REGISTRY", "get_model",
           "bare_initial_guess", "coulomb_peak_fwhm", "fit_2d_joint", "fit_bare", "fit_g0_law",
           "fit_thermometry", "map_dataset", "map_label", "synthesize"]
