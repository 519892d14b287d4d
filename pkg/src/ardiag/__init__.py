"""Model diagnostics for aggregated relational data (ARD) count models."""
from .core import ArdDataset, ArdInputError, CovariateSpec, load_dataset, save_dataset, validate
from .fit import FitConfig, FittedModel, fit
from .residuals import pearson_residuals, rqr_residuals
from .correlation import tw_test
from .covariates import global_screen, local_screen, suggest_spec
from .distribution import dispersion_panel, rootogram, rootogram_set
from .simulate import SimulationSpec, preset, simulate

__all__ = [
    "ArdDataset", "ArdInputError", "CovariateSpec", "load_dataset", "save_dataset", "validate",
    "FitConfig", "FittedModel", "fit", "pearson_residuals", "rqr_residuals", "tw_test",
    "global_screen", "local_screen", "suggest_spec", "dispersion_panel", "rootogram",
    "rootogram_set", "SimulationSpec", "preset", "simulate",
]
__version__ = "0.1.0"
