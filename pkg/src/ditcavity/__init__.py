"""Single-mode cavity coupled to an atomic ensemble in the weak-excitation limit.

Normal modes, steady-state reflection and emission spectra, time-domain
checks, and a Poisson-weighted fit for the cooperativity.
"""
from .model import (
    MHZ,
    ComplexModePair,
    Regime,
    RegimeError,
    SystemParams,
    Tag,
    classify_regime,
    cooperativity,
    damped_eigenvalues,
    eigensolve_2x2,
    regime_boundaries,
    sweep_eigenvalues,
    undamped_eigenfrequencies,
)
from .steady_state import (
    DetuningPair,
    DriveMode,
    FieldPair,
    ProbeConfig,
    WeakExcitationWarning,
    effective_drive,
    emission_flux,
    normalized_flux,
    reflected_flux,
    steady_field,
)
from .dynamics import (
    group_delay_closed_form,
    group_delay_numeric,
    integrate,
    ringdown_rate,
)
from .spectra import (
    butterfly_peaks,
    fit_lorentzian,
    lorentzian_halfwidth,
    minima_locus,
    scan_2d,
    scan_diagonal,
)
from .fitting import CountSurface, FitResult, fit_surface, synthesize_counts
from .leastsq import FitError, least_squares

__version__ = "0.1.0"
