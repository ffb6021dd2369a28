"""Light-cone lattice solver for the 1+1D Maxwell-Dirac system in characteristic form."""

from mdlattice.grid import Boundary, ConeRegion, GridSpec, cone_slice, make_cone, make_grid
from mdlattice.initial_data import DataBounds, InitialData, compute_bounds, from_psi, preset, to_psi
from mdlattice.dirac_step import SpinorField, SpinorStepConfig, step_spinor
from mdlattice.wave_step import GaugeField, advance_gauge, dalembert_eval
from mdlattice.diagnostics import RunHistory
from mdlattice.experiments import run_simulation

__all__ = [
    "Boundary",
    "ConeRegion",
    "DataBounds",
    "GaugeField",
    "GridSpec",
    "InitialData",
    "RunHistory",
    "SpinorField",
    "SpinorStepConfig",
    "advance_gauge",
    "compute_bounds",
    "cone_slice",
    "dalembert_eval",
    "from_psi",
    "make_cone",
    "make_grid",
    "preset",
    "run_simulation",
    "step_spinor",
    "to_psi",
]
