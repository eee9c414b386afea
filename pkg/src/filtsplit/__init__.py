"""Filtered splitting integrators for Hamiltonian PDEs in Fourier/sine modes,
together with their modified Hamiltonians."""
from .state import ModeIndex, ModeSet, SpectralState, l1s_norm, hs_norm, make_real_state
from .filters import FilterSpec, eval_filter, linear_eigenvalues
from .polyham import PolyHamiltonian, poisson_bracket, ad_diag, ham_norm, evaluate
from .models import ModelSpec, expand_nonlinearity, nonlinear_flow, full_energy, frequencies
from .integrators import SchemeConfig, step, inverse_step, linear_flow, trajectory
from .modified import ModifiedHamiltonian, NonResonanceError, build_Zn, nonres_check, cfl_number, modified_flow

__version__ = "0.1.0"
