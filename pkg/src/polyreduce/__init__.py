"""Numerical toolkit for k-polycosymplectic geometry and its symmetry reduction."""
from .fields import AnalyticField, ChartBox, ConstantField, DerivedField, NumericField, halton_points
from .forms import KVectorFieldRep, VectorFieldRep, VForm
from .structures import (CosymplecticStructure, KPolycosymplecticStructure, KPolysymplecticStructure,
                         extend_to_fibred, reeb_family, verify_structure)
from .dynamics import GaugeChoice, HamiltonianSystem, SectionGrid, hamiltonian_kvector_field, hdw_residuals
from .reduction import ReductionInstance, reduce, reduce_dynamics, spacetime_reduce
from .instances import get_instance, list_instances
from .report import VerificationReport

__version__ = "0.1.0"
