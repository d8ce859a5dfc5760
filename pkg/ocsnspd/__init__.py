__version__ = '0.1.0'

from .errors import *
from .materials import ComplexIndex, MaterialTable, MaterialLibrary, MixingRule, lookup_index, effective_meander_index
from .thinfilm import Layer, LayerStack, Polarization, StackResponse, stack_response, layer_matrix, absorptance_spectrum
from .beamtrain import GaussianMode, FreeSpace, GrinSegment, FlatInterface, BeamTrain, element_abcd, propagate, square_aperture_coupling
from .detector import DeviceParameters, DetectorChannelModel, ObservationPoint, system_de, dark_rate, de_vs_dcr_curve, de_at_dcr, fit_channel, simulate_counts
from .designopt import CavityDesignProblem, LensDesignProblem, SweepSpec, optimize_cavity, optimize_lens_train, sweep
from .system import SystemConfig, LinkParams, channel_report, bb84_budget, compare_generations, scale_de
from .results import SweepResult
