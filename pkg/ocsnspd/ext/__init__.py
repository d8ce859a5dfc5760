from .manifest import RunManifest, OutputWriter, atomic_write_bytes, atomic_write_text
from .oracles import angular_spectrum_spot, monte_carlo_coupling, field_absorptance
