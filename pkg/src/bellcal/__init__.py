"""Classical polarization-optics Bell analogs, thermal-light statistics and CHSH tests."""
from .algebra import (
    CompositeState,
    JonesVector,
    ModeTag,
    Operator,
    Path,
    Source,
    expectation,
    normalize,
    schmidt_rank,
    tensor,
)
from .chsh import (
    MeasurementSetting,
    chsh_s,
    correlation,
    correlation_from_intensities,
    intensity_quad,
    maximize_s,
)
from .circuit import BenchConfig, ProductStateParams, build_bell_analog, build_product_state

__version__ = "0.1.0"
