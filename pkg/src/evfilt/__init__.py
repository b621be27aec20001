"""Region-grid IIR noise filters for event-camera streams.

The filters divide the sensor into square regions, each holding an IIR
filtered timestamp and inter-event interval.  An event passes when a
threshold timestamp, taken from its own region (IIR) or interpolated from
neighbouring regions (TM, BI, BIF, DIF), is recent enough.  A per-pixel
nearest-neighbour filter (NNB) is included as the comparison baseline.
"""

__version__ = "0.1.0"

from .errors import (DegenerateScene, EvfiltError, GeometryMismatch, InsufficientBins,
                     MalformedRecord, NonMonotonic, OutOfBounds, UnlabeledEvents)
from .events import (Event, EventStream, Label, LabeledEvent, SensorGeometry, StreamFormat,
                     iter_chunks, merge_streams, read_stream, write_stream)
from .region import (ContextMode, NeighborContext, RegionGrid, global_refresh, neighbor_context,
                     nnb_memory_bytes, state_memory_bits, update_region)
from .filters import (Algorithm, FilterConfig, FilterOutcome, NnbState, StreamingFilter,
                      classify_event, filter_mask, interpolate_threshold, run_filter)
from .noise import (NoiseEstimate, NoiseSpec, estimate_noise, generate_noise, inject_noise,
                    inject_recorded_noise, rescale_noise)
from .scene import SceneObject, SceneSpec, boundary_crossing_report, render_scene
from .evaluation import (RetentionMetrics, RocCurve, compare_algorithms, compute_retention,
                         default_thresholds, roc_sweep)
