"""evkit: event-camera stream statistics, frame-event reconstruction and
self-supervised contrast-threshold estimation."""

from .stream import Event, EventStream, Frame, NoiseConfig, StreamError, \
    inject_noise, reverse_stream, rotate90, slice_by_time
from .evrep import ChannelField, EvRep, KERNEL_BACKEND, compute_e_c, \
    compute_e_i, compute_e_t, compute_evrep, compute_evrep_streaming
from .frame_event import CameraModel, Reconstruction, log_intensity_ratio, \
    reconstruct_next, reconstruct_prev, reconstruction_mae
from .simulator import TimingModel, simulate_pair, simulate_sequence
from .estimate import EvRepSL, FitResult, SearchConfig, TrainingPair, \
    assemble_evrepsl, build_pairs, estimate_k, estimate_theta_given_k, \
    fit_camera, refine_integral
from .io import FormatError, parse_binary_events, parse_camera_model, \
    parse_channels, parse_pgm, parse_text_events, write_binary_events, \
    write_camera_model, write_channels, write_pgm
from .bench import BenchReport, run_benchmark, synthetic_stream

__version__ = "0.1.0"
